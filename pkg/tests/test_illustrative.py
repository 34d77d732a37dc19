import math

import numpy as np
import pytest

from mreweight.errors import ConsistencyError, ParameterError
from mreweight.illustrative import (
    OneDSetup, clean_prob_floor, frozen_state, clean_gd_epoch_bound, linear_error_envelope,
    linear_mr_gd_run, linear_mr_ls_run, logistic_clean_gd, logistic_mr_gd, logistic_noisy_gd,
    logistic_observed_grad, logistic_plateau, make_setup, noisy_ls_loss_floor, mr_logistic_epoch_bound,
    uniform_ls_theta, wls_solve_1d,
)
from mreweight.losses import LossKind, LossModel, ModelKind
from mreweight.objective import Objective
from mreweight.optim import OptimConfig, mr_gd_run
from mreweight.tensor import make_rng


def three_point():
    """x = y = 1 everywhere, the last label flipped to -1 (offset -2)."""
    return OneDSetup("linear", np.ones(3), np.array([1.0, 1.0, -1.0]), np.array([False, False, True]), 2.0)


def lstsq_theta(setup, p):
    root = np.sqrt(p)
    sol, *_ = np.linalg.lstsq((root * setup.x)[:, None], root * setup.y_tilde, rcond=None)
    return float(sol[0])


def test_make_setup():
    s = make_setup(15, 1 / 3, rng=make_rng(0))
    assert s.mask.sum() == 5
    assert s.delta == pytest.approx(1 / 6)
    assert np.all(s.y_tilde[s.mask] == -s.x[s.mask])
    clean = make_setup(15, 0.0, kind="linear", rng=make_rng(0))
    np.testing.assert_array_equal(clean.y_tilde, clean.y)
    flip = make_setup(15, 1 / 3, epsilon=2.0, kind="linear", rng=make_rng(1))
    np.testing.assert_array_equal(flip.y_tilde[flip.mask], -flip.x[flip.mask])
    with pytest.raises(ParameterError):
        make_setup(15, 0.5, rng=make_rng(0))
    with pytest.raises(ParameterError):
        make_setup(15, 0.6, rng=make_rng(0))


def test_clean_logistic_gd():
    tr = logistic_clean_gd(1.0, 1)
    assert tr.theta[1] == 0.5
    tr = logistic_clean_gd(1.0, 500)
    assert np.all(np.diff(tr.theta) > 0) and np.all(np.diff(tr.clean_loss) < 0)
    bound = clean_gd_epoch_bound(1.0, 0.1)
    first = int(np.argmax(tr.clean_loss < 0.1))
    assert tr.clean_loss[first] < 0.1 and first <= bound


def test_noisy_logistic_plateau():
    s = make_setup(15, 1 / 3, rng=make_rng(0))
    tr = logistic_noisy_gd(s, 1.0, 10_000)
    assert abs(tr.theta[-1] - math.log(2)) < 1e-6
    assert abs(tr.clean_loss[-1] - math.log(1.5)) < 1e-6
    assert logistic_plateau(1 / 3) == pytest.approx(math.log(2), abs=1e-15)
    assert abs(logistic_observed_grad(logistic_plateau(1 / 3), 1 / 3)) < 1e-12
    clean = logistic_noisy_gd(make_setup(15, 0.0, rng=make_rng(0)), 1.0, 300)
    assert np.all(np.diff(clean.theta) > 0)


def test_noisy_gd_matches_generic_loop():
    s = make_setup(15, 1 / 3, rng=make_rng(2))
    obj = Objective(LossModel(ModelKind.SCALAR1D, LossKind.LOGISTIC), s.x[:, None], s.y_tilde)
    generic = mr_gd_run(OptimConfig(alpha=1.0, epochs=200), obj, np.zeros(1), reweight=False)
    np.testing.assert_allclose(logistic_noisy_gd(s, 1.0, 200).theta, generic.thetas[:, 0], atol=1e-12)


def test_logistic_mr_gd():
    s = make_setup(15, 1 / 3, rng=make_rng(0))
    tr = logistic_mr_gd(s, 1000)
    assert tr.theta[1] == s.delta
    assert tr.theta[1] == 1 / 6
    assert np.all(np.diff(tr.theta) > 0)
    cr = tr.dists[:, s.mask][:, 0]
    cl = tr.dists[:, ~s.mask][:, 0]
    assert np.all(cr <= cl)
    crossing = int(np.argmax(tr.clean_loss < 0.2))
    assert tr.clean_loss[crossing] < 0.2
    assert crossing <= mr_logistic_epoch_bound(15, 1 / 3, 0.2)


def test_logistic_fast_path_matches_generic_mr():
    s = make_setup(15, 1 / 3, rng=make_rng(3))
    obj = Objective(LossModel(ModelKind.SCALAR1D, LossKind.LOGISTIC), s.x[:, None], s.y_tilde)
    generic = mr_gd_run(OptimConfig(alpha=1.0, eta=1.0, epochs=300), obj, np.zeros(1))
    fast = logistic_mr_gd(s, 300)
    np.testing.assert_allclose(fast.theta, generic.thetas[:, 0], atol=1e-10)
    np.testing.assert_allclose(fast.dists, np.array([r.dist for r in generic.reports]), atol=1e-12)


def test_wls_examples():
    s = three_point()
    assert wls_solve_1d(s, np.full(3, 1 / 3)) == pytest.approx(1 / 3, abs=1e-15)
    tr = linear_mr_ls_run(s, 1.0, 1)
    losses = 0.5 * (tr.theta[0] * s.x - s.y_tilde) ** 2
    np.testing.assert_allclose(losses, [2 / 9, 2 / 9, 8 / 9], atol=1e-15)
    np.testing.assert_allclose(tr.dists[1], [0.3979, 0.3979, 0.2043], atol=1e-4)
    assert tr.theta[1] == pytest.approx(lstsq_theta(s, tr.dists[1]), abs=1e-12)
    assert abs(tr.theta[1] - 0.5915) < 1e-3
    clean = make_setup(15, 0.0, kind="linear", rng=make_rng(0))
    p = make_rng(1).dirichlet(np.ones(15))
    assert wls_solve_1d(clean, p) == pytest.approx(1.0, abs=1e-15)


def test_wls_random_simplex_against_lstsq():
    s = make_setup(15, 1 / 3, kind="linear", rng=make_rng(4))
    rng = make_rng(5)
    for _ in range(100):
        p = rng.dirichlet(np.full(15, 0.5))
        assert abs(wls_solve_1d(s, p, tol=1e-10) - lstsq_theta(s, p)) < 1e-10


def test_wls_consistency_error(monkeypatch):
    import mreweight.illustrative as ill

    monkeypatch.setattr(ill, "pinv_small", lambda m, tol=1e-12: 2.0 * np.linalg.pinv(m))
    with pytest.raises(ConsistencyError):
        ill.wls_solve_1d(three_point(), np.full(3, 1 / 3))


def test_linear_mr_ls_bounds():
    s = make_setup(15, 1 / 3, kind="linear", rng=make_rng(0))
    tr = linear_mr_ls_run(s, 0.01, 3000, verify_every=50)
    for t in range(tr.theta.size):
        assert abs(tr.theta[t] - 1.0) <= linear_error_envelope(s, 0.01, t) + 1e-12
        assert tr.dists[t, ~s.mask].min() >= clean_prob_floor(s, 0.01, t) - 1e-12
    assert np.all(np.diff(tr.corrupt_mass) <= 1e-15)
    clean = make_setup(15, 0.0, kind="linear", rng=make_rng(0))
    np.testing.assert_allclose(linear_mr_ls_run(clean, 0.01, 20).theta, np.ones(21), rtol=0, atol=1e-15)


def test_linear_mr_ls_zero_epochs_is_uniform_fit():
    s = make_setup(15, 1 / 3, kind="linear", rng=make_rng(0))
    tr = linear_mr_ls_run(s, 0.01, 0)
    assert tr.theta.size == 1
    assert tr.theta[0] == uniform_ls_theta(s)


def test_linear_mr_gd():
    clean = make_setup(15, 0.0, kind="linear", rng=make_rng(0))
    assert linear_mr_gd_run(clean, 1.0, 0.01, 1).theta[1] == pytest.approx(1.0, abs=1e-15)
    s = make_setup(15, 1 / 3, kind="linear", rng=make_rng(0))
    tr = linear_mr_gd_run(s, 1.0, 0.01, 2000)
    assert abs(tr.theta[-1] - 1.0) < 0.05
    frozen = linear_mr_gd_run(s, 1.0, 0.01, 50, state=frozen_state(s))
    assert frozen.theta[-1] == pytest.approx(uniform_ls_theta(s), abs=1e-12)
    assert uniform_ls_theta(s) == pytest.approx(1.0 + np.dot(s.x, s.offsets) / s.n, abs=1e-15)


def test_noisy_ls_loss_floor():
    assert noisy_ls_loss_floor(make_setup(15, 0.0, kind="linear", rng=make_rng(0))) == 0.0
    assert noisy_ls_loss_floor(make_setup(15, 1 / 3, kind="linear", rng=make_rng(0))) == pytest.approx(1 / 18)
    x = np.ones(6)
    yt = np.array([2.0, 0.0, 1.0, 1.0, 1.0, 1.0])
    s = OneDSetup("linear", x, yt, np.array([True, True, False, False, False, False]))
    assert noisy_ls_loss_floor(s) == 0.0


def test_trace_rows():
    s = make_setup(15, 1 / 3, rng=make_rng(0))
    rows = list(logistic_mr_gd(s, 3).rows())
    assert [r["epoch"] for r in rows] == [0, 1, 2, 3]
    assert set(rows[0]) == {"epoch", "theta", "clean_loss", "observed_loss", "clean_mass", "corrupt_mass"}
    assert rows[0]["corrupt_mass"] == pytest.approx(1 / 3)
