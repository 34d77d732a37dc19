"""Randomized checker suites for the convergence and weight-decay guarantees.

Each suite returns a list of :class:`CheckResult`, one per instance, with a
signed ``margin`` (non-negative means the guarantee held with room to spare).
"""
import math
from dataclasses import dataclass

import numpy as np

from .illustrative import clean_prob_floor, linear_error_envelope, linear_mr_ls_run, make_setup
from .losses import SmoothnessProfile
from .objective import QuadraticEnsemble
from .optim import OptimConfig, OptimTrace, convergence_bound_check, descent_check, mr_gd_run, mr_sampled_sgd_run
from .errors import ParameterError
from .tensor import make_rng, spawn_seeds

SUITES = ("descent", "thm1", "thm2", "bounded-p", "thm4-decay")


@dataclass
class CheckResult:
    suite: str
    instance: int
    passed: bool
    margin: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{self.suite} #{self.instance}: {status} margin={self.margin:.3e} {self.detail}".rstrip()


def random_ensemble(rng, max_n=20, max_dim=5):
    n = int(rng.integers(2, max_n + 1))
    d = int(rng.integers(1, max_dim + 1))
    beta = float(rng.uniform(0.5, 5.0))
    return QuadraticEnsemble.random(rng, n, d, beta=beta)


def _mr_gd_on(ens, rng, epochs, eta):
    theta0 = rng.uniform(-1.0, 1.0, ens.dim)
    config = OptimConfig(alpha=1.0 / ens.beta, eta=eta, epochs=epochs)
    return mr_gd_run(config, ens, theta0)


def check_descent(instances=50, seed=0, epochs=200, eta=0.01, tol=1e-9):
    """Weighted loss drops by at least ||g||^2 / (2 beta) per MR-GD epoch."""
    out = []
    for k, s in enumerate(spawn_seeds(seed, instances)):
        rng = make_rng(s)
        ens = random_ensemble(rng)
        trace = _mr_gd_on(ens, rng, epochs, eta)
        bad = descent_check(trace, ens.beta, tol)
        slack = min(
            nxt.weighted_loss - cur.weighted_loss + cur.grad_norm ** 2 / (2.0 * ens.beta)
            for cur, nxt in zip(trace.reports, trace.reports[1:])
        )
        out.append(CheckResult("descent", k, not bad, -slack,
                               f"N={ens.n} d={ens.dim} violations={len(bad)}"))
    return out


def check_convergence_bound(instances=50, seed=0, epochs=10_000, eta=0.01, horizons=(10, 100, 1000), tol=1e-9):
    """Average squared weighted gradient against (2 beta / T)(mean loss at start).

    The bound is checked on every prefix length in ``horizons`` plus the full
    run; at the full horizon the average must also sit below ten times the
    bound value.
    """
    out = []
    for k, s in enumerate(spawn_seeds(seed, instances)):
        rng = make_rng(s)
        ens = random_ensemble(rng)
        trace = _mr_gd_on(ens, rng, epochs, eta)
        margins = []
        for T in [h for h in horizons if h < epochs] + [epochs]:
            margins.append(convergence_bound_check(OptimTrace(trace.reports[:T + 1]), ens.beta))
        first = trace.reports[0]
        bound = 2.0 * ens.beta / epochs * float(np.mean(first.losses))
        avg_sq = sum(r.grad_norm ** 2 for r in trace.reports[:-1]) / epochs
        margin = min(margins)
        ok = margin >= -tol and avg_sq < 10.0 * bound
        out.append(CheckResult("thm1", k, ok, margin, f"avg|g|^2={avg_sq:.3e} bound={bound:.3e}"))
    return out


def sampled_sgd_family(seed=0, n=10, dim=3, beta=1.0):
    """Fixed quadratic instance with G and B valid on the unit box."""
    rng = make_rng(seed)
    ens = QuadraticEnsemble.random(rng, n, dim, beta=beta)
    lipschitz, bound = ens.box_constants(1.0)
    theta0 = rng.uniform(-1.0, 1.0, dim)
    return ens, SmoothnessProfile(ens.beta, lipschitz=lipschitz, bound=bound), theta0


def check_sampled_sgd(seeds=200, seed=0, horizon=1000, eta=0.01, slack=0.10):
    """Monte-Carlo mean of (1/T) sum ||grad F_t||^2 under sampling i_t ~ p_t.

    One result per seed reports its own average; the final aggregate result
    compares the mean over seeds with G sqrt(2 beta B / T) plus ``slack``.
    """
    ens, profile, theta0 = sampled_sgd_family(seed)
    limit = profile.lipschitz * math.sqrt(2.0 * profile.beta * profile.bound / horizon)
    out = []
    averages = []
    for k, s in enumerate(spawn_seeds(seed + 1, seeds)):
        config = OptimConfig(alpha=1.0, eta=eta, epochs=horizon, seed=s)
        trace = mr_sampled_sgd_run(config, ens, theta0, profile=profile)
        avg = sum(r.grad_norm ** 2 for r in trace.reports[:-1]) / horizon
        averages.append(avg)
        out.append(CheckResult("thm2", k, True, limit - avg, "single run (informational)"))
    mean = float(np.mean(averages))
    margin = (1.0 + slack) * limit - mean
    out.append(CheckResult("thm2", seeds, margin >= 0, margin,
                           f"mean={mean:.4e} limit={limit:.4e} over {seeds} seeds"))
    return out


def _linear_runs(instances, seed, epochs, eta, n, sigma, epsilon):
    for k, s in enumerate(spawn_seeds(seed, instances)):
        setup = make_setup(n, sigma, epsilon, kind="linear", rng=make_rng(s))
        yield k, setup, linear_mr_ls_run(setup, eta, epochs, verify_every=0)


def check_bounded_p(instances=5, seed=0, epochs=10_000, eta=0.01, n=15, sigma=1 / 3, epsilon=1.0, tol=1e-12):
    """Every clean example keeps at least the guaranteed probability."""
    out = []
    for k, setup, trace in _linear_runs(instances, seed, epochs, eta, n, sigma, epsilon):
        clean = trace.dists[:, ~setup.mask].min(axis=1)
        floors = np.array([clean_prob_floor(setup, eta, t) for t in range(epochs + 1)])
        margin = float(np.min(clean - floors))
        out.append(CheckResult("bounded-p", k, margin >= -tol, margin, f"epochs={epochs}"))
    return out


def check_error_decay(instances=5, seed=0, epochs=10_000, eta=0.01, n=15, sigma=1 / 3, epsilon=1.0, tol=1e-12):
    """|theta_t - 1| stays under the exponentially shrinking envelope."""
    out = []
    for k, setup, trace in _linear_runs(instances, seed, epochs, eta, n, sigma, epsilon):
        env = np.array([linear_error_envelope(setup, eta, t) for t in range(epochs + 1)])
        margin = float(np.min(env - np.abs(trace.theta - 1.0)))
        out.append(CheckResult("thm4-decay", k, margin >= -tol, margin, f"epochs={epochs}"))
    return out


def run_suite(name, instances=None, seeds=None, seed=0, epochs=None, eta=None):
    """Dispatch by suite name; None arguments keep the suite default."""
    if name not in SUITES:
        raise ParameterError(f"unknown check {name!r}; choose from {', '.join(SUITES)}")
    kwargs = {"seed": seed}
    if eta is not None:
        kwargs["eta"] = eta
    if name == "thm2":
        if seeds is not None:
            kwargs["seeds"] = seeds
        if epochs is not None:
            kwargs["horizon"] = epochs
        return check_sampled_sgd(**kwargs)
    if instances is not None:
        kwargs["instances"] = instances
    if epochs is not None:
        kwargs["epochs"] = epochs
    fn = {"descent": check_descent, "thm1": check_convergence_bound, "bounded-p": check_bounded_p,
          "thm4-decay": check_error_decay}[name]
    return fn(**kwargs)
