"""The two one-dimensional noisy-label examples, with their analytic bounds.

Both use inputs x_i = y_i in {-1, +1}. A fraction sigma = 1/2 - delta of the
examples is corrupted: the logistic case flips the label, the linear case
adds an offset eps_k with |eps_k| = epsilon.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DimensionError, ParameterError
from .losses import LossKind, LossModel, ModelKind
from .objective import Objective
from .optim import OptimConfig, mr_gd_run
from .reweighting import ReweightState, init_uniform
from .tensor import dot, pinv_small

KINDS = ("logistic", "linear")


@dataclass(frozen=True)
class OneDSetup:
    kind: str
    x: np.ndarray
    y_tilde: np.ndarray
    mask: np.ndarray
    epsilon: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"kind must be one of {KINDS}")
        x = np.asarray(self.x, dtype=np.float64)
        yt = np.asarray(self.y_tilde, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if x.ndim != 1 or yt.shape != x.shape or mask.shape != x.shape:
            raise DimensionError("x, y_tilde and mask must be equal-length vectors")
        if not np.all(np.abs(x) == 1.0):
            raise ParameterError("inputs must lie in {-1, +1}")
        if np.any(yt[~mask] != x[~mask]):
            raise ParameterError("uncorrupted examples must have y_tilde == y == x")
        if not mask.sum() < 0.5 * x.size:
            raise ParameterError("the corrupted fraction must stay below 1/2")
        for name, arr in (("x", x), ("y_tilde", yt), ("mask", mask)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self):
        return self.x.size

    @property
    def y(self):
        return self.x

    @property
    def sigma(self):
        return float(self.mask.sum()) / self.n

    @property
    def delta(self):
        # (N - 2k) / 2N rounds once, so N=15, k=5 gives exactly 1/6
        return float(self.n - 2 * int(self.mask.sum())) / (2 * self.n)

    @property
    def offsets(self):
        """eps_i = y_tilde_i - y_i (zero outside the mask)."""
        return self.y_tilde - self.y


def make_setup(n, sigma, epsilon=1.0, kind="logistic", rng=None, symmetric_signs=False):
    """Random 1D problem: x_i = y_i uniform in {-1, +1}, round(sigma n) corrupted.

    Linear corruptions oppose the clean label (eps_k = -epsilon y_k) unless
    ``symmetric_signs`` picks each sign at random.
    """
    if kind not in KINDS:
        raise ParameterError(f"kind must be one of {KINDS}")
    if not 0.0 <= sigma < 0.5:
        raise ParameterError(f"sigma must lie in [0, 1/2), got {sigma}")
    if n < 1:
        raise ParameterError("n must be >= 1")
    if kind == "linear" and not epsilon > 0:
        raise ParameterError("epsilon must be positive")
    k = int(round(sigma * n))
    if sigma > 0 and k < 1:
        raise ParameterError(f"sigma={sigma} corrupts no example out of {n}")
    x = rng.choice([-1.0, 1.0], size=n)
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=k, replace=False)] = True
    yt = x.copy()
    if kind == "logistic":
        yt[mask] = -x[mask]
    else:
        signs = rng.choice([-1.0, 1.0], size=k) if symmetric_signs else -x[mask]
        yt[mask] = x[mask] + epsilon * signs
    return OneDSetup(kind, x, yt, mask, float(epsilon))


@dataclass
class OneDTrace:
    theta: np.ndarray
    clean_loss: np.ndarray
    observed_loss: np.ndarray
    dists: np.ndarray | None = None
    clean_mass: np.ndarray | None = None
    corrupt_mass: np.ndarray | None = None

    @property
    def epochs(self):
        return self.theta.size - 1

    def rows(self):
        for t in range(self.theta.size):
            row = {
                "epoch": t,
                "theta": float(self.theta[t]),
                "clean_loss": float(self.clean_loss[t]),
                "observed_loss": float(self.observed_loss[t]),
            }
            if self.corrupt_mass is not None:
                row["clean_mass"] = float(self.clean_mass[t])
                row["corrupt_mass"] = float(self.corrupt_mass[t])
            yield row


def _trace(setup, thetas, dists, clean_fn, observed_fn):
    thetas = np.asarray(thetas, dtype=np.float64)
    dists = None if dists is None else np.asarray(dists)
    corrupt = None if dists is None else dists[:, setup.mask].sum(axis=1)
    clean = None if dists is None else dists[:, ~setup.mask].sum(axis=1)
    return OneDTrace(thetas, clean_fn(thetas), observed_fn(thetas), dists, clean, corrupt)


# -- logistic example ---------------------------------------------------------

def logistic_clean_loss(theta):
    """L(theta) = log(1 + exp(-theta)) when every x_i = y_i."""
    return np.logaddexp(0.0, -np.asarray(theta, dtype=np.float64))


def logistic_observed_loss(theta, sigma):
    theta = np.asarray(theta, dtype=np.float64)
    return sigma * np.logaddexp(0.0, theta) + (1.0 - sigma) * np.logaddexp(0.0, -theta)


def logistic_observed_grad(theta, sigma):
    return sigma / (1.0 + math.exp(-theta)) - (1.0 - sigma) / (1.0 + math.exp(theta))


def logistic_plateau(sigma):
    """Critical point log((1 - sigma) / sigma) of the noisy logistic loss."""
    return math.log((1.0 - sigma) / sigma)


def clean_gd_epoch_bound(alpha, eps):
    """Epoch count after which clean logistic GD has L < eps."""
    return -math.log(math.expm1(eps)) / (alpha * math.exp(-eps) * math.expm1(eps))


def mr_logistic_epoch_bound(n, sigma, eps):
    """Epoch count after which MR-GD (eta = alpha = 1) has L <= eps."""
    delta = 0.5 - sigma
    first = -math.log(0.5) / delta + 2.0
    second = -math.log(math.expm1(eps)) / (math.exp(-eps) * math.expm1(eps)) * 2.0 * n / sigma
    return max(first, second)


def logistic_clean_gd(alpha, epochs):
    """GD from theta_0 = 0 with clean labels: theta += alpha / (1 + e^theta)."""
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    theta = np.zeros(epochs + 1)
    for t in range(epochs):
        theta[t + 1] = theta[t] + alpha / (1.0 + math.exp(theta[t]))
    loss = logistic_clean_loss(theta)
    return OneDTrace(theta, loss, loss.copy())


def logistic_noisy_gd(setup, alpha=1.0, epochs=1000):
    """Plain GD on the observed (noisy) logistic loss, theta_0 = 0."""
    if setup.kind != "logistic":
        raise ParameterError("logistic_noisy_gd needs a logistic setup")
    sigma = setup.sigma
    theta = np.zeros(epochs + 1)
    for t in range(epochs):
        theta[t + 1] = theta[t] - alpha * logistic_observed_grad(theta[t], sigma)
    dists = np.full((epochs + 1, setup.n), 1.0 / setup.n)
    return _trace(setup, theta, dists, logistic_clean_loss, lambda th: logistic_observed_loss(th, sigma))


def logistic_mr_gd(setup, epochs, eta=1.0, alpha=1.0):
    """MR with full-batch GD, exploiting that each group shares one weight.

    All corrupted examples see log(1 + e^theta) and all clean ones
    log(1 + e^-theta), so two cumulative losses describe the whole state.
    """
    if setup.kind != "logistic":
        raise ParameterError("logistic_mr_gd needs a logistic setup")
    n_cr = int(setup.mask.sum())
    n_cl = setup.n - n_cr
    cum_cl = cum_cr = 0.0
    theta = np.zeros(epochs + 1)
    p_cl = np.empty(epochs + 1)
    p_cr = np.empty(epochs + 1)
    for t in range(epochs + 1):
        a, b = -eta * cum_cl, -eta * cum_cr
        top = max(a, b)
        w_cl, w_cr = math.exp(a - top), math.exp(b - top)
        total = n_cl * w_cl + n_cr * w_cr
        p_cl[t], p_cr[t] = w_cl / total, w_cr / total
        if t == epochs:
            break
        th = theta[t]
        theta[t + 1] = th + alpha * (n_cl * p_cl[t] / (1.0 + math.exp(th)) - n_cr * p_cr[t] / (1.0 + math.exp(-th)))
        cum_cl += float(np.logaddexp(0.0, -theta[t + 1]))
        cum_cr += float(np.logaddexp(0.0, theta[t + 1]))
    dists = np.where(setup.mask[None, :], p_cr[:, None], p_cl[:, None])
    sigma = setup.sigma
    return _trace(setup, theta, dists, logistic_clean_loss, lambda th: logistic_observed_loss(th, sigma))


# -- linear example -----------------------------------------------------------

def wls_solve_1d(setup, p, verify=True, tol=1e-10):
    """Weighted least squares theta for distribution p.

    Returns x P y_tilde. With ``verify`` the textbook form
    x sqrt(P) (sqrt(P) x^T x sqrt(P))^+ sqrt(P) y_tilde is evaluated too and
    must agree to ``tol``.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (setup.n,):
        raise DimensionError(f"distribution has {p.size} entries, setup has {setup.n}")
    theta = dot(setup.x, p * setup.y_tilde)
    if verify:
        root = np.sqrt(p)
        v = root * setup.x
        full = float(v @ pinv_small(np.outer(v, v)) @ (root * setup.y_tilde))
        if abs(full - theta) > tol * max(1.0, abs(theta)):
            raise ConsistencyError(f"pseudo-inverse form {full!r} disagrees with x P y {theta!r}")
    return theta


def linear_clean_loss(theta):
    """L(theta) = mean_i 1/2 (theta x_i - y_i)^2 = 1/2 (theta - 1)^2."""
    return 0.5 * (np.asarray(theta, dtype=np.float64) - 1.0) ** 2


def _linear_observed(setup):
    def f(thetas):
        r = np.outer(thetas, setup.x) - setup.y_tilde
        return 0.5 * (r * r).mean(axis=1)
    return f


def linear_mr_ls_run(setup, eta, epochs, verify_every=1):
    """Alternate the weighted LS solution with a weights update.

    Row t of the trace holds p_t (after t updates) and theta_t = x P_t y_tilde.
    ``verify_every`` sets how often the pseudo-inverse cross-check runs
    (0 disables it).
    """
    if setup.kind != "linear":
        raise ParameterError("linear_mr_ls_run needs a linear setup")
    state = init_uniform(setup.n, eta)
    thetas = np.empty(epochs + 1)
    dists = np.empty((epochs + 1, setup.n))
    for t in range(epochs + 1):
        p = state.normalize()
        dists[t] = p
        thetas[t] = wls_solve_1d(setup, p, verify=bool(verify_every) and t % verify_every == 0)
        if t < epochs:
            state = state.accumulate(0.5 * (thetas[t] * setup.x - setup.y_tilde) ** 2)
    return _trace(setup, thetas, dists, linear_clean_loss, _linear_observed(setup))


def linear_model():
    return LossModel(ModelKind.SCALAR1D, LossKind.SQUARED, n_features=1)


def linear_mr_gd_run(setup, alpha, eta, epochs, state=None):
    """MR with full-batch GD on the squared loss, theta_0 = 0.

    ``state`` overrides the initial reweighting state (e.g. a frozen one).
    """
    if setup.kind != "linear":
        raise ParameterError("linear_mr_gd_run needs a linear setup")
    obj = Objective(linear_model(), setup.x[:, None], setup.y_tilde)
    cfg = OptimConfig(alpha=alpha, eta=eta if state is None else 1.0, epochs=epochs)
    trace = mr_gd_run(cfg, obj, np.zeros(1), state=state)
    thetas = trace.thetas[:, 0]
    dists = np.array([r.dist for r in trace.reports])
    return _trace(setup, thetas, dists, linear_clean_loss, _linear_observed(setup))


def noisy_ls_loss_floor(setup):
    """Clean loss of the unweighted LS fit: 1/2 (sum_{j corrupted} x_j eps_j / N)^2."""
    return 0.5 * (float(np.dot(setup.x, setup.offsets)) / setup.n) ** 2


def clean_prob_floor(setup, eta, t):
    """Lower bound on every clean example's probability after t updates."""
    s, n = setup.sigma, setup.n
    return 1.0 / ((1.0 - s) * n + s * n * math.exp(-eta * setup.epsilon ** 2 * setup.delta * t))


def linear_error_envelope(setup, eta, t):
    """|theta_t - 1| <= epsilon exp(-eta epsilon^2 delta t) / (1 + delta)."""
    e = setup.epsilon
    return e * math.exp(-eta * e * e * setup.delta * t) / (1.0 + setup.delta)


def linear_literal_epoch_bound(setup, eta, c):
    """Closed-form epoch count ln(epsilon / (c + 1 + delta)) / (eta epsilon^2 delta).

    Kept for reference only: for the usual parameter ranges the log argument
    is below 1 and the value is negative; checks use
    :func:`linear_error_envelope` instead.
    """
    e = setup.epsilon
    return math.log(e / (c + 1.0 + setup.delta)) / (eta * e * e * setup.delta)


def uniform_ls_theta(setup):
    return wls_solve_1d(setup, np.full(setup.n, 1.0 / setup.n), verify=False)


def frozen_state(setup):
    return ReweightState.frozen(setup.n)
