"""Gradient loops that alternate parameter updates with reweighting.

Three loops share one reporting format:

* ``mr_gd_run``: full-batch gradient steps on the p-weighted loss, then a
  multiplicative-weights update with the losses at the new parameters.
* ``mr_sgd_run``: epochs of mini-batch steps under a fixed distribution; each
  batch gradient is divided by the batch's weight sum. A forward pass at the
  end of the epoch feeds the weights.
* ``mr_sampled_sgd_run``: one example per step, drawn from p_t.

Each has a uniform baseline (``gd_run``, ``sgd_run``, ``sampled_sgd_run``)
that runs the same code path with the distribution pinned to 1/N.

Trace indexing: ``reports[t]`` holds (theta_t, p_t), with p_t built from the
losses at theta_1..theta_t. A run of T epochs has T + 1 reports; the last one
describes the final iterate.
"""
import bisect
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DimensionError, ParameterError, TrainingDiverged
from .objective import sampled_sgd_step_size
from .reweighting import init_uniform, mass_of, sample_index
from .tensor import make_rng

log = logging.getLogger(__name__)

MIN_BATCH_WEIGHT = 1e-300


@dataclass(frozen=True)
class OptimConfig:
    alpha: float
    eta: float = 0.01
    batch_size: int = 1
    epochs: int = 1
    momentum: float = 0.0
    seed: int = 0
    lr_milestones: tuple = ()
    lr_decay: float = 0.1
    eta_milestones: tuple = ()
    eta_factor: float = 1.5
    mw_updates_per_epoch: int = 1

    def __post_init__(self):
        object.__setattr__(self, "lr_milestones", tuple(sorted(self.lr_milestones)))
        object.__setattr__(self, "eta_milestones", tuple(sorted(self.eta_milestones)))
        if not self.alpha > 0:
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if not self.eta > 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ParameterError("epochs must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ParameterError("momentum must lie in [0, 1)")
        if not self.lr_decay > 0 or not self.eta_factor > 0:
            raise ParameterError("schedule factors must be positive")
        if self.mw_updates_per_epoch < 1:
            raise ParameterError("mw_updates_per_epoch must be >= 1")

    def alpha_at(self, epoch):
        return self.alpha * self.lr_decay ** bisect.bisect_right(self.lr_milestones, epoch)

    def eta_at(self, epoch):
        return self.eta * self.eta_factor ** bisect.bisect_right(self.eta_milestones, epoch)


@dataclass
class StepReport:
    epoch: int
    theta: np.ndarray
    dist: np.ndarray
    losses: np.ndarray
    weighted_loss: float
    grad_norm: float
    reg_loss: float = 0.0
    eta: float = 0.0
    alpha: float = 0.0
    skipped_batches: int = 0
    noisy_mass: float | None = None


@dataclass
class OptimTrace:
    reports: list = field(default_factory=list)
    state: object = None

    @property
    def final_theta(self):
        return self.reports[-1].theta

    @property
    def thetas(self):
        return np.array([r.theta for r in self.reports])

    @property
    def weighted_losses(self):
        return np.array([r.weighted_loss for r in self.reports])

    @property
    def grad_norms(self):
        return np.array([r.grad_norm for r in self.reports])

    @property
    def noisy_masses(self):
        return np.array([np.nan if r.noisy_mass is None else r.noisy_mass for r in self.reports])


def _uniform(n):
    return np.full(n, 1.0 / n)


def _check_finite(values, what, epoch, batch=None):
    if not np.all(np.isfinite(values)):
        raise TrainingDiverged(f"non-finite {what}", epoch=epoch, batch=batch)


def _make_report(obj, epoch, theta, p, losses, grad, state, alpha, mask, skipped=0):
    reg = obj.reg_loss(theta)
    return StepReport(
        epoch=epoch,
        theta=np.array(theta, copy=True),
        dist=p,
        losses=losses,
        weighted_loss=float(np.dot(p, losses)) + reg,
        grad_norm=float(np.linalg.norm(grad)),
        reg_loss=reg,
        eta=0.0 if state is None else state.eta,
        alpha=alpha,
        skipped_batches=skipped,
        noisy_mass=None if mask is None else mass_of(p, mask),
    )


def _start(config, obj, theta0, state, reweight):
    theta = np.array(theta0, dtype=np.float64).reshape(-1)
    if theta.shape != (obj.dim,):
        raise DimensionError(f"initial theta has {theta.size} entries, objective expects {obj.dim}")
    if not reweight:
        return theta, None
    if state is None:
        state = init_uniform(obj.n, config.eta)
    if state.n != obj.n:
        raise DimensionError("reweighting state size differs from the dataset")
    return theta, state


def _scheduled(state, config, epoch):
    if state is None or state.eta == 0:
        return state
    eta = config.eta_at(epoch)
    return state if eta == state.eta else state.set_eta(eta)


def mr_gd_step(theta, p, obj, alpha):
    """theta - alpha * sum_i p_i grad l_i(theta)."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (obj.n,):
        raise DimensionError(f"distribution has {p.size} entries, dataset has {obj.n}")
    return theta - alpha * (obj.weighted_grad(theta, p) + obj.reg_grad(theta))


def mr_gd_run(config, obj, theta0, state=None, mask=None, callback=None, reweight=True):
    theta, state = _start(config, obj, theta0, state, reweight)
    losses = obj.losses(theta)
    _check_finite(losses, "loss", 0)
    trace = OptimTrace()
    for t in range(config.epochs + 1):
        state = _scheduled(state, config, t)
        p = state.normalize() if reweight else _uniform(obj.n)
        grad = obj.weighted_grad(theta, p) + obj.reg_grad(theta)
        _check_finite(grad, "gradient", t)
        alpha = config.alpha_at(t)
        report = _make_report(obj, t, theta, p, losses, grad, state, alpha, mask)
        trace.reports.append(report)
        if callback is not None:
            callback(report)
        if t == config.epochs:
            break
        theta = theta - alpha * grad
        losses = obj.losses(theta)
        _check_finite(losses, "loss", t + 1)
        if reweight:
            state = state.accumulate(losses)
    trace.state = state
    return trace


def gd_run(config, obj, theta0, mask=None, callback=None):
    return mr_gd_run(config, obj, theta0, mask=mask, callback=callback, reweight=False)


def mr_sgd_epoch(theta, p, obj, alpha, batch_size, order, velocity=None, momentum=0.0, epoch=None):
    """One pass of normalized weighted mini-batch steps over ``order``.

    Batches are consecutive slices of ``order``. Returns
    ``(theta, velocity, skipped)`` where ``skipped`` counts batches whose
    weight sum was too small to normalize by.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (obj.n,):
        raise DimensionError(f"distribution has {p.size} entries, dataset has {obj.n}")
    if batch_size < 1 or batch_size > obj.n:
        raise ParameterError(f"batch size must lie in [1, {obj.n}], got {batch_size}")
    order = np.asarray(order, dtype=np.int64)
    theta = np.array(theta, dtype=np.float64)
    if velocity is None:
        velocity = np.zeros_like(theta)
    skipped = 0
    for m, start in enumerate(range(0, order.size, batch_size)):
        idx = order[start:start + batch_size]
        w = p[idx]
        total = w.sum()
        if total < MIN_BATCH_WEIGHT:
            skipped += 1
            log.debug("epoch %s batch %d: weight sum %.3g, update skipped", epoch, m, total)
            continue
        grad = obj.batch_grad(theta, idx, w) / total + obj.reg_grad(theta)
        _check_finite(grad, "gradient", epoch, m)
        if momentum:
            velocity = momentum * velocity + grad
            theta = theta - alpha * velocity
        else:
            theta = theta - alpha * grad
    return theta, velocity, skipped


def mr_sgd_run(config, obj, theta0, state=None, mask=None, callback=None, reweight=True):
    if config.batch_size > obj.n:
        raise ParameterError(f"batch size {config.batch_size} exceeds dataset size {obj.n}")
    theta, state = _start(config, obj, theta0, state, reweight)
    rng = make_rng(config.seed)
    velocity = np.zeros_like(theta)
    n_batches = math.ceil(obj.n / config.batch_size)
    chunks = min(config.mw_updates_per_epoch, n_batches)
    # chunk boundaries fall on batch boundaries
    cuts = [round(k * n_batches / chunks) * config.batch_size for k in range(chunks + 1)]
    losses = obj.losses(theta)
    _check_finite(losses, "loss", 0)
    trace = OptimTrace()
    skipped = 0
    for t in range(config.epochs + 1):
        state = _scheduled(state, config, t)
        p = state.normalize() if reweight else _uniform(obj.n)
        grad = obj.weighted_grad(theta, p) + obj.reg_grad(theta)
        alpha = config.alpha_at(t)
        report = _make_report(obj, t, theta, p, losses, grad, state, alpha, mask, skipped)
        trace.reports.append(report)
        if callback is not None:
            callback(report)
        if t == config.epochs:
            break
        order = rng.permutation(obj.n)
        skipped = 0
        for k in range(chunks):
            piece = order[cuts[k]:cuts[k + 1]]
            theta, velocity, s = mr_sgd_epoch(theta, p, obj, alpha, config.batch_size, piece,
                                              velocity, config.momentum, epoch=t)
            skipped += s
            losses = obj.losses(theta)
            _check_finite(losses, "loss", t + 1)
            if reweight:
                state = state.accumulate(losses)
                if k + 1 < chunks:
                    p = state.normalize()
    trace.state = state
    return trace


def sgd_run(config, obj, theta0, mask=None, callback=None):
    return mr_sgd_run(config, obj, theta0, mask=mask, callback=callback, reweight=False)


def mr_sampled_sgd_run(config, obj, theta0, state=None, profile=None, mask=None, callback=None, reweight=True):
    """SGD that samples i_t ~ p_t; ``config.epochs`` counts single steps.

    With a ``profile`` carrying ``lipschitz`` and ``bound``, the step size is
    sqrt(2B / (G^2 beta T)) instead of ``config.alpha``.
    """
    theta, state = _start(config, obj, theta0, state, reweight)
    horizon = config.epochs
    alpha = config.alpha
    if profile is not None and horizon > 0:
        if profile.lipschitz is None or profile.bound is None:
            raise ParameterError("profile needs lipschitz and bound for the sampled-SGD step size")
        alpha = sampled_sgd_step_size(profile.lipschitz, profile.beta, profile.bound, horizon)
    rng = make_rng(config.seed)
    one = np.ones(1)
    losses = obj.losses(theta)
    _check_finite(losses, "loss", 0)
    trace = OptimTrace()
    for t in range(horizon + 1):
        p = state.normalize() if reweight else _uniform(obj.n)
        grad = obj.weighted_grad(theta, p) + obj.reg_grad(theta)
        report = _make_report(obj, t, theta, p, losses, grad, state, alpha, mask)
        trace.reports.append(report)
        if callback is not None:
            callback(report)
        if t == horizon:
            break
        i = sample_index(p, rng)
        step = obj.weighted_grad(theta, one, np.array([i])) + obj.reg_grad(theta)
        _check_finite(step, "gradient", t)
        theta = theta - alpha * step
        losses = obj.losses(theta)
        _check_finite(losses, "loss", t + 1)
        if reweight:
            state = state.accumulate(losses)
    trace.state = state
    return trace


def sampled_sgd_run(config, obj, theta0, profile=None, mask=None, callback=None):
    return mr_sampled_sgd_run(config, obj, theta0, profile=profile, mask=mask, callback=callback, reweight=False)


def _require_reports(trace, minimum=2):
    reports = getattr(trace, "reports", None)
    if not reports or len(reports) < minimum:
        raise DataError(f"trace needs at least {minimum} reports")
    for r in reports:
        if r.weighted_loss is None or r.grad_norm is None:
            raise DataError(f"report for epoch {r.epoch} lacks loss/gradient snapshots")
    return reports


def descent_check(trace, beta, tol=1e-9):
    """Epochs t where F_{t+1} - F_t > -||g_t||^2 / (2 beta) + tol.

    F_t is the weighted loss under (theta_t, p_t) and g_t the weighted
    gradient; the inequality holds for a full-batch run with alpha = 1/beta.
    """
    reports = _require_reports(trace)
    bad = []
    for cur, nxt in zip(reports, reports[1:]):
        drop = nxt.weighted_loss - cur.weighted_loss
        if drop > -cur.grad_norm ** 2 / (2.0 * beta) + tol:
            bad.append(cur.epoch)
    return bad


def convergence_bound_check(trace, beta, optimum=0.0):
    """(2 beta / T)(mean_i l_i(theta_0) - optimum) - (1/T) sum_{t<T} ||g_t||^2.

    ``optimum`` may be any lower bound on the weighted loss (0 for
    non-negative losses); a non-negative margin means the bound held.
    """
    reports = _require_reports(trace)
    horizon = len(reports) - 1
    first = reports[0]
    start = float(np.mean(first.losses)) + first.reg_loss
    avg_sq = sum(r.grad_norm ** 2 for r in reports[:-1]) / horizon
    return 2.0 * beta / horizon * (start - optimum) - avg_sq
