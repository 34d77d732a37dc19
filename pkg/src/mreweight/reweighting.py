"""Multiplicative-weights bookkeeping over training examples.

Only cumulative losses are stored. The weight of example i is
exp(-eta * cum_loss_i), and it is never materialized: ``normalize`` shifts by
the smallest cumulative loss first, so the best example always has weight 1
and the distribution cannot underflow to all zeros.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError, ParameterError


@dataclass(frozen=True)
class ReweightState:
    eta: float
    cum_loss: np.ndarray
    epoch: int = 0
    _frozen: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        cum = np.array(self.cum_loss, dtype=np.float64)
        if cum.ndim != 1 or cum.size == 0:
            raise DimensionError("cum_loss must be a non-empty vector")
        if not np.all(np.isfinite(cum)) or np.any(cum < 0):
            raise NumericError("cumulative losses must be finite and non-negative")
        cum.setflags(write=False)
        object.__setattr__(self, "cum_loss", cum)
        if self._frozen:
            if self.eta != 0:
                raise ParameterError("a frozen state has eta == 0")
        elif not self.eta > 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")

    @property
    def n(self):
        return self.cum_loss.size

    @classmethod
    def frozen(cls, n):
        """State with eta = 0: its distribution is uniform forever.

        Only meant for checking that an MR loop collapses to its uniform
        baseline; regular construction rejects eta <= 0.
        """
        if n < 1:
            raise ParameterError("n must be >= 1")
        return cls(0.0, np.zeros(n), 0, _frozen=True)

    def accumulate(self, losses):
        """Add one round of per-example losses; returns a new state."""
        losses = np.asarray(losses, dtype=np.float64)
        if losses.shape != self.cum_loss.shape:
            raise DimensionError(f"expected {self.n} losses, got shape {losses.shape}")
        if not np.all(np.isfinite(losses)):
            raise NumericError("losses must be finite")
        if np.any(losses < 0):
            raise NumericError("losses must be non-negative")
        return ReweightState(self.eta, self.cum_loss + losses, self.epoch + 1, _frozen=self._frozen)

    def set_eta(self, eta):
        """Same history, new step size; the distribution is re-derived from cum_loss."""
        if self._frozen:
            raise ParameterError("cannot change eta of a frozen state")
        return ReweightState(eta, self.cum_loss, self.epoch)

    def log_weights(self):
        return -self.eta * self.cum_loss

    def normalize(self):
        """p_i = exp(-eta c_i) / sum_j exp(-eta c_j)."""
        if self.eta == 0:
            return np.full(self.n, 1.0 / self.n)
        w = np.exp(-self.eta * (self.cum_loss - self.cum_loss.min()))
        return w / w.sum()


def init_uniform(n, eta):
    if n < 1:
        raise ParameterError("n must be >= 1")
    return ReweightState(eta, np.zeros(n))


def accumulate(state, losses):
    return state.accumulate(losses)


def normalize(state):
    return state.normalize()


def _check_simplex(p, tol=1e-9):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise DimensionError("distribution must be a non-empty vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > tol:
        raise NumericError("not a probability vector")
    return p


def sample_index(p, rng):
    """Draw i with probability p_i by inverting the cumulative sum."""
    p = _check_simplex(p)
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), p.size - 1)


def mass_of(p, indices):
    """Total probability of an index set (boolean mask or integer indices)."""
    p = np.asarray(p, dtype=np.float64)
    idx = np.asarray(indices)
    if idx.dtype == bool:
        if idx.shape != p.shape:
            raise DimensionError("mask length differs from the distribution")
        return float(p[idx].sum())
    idx = idx.astype(np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= p.size):
        raise DimensionError("index out of range")
    return float(p[idx].sum())
