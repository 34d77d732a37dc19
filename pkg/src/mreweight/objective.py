"""Finite sums of per-example losses, as seen by the optimization loops.

An objective exposes ``n``, ``dim``, ``losses(theta)``,
``weighted_grad(theta, w, idx=None)``, ``batch_grad(theta, idx, w)`` and the
``reg_loss``/``reg_grad`` pair. The loops in :mod:`mreweight.optim` rely on
nothing else, so the model-backed :class:`Objective` and the synthetic
:class:`QuadraticEnsemble` are interchangeable.
"""
import math

import numpy as np

from .errors import DimensionError, ParameterError


class Objective:
    """Model plus training inputs and observed labels.

    Only what the learner may see goes in here: no clean labels, no
    corruption mask. ``losses`` always uses hard labels without smoothing,
    because those are the losses multiplicative weights consume.
    """

    def __init__(self, model, X, y):
        self.model = model
        self.mw_model = model.without_smoothing()
        self.X = model._inputs(X)
        self.y = np.asarray(y)
        if self.y.shape[0] != self.X.shape[0]:
            raise DimensionError("inputs and labels differ in length")
        if self.X.shape[0] == 0:
            raise DimensionError("empty dataset")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.model.n_params

    def losses(self, theta):
        return self.mw_model.losses(theta, self.X, self.y)

    def weighted_grad(self, theta, w, idx=None):
        if idx is None:
            return self.model.weighted_grad(theta, self.X, self.y, w)
        return self.model.weighted_grad(theta, self.X[idx], self.y[idx], w)

    def batch_grad(self, theta, idx, w):
        return self.weighted_grad(theta, w, idx)

    def reg_loss(self, theta):
        return self.model.reg_loss(theta)

    def reg_grad(self, theta):
        return self.model.reg_grad(theta)


class MixupObjective(Objective):
    """Objective whose mini-batch gradients are taken on mixup pairs.

    ``weighting="primary"`` gives each mixed pair the weight of its first
    example; ``"blend"`` uses lam * w_i + (1 - lam) * w_j. Either way the
    pair weights sum to the batch weight sum, so batch normalization is
    unchanged.
    """

    def __init__(self, model, X, y, alpha, rng, weighting="primary"):
        super().__init__(model, X, y)
        if weighting not in ("primary", "blend"):
            raise ParameterError(f"unknown mixup weighting {weighting!r}")
        self.alpha = alpha
        self.rng = rng
        self.weighting = weighting

    def batch_grad(self, theta, idx, w):
        from .data import mixup_arrays

        batch = mixup_arrays(self.X, self.y, idx, self.alpha, self.rng, self.model.n_classes)
        if self.weighting == "primary":
            pair_w = w
        else:
            pair_w = batch.lam * w + (1.0 - batch.lam) * w[batch.perm]
        return self.model.weighted_grad(theta, batch.inputs, batch.targets, pair_w)


class QuadraticEnsemble:
    """l_i(theta) = 1/2 (theta - c_i)^T diag(h_i) (theta - c_i), h_i in (0, beta].

    Every weighted average is beta-smooth with beta = max h. With centers
    and the start inside the box [-r, r]^d and step sizes alpha <= 1/beta,
    every (S)GD iterate stays inside the box, which makes the Lipschitz
    constant and loss bound below valid along the whole run.
    """

    def __init__(self, centers, curvatures):
        self.centers = np.asarray(centers, dtype=np.float64)
        self.curv = np.asarray(curvatures, dtype=np.float64)
        if self.centers.ndim != 2 or self.centers.shape != self.curv.shape:
            raise DimensionError("centers and curvatures must both be (n, d)")
        if np.any(self.curv <= 0):
            raise ParameterError("curvatures must be positive")

    @classmethod
    def random(cls, rng, n, d, beta=1.0, radius=1.0, min_ratio=0.1):
        centers = rng.uniform(-radius, radius, size=(n, d))
        curv = beta * rng.uniform(min_ratio, 1.0, size=(n, d))
        curv[rng.integers(n), rng.integers(d)] = beta
        return cls(centers, curv)

    @property
    def n(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]

    @property
    def beta(self):
        return float(self.curv.max())

    def box_constants(self, radius=1.0):
        """(G, B) valid on [-radius, radius]^d."""
        diam = 2.0 * radius
        grad_bound = float(np.max(np.sqrt(((self.curv * diam) ** 2).sum(axis=1))))
        loss_bound = float(np.max(0.5 * (self.curv * diam ** 2).sum(axis=1)))
        return grad_bound, loss_bound

    def losses(self, theta):
        r = np.asarray(theta) - self.centers
        return 0.5 * (self.curv * r * r).sum(axis=1)

    def per_example_grads(self, theta):
        return self.curv * (np.asarray(theta) - self.centers)

    def weighted_grad(self, theta, w, idx=None):
        if idx is None:
            return np.asarray(w) @ (self.curv * (theta - self.centers))
        return np.asarray(w) @ (self.curv[idx] * (theta - self.centers[idx]))

    def batch_grad(self, theta, idx, w):
        return self.weighted_grad(theta, w, idx)

    def minimum(self, p):
        """Exact minimizer and minimum of sum_i p_i l_i."""
        p = np.asarray(p)
        hw = p @ self.curv
        theta = (p @ (self.curv * self.centers)) / hw
        return theta, float(p @ self.losses(theta))

    def reg_loss(self, theta):
        return 0.0

    def reg_grad(self, theta):
        return 0.0


def sampled_sgd_step_size(lipschitz, smoothness, bound, horizon):
    """alpha = sqrt(2B / (G^2 beta T)), the sampled-SGD step size."""
    return math.sqrt(2.0 * bound / (lipschitz ** 2 * smoothness * horizon))
