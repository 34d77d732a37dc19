"""Per-example losses and analytic gradients for a small model zoo.

Parameters are always a flat float64 vector; ``LossModel.layout`` describes
how it splits into named blocks. Data is passed as ``X`` (n x d) and targets
``y`` whose form depends on the loss:

* logistic: labels in {-1, +1}
* squared: real targets
* cross-entropy: integer classes, or an (n x K) matrix of soft targets

Regularization is not part of any per-example loss; callers add
``reg_loss``/``reg_grad`` after averaging.
"""
import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import CapabilityError, DimensionError, ParameterError


class ModelKind(str, enum.Enum):
    SCALAR1D = "scalar1d"
    LINEAR = "linear"
    SOFTMAX = "softmax"
    MLP1 = "mlp1"


class LossKind(str, enum.Enum):
    LOGISTIC = "logistic"
    SQUARED = "squared"
    CROSS_ENTROPY = "cross_entropy"


_COMPATIBLE = {
    ModelKind.SCALAR1D: {LossKind.LOGISTIC, LossKind.SQUARED},
    ModelKind.LINEAR: {LossKind.LOGISTIC, LossKind.SQUARED},
    ModelKind.SOFTMAX: {LossKind.CROSS_ENTROPY},
    ModelKind.MLP1: {LossKind.CROSS_ENTROPY},
}


@dataclass(frozen=True)
class SmoothnessProfile:
    beta: float
    lipschitz: float | None = None
    bound: float | None = None


def _log_softmax(logits):
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _sigmoid(z):
    # exp of a non-positive argument only
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def smooth_labels(onehot, factor):
    """Mix a one-hot target with the uniform distribution over K classes."""
    onehot = np.asarray(onehot, dtype=np.float64)
    if not 0.0 <= factor < 1.0:
        raise ParameterError(f"smoothing factor must lie in [0, 1), got {factor}")
    k = onehot.shape[-1]
    return (1.0 - factor) * onehot + factor / k


@dataclass(frozen=True)
class LossModel:
    kind: ModelKind
    loss: LossKind
    n_features: int = 1
    n_classes: int = 2
    hidden: int = 16
    l2: float = 0.0
    smoothing: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "loss", LossKind(self.loss))
        if self.loss not in _COMPATIBLE[self.kind]:
            raise ParameterError(f"{self.loss.value} loss is incompatible with a {self.kind.value} model")
        if self.kind is ModelKind.SCALAR1D and self.n_features != 1:
            raise ParameterError("scalar1d models take exactly one feature")
        if self.n_features < 1:
            raise ParameterError("n_features must be >= 1")
        if self.loss is LossKind.CROSS_ENTROPY and self.n_classes < 2:
            raise ParameterError("cross-entropy needs at least two classes")
        if self.kind is ModelKind.MLP1 and self.hidden < 1:
            raise ParameterError("hidden width must be >= 1")
        if not self.l2 >= 0:
            raise ParameterError("l2 coefficient must be >= 0")
        if not 0.0 <= self.smoothing < 1.0:
            raise ParameterError("label smoothing must lie in [0, 1)")
        if self.smoothing > 0 and self.loss is not LossKind.CROSS_ENTROPY:
            raise ParameterError("label smoothing only applies to cross-entropy")

    # -- parameter layout -------------------------------------------------

    @property
    def layout(self):
        d, k, h = self.n_features, self.n_classes, self.hidden
        if self.kind in (ModelKind.SCALAR1D, ModelKind.LINEAR):
            return [("w", (d,))]
        if self.kind is ModelKind.SOFTMAX:
            return [("W", (k, d)), ("b", (k,))]
        return [("W1", (h, d)), ("b1", (h,)), ("W2", (k, h)), ("b2", (k,))]

    @property
    def n_params(self):
        return sum(math.prod(dims) for _, dims in self.layout)

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.n_params,):
            raise DimensionError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        out, start = [], 0
        for _, dims in self.layout:
            size = math.prod(dims)
            out.append(theta[start:start + size].reshape(dims))
            start += size
        return out

    def init_params(self, rng=None, scale=None):
        """Zeros for the convex models; scaled Gaussian weights for MLP1."""
        theta = np.zeros(self.n_params)
        if self.kind is not ModelKind.MLP1:
            return theta
        if rng is None:
            raise ParameterError("MLP1 initialization needs an rng")
        W1, _, W2, _ = self.unpack(theta)
        W1[...] = rng.standard_normal(W1.shape) / math.sqrt(self.n_features if scale is None else scale)
        W2[...] = rng.standard_normal(W2.shape) / math.sqrt(self.hidden)
        return theta

    def without_smoothing(self):
        return self if self.smoothing == 0 else replace(self, smoothing=0.0)

    # -- forward / backward ------------------------------------------------

    def _inputs(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if self.n_features == 1 else X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionError(f"expected inputs with {self.n_features} features, got shape {X.shape}")
        return X

    def _targets(self, y, n):
        if self.loss is LossKind.CROSS_ENTROPY:
            y = np.asarray(y)
            if y.ndim == 2:
                if y.shape != (n, self.n_classes):
                    raise DimensionError(f"soft targets must be ({n}, {self.n_classes}), got {y.shape}")
                t = y.astype(np.float64)
            else:
                y = y.reshape(-1)
                if y.shape != (n,):
                    raise DimensionError(f"expected {n} labels, got {y.shape[0]}")
                labels = y.astype(np.int64)
                if np.any(labels != y) or np.any(labels < 0) or np.any(labels >= self.n_classes):
                    raise DimensionError(f"class labels must be integers in [0, {self.n_classes})")
                t = np.zeros((n, self.n_classes))
                t[np.arange(n), labels] = 1.0
            return smooth_labels(t, self.smoothing) if self.smoothing > 0 else t
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if y.shape != (n,):
            raise DimensionError(f"expected {n} targets, got {y.shape[0]}")
        return y

    def outputs(self, theta, X):
        """Scores: (n,) for scalar/linear models, (n, K) logits otherwise."""
        X = self._inputs(X)
        parts = self.unpack(theta)
        if self.kind in (ModelKind.SCALAR1D, ModelKind.LINEAR):
            return X @ parts[0]
        if self.kind is ModelKind.SOFTMAX:
            W, b = parts
            return X @ W.T + b
        W1, b1, W2, b2 = parts
        return np.tanh(X @ W1.T + b1) @ W2.T + b2

    def predict(self, theta, X):
        out = self.outputs(theta, X)
        if out.ndim == 2:
            return out.argmax(axis=1)
        return np.where(out >= 0, 1.0, -1.0)

    def losses(self, theta, X, y):
        """Per-example data losses l_i(theta), shape (n,)."""
        X = self._inputs(X)
        t = self._targets(y, X.shape[0])
        out = self.outputs(theta, X)
        if self.loss is LossKind.LOGISTIC:
            return np.logaddexp(0.0, -t * out)
        if self.loss is LossKind.SQUARED:
            return 0.5 * (out - t) ** 2
        return -(t * _log_softmax(out)).sum(axis=1)

    def _output_grads(self, out, t):
        """d l_i / d output_i."""
        if self.loss is LossKind.LOGISTIC:
            return -t * _sigmoid(-t * out)
        if self.loss is LossKind.SQUARED:
            return out - t
        return np.exp(_log_softmax(out)) * t.sum(axis=1, keepdims=True) - t

    def weighted_grad(self, theta, X, y, weights):
        """sum_i weights_i * grad l_i(theta), computed by one backward pass."""
        X = self._inputs(X)
        n = X.shape[0]
        t = self._targets(y, n)
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape != (n,):
            raise DimensionError(f"expected {n} weights, got {w.shape[0]}")
        parts = self.unpack(theta)
        if self.kind in (ModelKind.SCALAR1D, ModelKind.LINEAR):
            g = self._output_grads(X @ parts[0], t) * w
            return X.T @ g
        if self.kind is ModelKind.SOFTMAX:
            W, b = parts
            g = self._output_grads(X @ W.T + b, t) * w[:, None]
            return np.concatenate([(g.T @ X).ravel(), g.sum(axis=0)])
        W1, b1, W2, b2 = parts
        h = np.tanh(X @ W1.T + b1)
        g = self._output_grads(h @ W2.T + b2, t) * w[:, None]
        dpre = (g @ W2) * (1.0 - h * h)
        return np.concatenate([(dpre.T @ X).ravel(), dpre.sum(axis=0), (g.T @ h).ravel(), g.sum(axis=0)])

    def per_example_grads(self, theta, X, y):
        """Row i is grad l_i(theta); shape (n, n_params)."""
        X = self._inputs(X)
        n = X.shape[0]
        t = self._targets(y, n)
        parts = self.unpack(theta)
        if self.kind in (ModelKind.SCALAR1D, ModelKind.LINEAR):
            return self._output_grads(X @ parts[0], t)[:, None] * X
        if self.kind is ModelKind.SOFTMAX:
            W, b = parts
            g = self._output_grads(X @ W.T + b, t)
            return np.concatenate([np.einsum("nk,nd->nkd", g, X).reshape(n, -1), g], axis=1)
        W1, b1, W2, b2 = parts
        h = np.tanh(X @ W1.T + b1)
        g = self._output_grads(h @ W2.T + b2, t)
        dpre = (g @ W2) * (1.0 - h * h)
        return np.concatenate([
            np.einsum("nh,nd->nhd", dpre, X).reshape(n, -1),
            dpre,
            np.einsum("nk,nh->nkh", g, h).reshape(n, -1),
            g,
        ], axis=1)

    def reg_loss(self, theta):
        return 0.5 * self.l2 * float(np.dot(theta, theta)) if self.l2 else 0.0

    def reg_grad(self, theta):
        return self.l2 * np.asarray(theta, dtype=np.float64) if self.l2 else 0.0


def loss_i(model, theta, x_i, y_i):
    """Loss of a single example."""
    y = np.asarray(y_i)
    y = y.reshape(1, -1) if y.ndim == 1 and model.loss is LossKind.CROSS_ENTROPY else y.reshape(1)
    return float(model.losses(theta, np.asarray(x_i, dtype=np.float64).reshape(1, -1), y)[0])


def grad_i(model, theta, x_i, y_i):
    y = np.asarray(y_i)
    y = y.reshape(1, -1) if y.ndim == 1 and model.loss is LossKind.CROSS_ENTROPY else y.reshape(1)
    return model.weighted_grad(theta, np.asarray(x_i, dtype=np.float64).reshape(1, -1), y, np.ones(1))


def mean_loss_and_grad(model, theta, X, y):
    n = np.asarray(X).shape[0]
    w = np.full(n, 1.0 / n)
    loss = float(np.dot(w, model.losses(theta, X, y))) + model.reg_loss(theta)
    return loss, model.weighted_grad(theta, X, y, w) + model.reg_grad(theta)


def finite_diff_check(model, theta, X, y, h=1e-6):
    """Largest relative gap between the analytic gradient of the mean loss
    and its central-difference estimate, |a - c| / (|a| + h)."""
    if not h > 0:
        raise ParameterError("h must be positive")
    theta = np.asarray(theta, dtype=np.float64)
    _, analytic = mean_loss_and_grad(model, theta, X, y)
    worst = 0.0
    for j in range(theta.size):
        up = theta.copy()
        down = theta.copy()
        up[j] += h
        down[j] -= h
        central = (mean_loss_and_grad(model, up, X, y)[0] - mean_loss_and_grad(model, down, X, y)[0]) / (2 * h)
        worst = max(worst, abs(analytic[j] - central) / (abs(analytic[j]) + h))
    return worst


def smoothness_of(model, X):
    """Smoothness constants for the convex 1D/linear cases.

    For logistic loss this is the bound sup|l''| <= mean(x_i^2), the same
    (loose) bound used for the 1D analysis, so x in {-1, +1} gives beta = 1.
    """
    X = model._inputs(X)
    if model.kind is ModelKind.SCALAR1D and model.loss is LossKind.LOGISTIC:
        x = X[:, 0]
        beta = float(np.mean(x * x)) + model.l2
        return SmoothnessProfile(beta=beta, lipschitz=float(np.max(np.abs(x))))
    if model.kind in (ModelKind.SCALAR1D, ModelKind.LINEAR) and model.loss is LossKind.SQUARED:
        cov = X.T @ X / X.shape[0]
        return SmoothnessProfile(beta=float(np.linalg.eigvalsh(cov)[-1]) + model.l2)
    raise CapabilityError(f"no analytic smoothness constant for {model.kind.value}/{model.loss.value}")
