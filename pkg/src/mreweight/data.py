"""Synthetic datasets, label-noise injection, mixup and CSV ingestion."""
import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionError, ParameterError, ParseError, SchemaError


@dataclass(frozen=True)
class NoisyDataset:
    """Inputs with observed labels, plus the ground truth kept for evaluation.

    Training code should only touch ``inputs`` and ``labels`` (see
    :meth:`train_view`); ``clean_labels`` and ``mask`` are for reporting.
    """
    inputs: np.ndarray
    labels: np.ndarray
    clean_labels: np.ndarray
    mask: np.ndarray
    n_classes: int

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        clean = np.asarray(self.clean_labels, dtype=np.int64)
        mask = np.asarray(self.mask, dtype=bool)
        if X.ndim != 2:
            raise DimensionError("inputs must be an (N, d) matrix")
        n = X.shape[0]
        if y.shape != (n,) or clean.shape != (n,) or mask.shape != (n,):
            raise DimensionError("labels, clean labels and mask must all have N entries")
        if n and (y.min() < 0 or y.max() >= self.n_classes or clean.min() < 0 or clean.max() >= self.n_classes):
            raise SchemaError(f"labels must lie in [0, {self.n_classes})")
        if np.any((y != clean) != mask):
            raise DataError("mask must mark exactly the examples whose label differs from the clean one")
        for name, arr in (("inputs", X), ("labels", y), ("clean_labels", clean), ("mask", mask)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    @property
    def noise_rate(self):
        return float(self.mask.mean()) if len(self) else 0.0

    def train_view(self):
        return self.inputs, self.labels

    def subset(self, idx):
        idx = np.asarray(idx)
        return NoisyDataset(self.inputs[idx], self.labels[idx], self.clean_labels[idx], self.mask[idx], self.n_classes)

    @classmethod
    def clean(cls, inputs, labels, n_classes):
        labels = np.asarray(labels, dtype=np.int64)
        return cls(inputs, labels, labels.copy(), np.zeros(labels.shape, dtype=bool), n_classes)


def _centers(k, d, separation):
    """K centers with every pairwise distance at least ``separation``."""
    c = np.zeros((k, d))
    if d >= k:
        c[np.arange(k), np.arange(k)] = separation / math.sqrt(2.0)
    elif d == 1:
        c[:, 0] = separation * np.arange(k)
    else:
        radius = separation / (2.0 * math.sin(math.pi / k))
        angles = 2.0 * math.pi * np.arange(k) / k
        c[:, 0] = radius * np.cos(angles)
        c[:, 1] = radius * np.sin(angles)
    return c


def gen_blobs(n_per_class, n_classes, dim, separation, rng):
    """Isotropic unit-variance Gaussian clusters, one per class."""
    if n_per_class < 1 or n_classes < 1 or dim < 1:
        raise ParameterError("blobs need n_per_class, n_classes and dim >= 1")
    if not separation > 0:
        raise ParameterError("separation must be positive")
    centers = _centers(n_classes, dim, separation)
    labels = np.repeat(np.arange(n_classes), n_per_class)
    X = centers[labels] + rng.standard_normal((labels.size, dim))
    perm = rng.permutation(labels.size)
    return NoisyDataset.clean(X[perm], labels[perm], n_classes)


def inject_label_noise(ds, ratio, rng, include_original=False):
    """Relabel each example independently with probability ``ratio``.

    The new label is uniform over the other K - 1 classes, so the realized
    corruption rate matches ``ratio``. With ``include_original`` it is
    uniform over all K classes and the effective rate is ratio (K-1)/K.
    Inputs are left untouched.
    """
    if not 0.0 <= ratio < 1.0:
        raise ParameterError(f"noise ratio must lie in [0, 1), got {ratio}")
    if ratio > 0 and ds.n_classes < 2:
        raise ParameterError("label noise needs at least two classes")
    n = len(ds)
    chosen = rng.random(n) < ratio
    if include_original:
        draws = rng.integers(0, ds.n_classes, size=n)
    else:
        draws = (ds.clean_labels + rng.integers(1, max(ds.n_classes, 2), size=n)) % ds.n_classes
    observed = np.where(chosen, draws, ds.clean_labels)
    return replace(ds, labels=observed, mask=observed != ds.clean_labels)


def train_test_split(ds, eval_fraction, rng):
    if not 0.0 < eval_fraction < 1.0:
        raise ParameterError("eval fraction must lie in (0, 1)")
    n = len(ds)
    n_test = int(round(eval_fraction * n))
    if n_test < 1 or n_test >= n:
        raise ParameterError(f"eval fraction {eval_fraction} leaves an empty split for N={n}")
    perm = rng.permutation(n)
    return ds.subset(np.sort(perm[n_test:])), ds.subset(np.sort(perm[:n_test]))


@dataclass(frozen=True)
class MixupBatch:
    inputs: np.ndarray
    targets: np.ndarray
    lam: float
    indices: np.ndarray   # primary example of each pair
    partners: np.ndarray  # second example of each pair
    perm: np.ndarray      # partner position within the batch


def sample_mixup_lambda(alpha, rng):
    if not alpha > 0:
        raise ParameterError("mixup alpha must be positive")
    return float(rng.beta(alpha, alpha))


def mixup_arrays(X, y, indices, alpha, rng, n_classes, lam=None):
    """Mix a batch with a shuffled copy of itself using one lam ~ Beta(alpha, alpha)."""
    idx = np.asarray(indices, dtype=np.int64)
    if lam is None:
        lam = sample_mixup_lambda(alpha, rng)
    elif not 0.0 <= lam <= 1.0:
        raise ParameterError("lam must lie in [0, 1]")
    perm = rng.permutation(idx.size)
    onehot = np.zeros((idx.size, n_classes))
    onehot[np.arange(idx.size), np.asarray(y)[idx]] = 1.0
    Xb = np.asarray(X)[idx]
    return MixupBatch(
        inputs=lam * Xb + (1.0 - lam) * Xb[perm],
        targets=lam * onehot + (1.0 - lam) * onehot[perm],
        lam=lam,
        indices=idx,
        partners=idx[perm],
        perm=perm,
    )


def mixup_batch(ds, indices, alpha, rng, lam=None):
    X, y = ds.train_view()
    return mixup_arrays(X, y, indices, alpha, rng, ds.n_classes, lam=lam)


# -- CSV --------------------------------------------------------------------

@dataclass(frozen=True)
class CsvSchema:
    features: tuple | None = None  # None: every f<j> column in the header
    label: str = "label"
    n_classes: int | None = None   # None: max label + 1


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(ds, path, with_truth=True):
    """Header f0..f{d-1}, label[, clean_label, corrupted]; 17 significant digits."""
    header = [f"f{j}" for j in range(ds.dim)] + ["label"]
    if with_truth:
        header += ["clean_label", "corrupted"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(ds)):
            row = [_fmt(v) for v in ds.inputs[i]] + [str(int(ds.labels[i]))]
            if with_truth:
                row += [str(int(ds.clean_labels[i])), str(int(ds.mask[i]))]
            w.writerow(row)


def load_csv(path, schema=CsvSchema()):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("missing header", row=1)
    header = [h.strip() for h in rows[0]]
    features = list(schema.features) if schema.features is not None else [h for h in header if h.startswith("f") and h[1:].isdigit()]
    if not features:
        raise SchemaError("no feature columns")
    missing = [c for c in features + [schema.label] if c not in header]
    if missing:
        raise SchemaError(f"missing columns: {', '.join(missing)}")
    f_pos = [header.index(c) for c in features]
    l_pos = header.index(schema.label)
    X = np.empty((len(rows) - 1, len(features)))
    y = np.empty(len(rows) - 1, dtype=np.int64)
    for r, row in enumerate(rows[1:]):
        line = r + 2
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=line)
        try:
            X[r] = [float(row[j]) for j in f_pos]
        except ValueError as exc:
            raise ParseError(f"non-numeric feature ({exc})", row=line) from None
        try:
            y[r] = int(row[l_pos])
        except ValueError:
            raise ParseError(f"label {row[l_pos]!r} is not an integer", row=line) from None
        if not np.all(np.isfinite(X[r])):
            raise ParseError("non-finite feature", row=line)
    if y.size == 0:
        raise DataError("file has no data rows")
    k = schema.n_classes if schema.n_classes is not None else int(y.max()) + 1
    bad = np.flatnonzero((y < 0) | (y >= k))
    if bad.size:
        raise SchemaError(f"row {bad[0] + 2}: label {y[bad[0]]} outside [0, {k})")
    return NoisyDataset.clean(X, y, k)
