"""Small dense linear algebra and seeded random streams.

Vectors and matrices are plain float64 numpy arrays. The helpers here add the
few things numpy does not promise: a fixed left-to-right reduction order, a
self-contained pseudo-inverse for the tiny systems of the 1D examples, and a
named, seedable generator.
"""
import math

import numpy as np

from .errors import DimensionError, NumericError, ParameterError

RNG_ALGORITHM = "pcg64"
PINV_MAX_DIM = 64
PINV_DEFAULT_TOL = 1e-12


def as_vec(values, name="vector", allow_nonfinite=False):
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if not allow_nonfinite and not np.all(np.isfinite(v)):
        raise NumericError(f"{name} has non-finite entries")
    return v


def dot(a, b):
    """Inner product accumulated strictly left to right.

    >>> dot([1, 2, 3], [4, 5, 6])
    32.0
    """
    a = as_vec(a, "a")
    b = as_vec(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    total = 0.0
    for x, y in zip(a.tolist(), b.tolist()):
        total += x * y
    return total


def logsumexp(v):
    """log(sum(exp(v))) with the maximum shifted out."""
    v = as_vec(v, allow_nonfinite=True)
    if v.size == 0:
        raise DimensionError("logsumexp of an empty vector")
    m = float(np.max(v))
    if v.size == 1 or not math.isfinite(m):
        return m
    return m + math.log(float(np.sum(np.exp(v - m))))


def _jacobi_svd(a, max_sweeps=60):
    """One-sided (Hestenes) Jacobi SVD of an m x n matrix with m >= n.

    Returns (u, s, v) with a = u @ diag(s) @ v.T; columns of u belonging to
    zero singular values are left as zero vectors.
    """
    m, n = a.shape
    work = a.copy()
    v = np.eye(n)
    eps = np.finfo(np.float64).eps
    # columns this small are rounding residue of a rank-deficient input
    floor = (eps * float(np.sqrt(np.sum(a * a)))) ** 2
    norms = np.einsum("ij,ij->j", work, work).tolist()
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            if norms[p] <= floor:
                continue
            for q in range(p + 1, n):
                alpha = norms[p]
                beta = norms[q]
                if beta <= floor:
                    continue
                up = work[:, p]
                uq = work[:, q]
                gamma = float(up @ uq)
                if abs(gamma) <= eps * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * up - s * uq
                new_q = s * up + c * uq
                work[:, p] = new_p
                work[:, q] = new_q
                norms[p] = float(new_p @ new_p)
                norms[q] = float(new_q @ new_q)
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
                if norms[p] <= floor:
                    break
        if not rotated:
            break
    sing = np.sqrt(np.einsum("ij,ij->j", work, work))
    u = np.zeros_like(work)
    nz = sing > 0
    u[:, nz] = work[:, nz] / sing[nz]
    return u, sing, v


def pinv_small(m, tol=PINV_DEFAULT_TOL):
    """Moore-Penrose pseudo-inverse of a matrix of at most 64 x 64.

    Singular values below ``tol`` times the largest one are dropped.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {a.shape}")
    if max(a.shape) > PINV_MAX_DIM:
        raise DimensionError(f"pinv_small supports up to {PINV_MAX_DIM}x{PINV_MAX_DIM}, got {a.shape}")
    if not tol > 0:
        raise ParameterError("tol must be positive")
    if not np.all(np.isfinite(a)):
        raise NumericError("matrix has non-finite entries")
    rows, cols = a.shape
    if rows == 0 or cols == 0:
        return np.zeros((cols, rows))
    if rows < cols:
        return pinv_small(a.T, tol).T
    u, s, v = _jacobi_svd(a)
    smax = float(s.max())
    if smax == 0.0:
        return np.zeros((cols, rows))
    inv = np.where(s > tol * smax, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    return (v * inv) @ u.T


def make_rng(seed):
    """Named, platform-stable generator for ``seed``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed)))


def spawn_seeds(seed, count):
    """Independent child seeds derived from one parent seed."""
    children = np.random.SeedSequence(int(seed)).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]
