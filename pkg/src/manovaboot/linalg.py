"""Dense matrix kernels used throughout the package.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64.
"""

from __future__ import annotations

from functools import reduce

import numpy as np
from scipy.linalg import helmert

from .errors import DimensionError, NumericalError, ShapeError

# Upper bound on the number of entries of a Kronecker product.
MAX_ENTRIES = 50_000_000

SYMMETRY_TOL = 1e-8


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or 0 in a.shape:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix has non-finite entries")
    return a


def kronecker(a, b, max_entries: int = MAX_ENTRIES) -> np.ndarray:
    """Kronecker product ``a ⊗ b``.

    Raises DimensionError when the result would exceed ``max_entries``.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows * cols > max_entries:
        raise DimensionError(
            f"Kronecker product of {a.shape} and {b.shape} has {rows}x{cols} entries, "
            f"above the cap of {max_entries}"
        )
    return np.kron(a, b)


def kron_all(mats, max_entries: int = MAX_ENTRIES) -> np.ndarray:
    return reduce(lambda x, y: kronecker(x, y, max_entries), mats)


def _check_order(n: int) -> int:
    if int(n) != n or n < 1:
        raise DimensionError(f"matrix order must be a positive integer, got {n!r}")
    return int(n)


def centering_matrix(n: int) -> np.ndarray:
    """P_n = I_n - J_n / n."""
    n = _check_order(n)
    return np.eye(n) - np.full((n, n), 1.0 / n)


def averaging_matrix(n: int) -> np.ndarray:
    """J_n / n, the matrix with all entries 1/n."""
    n = _check_order(n)
    return np.full((n, n), 1.0 / n)


def centering_basis(n: int) -> np.ndarray:
    """Orthonormal (n-1) x n basis of the row space of ``centering_matrix(n)``.

    For n = 1 the result has zero rows.
    """
    n = _check_order(n)
    if n == 1:
        return np.zeros((0, 1))
    return helmert(n)


def averaging_basis(n: int) -> np.ndarray:
    n = _check_order(n)
    return np.full((1, n), 1.0 / np.sqrt(n))


def rank_tolerance(sigma_max: float, shape: tuple[int, int]) -> float:
    return np.finfo(float).eps * max(shape) * sigma_max


def pseudo_inverse(m) -> tuple[np.ndarray, int]:
    """Moore-Penrose inverse via SVD, plus the numerical rank.

    Singular values at or below ``eps * max(rows, cols) * sigma_max`` are
    treated as zero.
    """
    m = as_matrix(m)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD did not converge for a {m.shape[0]}x{m.shape[1]} matrix "
            f"(max |entry| = {np.abs(m).max():.3g})"
        ) from exc
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(m.T.shape), 0
    keep = s > rank_tolerance(s[0], m.shape)
    rank = int(keep.sum())
    inv = (vt[:rank].T / s[:rank]) @ u[:, :rank].T
    return inv, rank


def numerical_rank(m) -> int:
    return pseudo_inverse(m)[1]


def row_space_basis(m) -> np.ndarray:
    """Orthonormal rows spanning the row space of ``m`` (SVD-based)."""
    m = as_matrix(m)
    _, s, vt = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, m.shape[1]))
    rank = int((s > rank_tolerance(s[0], m.shape)).sum())
    return vt[:rank]


def sym_sqrt(s, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """Return ``A = U diag(sqrt(max(lam, 0)))`` with ``A A' = s`` (clipped).

    Negative eigenvalues of ``s`` are clipped to zero. Raises ShapeError if
    ``s`` is not square or not symmetric within ``tol`` (relative).
    """
    s = as_matrix(s)
    if s.shape[0] != s.shape[1]:
        raise ShapeError(f"sym_sqrt needs a square matrix, got {s.shape}")
    scale = max(np.abs(s).max(), 1.0)
    if np.abs(s - s.T).max() > tol * scale:
        raise ShapeError("sym_sqrt input is not symmetric")
    lam, u = np.linalg.eigh((s + s.T) / 2)
    return u * np.sqrt(np.clip(lam, 0.0, None))


# Cholesky fast path is used only when min(diag L)^2 exceeds this fraction
# of trace(K); anything closer to singular goes through the eigen route.
CHOLESKY_FLOOR = 1e-10


def _eigen_quadratic_forms(k: np.ndarray, y: np.ndarray) -> np.ndarray:
    r = k.shape[-1]
    lam, u = np.linalg.eigh(k)
    top = np.abs(lam).max(axis=-1, keepdims=True)
    keep = lam > np.finfo(float).eps * r * top
    proj = np.einsum("...ij,...i->...j", u, y)
    inv = np.divide(1.0, lam, out=np.zeros_like(lam), where=keep)
    return np.sum(proj * proj * inv, axis=-1)


def _forward_substitution(low: np.ndarray, y: np.ndarray) -> np.ndarray:
    # solves low @ z = y for a batch of lower-triangular matrices
    z = np.empty_like(y)
    for j in range(y.shape[-1]):
        acc = np.einsum("bk,bk->b", low[:, j, :j], z[:, :j]) if j else 0.0
        z[:, j] = (y[:, j] - acc) / low[:, j, j]
    return z


def pinv_quadratic_forms(k: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Batched ``y' K^+ y`` for symmetric PSD ``K``.

    ``k`` has shape (b, r, r) and ``y`` shape (b, r). Well-conditioned
    matrices use a Cholesky solve; the rest use an eigendecomposition with
    the same relative cutoff as :func:`pseudo_inverse`.
    """
    k = np.asarray(k, dtype=float)
    y = np.asarray(y, dtype=float)
    if k.ndim == 2:
        return pinv_quadratic_forms(k[None], y[None])[0]
    if k.shape[-1] == 0:
        return np.zeros(k.shape[0])
    try:
        chol = np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        return _eigen_quadratic_forms(k, y)
    diag = np.diagonal(chol, axis1=-2, axis2=-1)
    trace = np.trace(k, axis1=-2, axis2=-1)
    good = np.isfinite(diag).all(axis=-1) & (diag.min(axis=-1) ** 2 > CHOLESKY_FLOOR * trace)
    out = np.empty(k.shape[0])
    if good.any():
        z = _forward_substitution(chol[good], y[good])
        out[good] = np.sum(z * z, axis=-1)
    if not good.all():
        out[~good] = _eigen_quadratic_forms(k[~good], y[~good])
    return out
