"""Dense real-matrix kernel.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  Every
function here is pure.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

#: Relative tolerance promised by :func:`spectral_radius`.
SPECTRAL_RTOL = 1e-9


class DimensionError(ValueError):
    """Raised when matrix shapes are incompatible with an operation."""


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a finite 2-d float array.

    Scalars become 1x1 matrices.  Raises ``ValueError`` on NaN/Inf.
    """
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    return arr


def _square(a) -> np.ndarray:
    arr = as_matrix(a)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    return arr


def mat_mul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def operator_norm(a, kind: str = "2", weight=None) -> float:
    """Sub-multiplicative matrix norm.

    Parameters
    ----------
    a : square matrix
    kind : ``"2"`` (induced spectral norm, the default) or ``"fro"``.
        ``norm(I_n)`` is 1 for ``"2"`` and ``sqrt(n)`` for ``"fro"``.
    weight : optional invertible matrix ``T``.  When given, the norm is
        ``||T a T^-1||``, i.e. the norm induced by the vector norm
        ``x -> ||T x||``.  It is still sub-multiplicative.
    """
    a = _square(a)
    if weight is not None:
        t = _square(weight)
        a = t @ a @ np.linalg.inv(t)
    if kind == "2":
        return float(np.linalg.norm(a, 2)) if a.size else 0.0
    if kind == "fro":
        return float(np.linalg.norm(a, "fro"))
    raise ValueError(f"unknown norm kind {kind!r}")


def batch_norm2(stack: np.ndarray) -> np.ndarray:
    """Spectral norms of a stack of matrices with shape ``(N, n, n)``."""
    if stack.shape[0] == 0:
        return np.zeros(0)
    if stack.shape[-1] == 1:
        return np.abs(stack[:, 0, 0])
    return np.linalg.norm(stack, ord=2, axis=(1, 2))


def batch_spectral_radius(stack: np.ndarray) -> np.ndarray:
    """Spectral radii of a stack of square matrices."""
    if stack.shape[0] == 0:
        return np.zeros(0)
    if stack.shape[-1] == 1:
        return np.abs(stack[:, 0, 0])
    return np.max(np.abs(np.linalg.eigvals(stack)), axis=-1)


def spectral_radius(a) -> float:
    """Largest eigenvalue modulus of ``a``.

    Uses LAPACK's Hessenberg/shifted-QR eigenvalue solver, so complex
    spectra are handled.  LAPACK failures surface as
    ``numpy.linalg.LinAlgError``.
    """
    a = _square(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(a))))


def gelfand_estimate(a, k: int = 30, kind: str = "2") -> float:
    """``||a^k||^(1/k)``, an upper bound on the spectral radius."""
    a = _square(a)
    return operator_norm(np.linalg.matrix_power(a, k), kind) ** (1.0 / k)


def mat_exp(a, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``exp(a t)`` by scaling and squaring (Pade)."""
    a = _square(a)
    at = a * t
    if not np.all(np.isfinite(at)):
        raise OverflowError("scaled matrix is not finite")
    out = scipy.linalg.expm(at)
    if not np.all(np.isfinite(out)):
        raise OverflowError("matrix exponential overflowed")
    return out
