"""Dense Hermitian functional calculus and log-determinants.

Operators are plain ``numpy`` arrays.  Everything goes through a full
eigendecomposition; dimensions stay in the low thousands.

The determinant formulas need ``log det(1 + (M M^*)^q)`` for products
``M = D1 W D2`` of a unitary ``W`` with widely graded diagonals.  A plain SVD
resolves singular values only to ``eps * ||M||`` absolutely, which is useless
for ``q < 1/2`` once the grading spans many decades.  :func:`graded_log_singular_values`
uses LAPACK's preconditioned Jacobi SVD (``dgejsv``, ``JOBA='F'``), which is
accurate in the relative sense for exactly this structure.
"""

from __future__ import annotations

import warnings
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

__all__ = [
    "EigenSystem",
    "is_hermitian",
    "eig",
    "apply_fn",
    "propagator",
    "logdet_one_plus_psd",
    "logdet_one_plus_general",
    "log1p_exp",
    "graded_log_singular_values",
    "logdet_one_plus_gram_power",
]

HERMITIAN_RTOL = 1e-12
PSD_CLAMP = 1e-12
PSD_BROKEN = 1e-8
_EPS = np.finfo(float).eps


class EigenSystem(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray

    def apply(self, f) -> np.ndarray:
        fv = f(self.values)
        return (self.vectors * fv[None, :]) @ self.vectors.conj().T


def is_hermitian(A: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    scale = 1.0 + (np.abs(A).max() if A.size else 0.0)
    return bool(np.abs(A - A.conj().T).max(initial=0.0) <= rtol * scale)


def _fix_phases(V: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each column made real positive
    idx = np.argmax(np.abs(V) > np.abs(V).max(axis=0, keepdims=True) * (1 - 1e-9), axis=0)
    piv = V[idx, np.arange(V.shape[1])]
    ph = np.where(np.abs(piv) > 0, piv / np.abs(piv), 1.0)
    return V / ph[None, :]


def eig(A: np.ndarray, check: bool = True) -> EigenSystem:
    """Ascending eigenvalues and phase-fixed unitary eigenvectors of Hermitian ``A``."""
    A = np.asarray(A)
    if check and not is_hermitian(A):
        raise ValueError("eig expects a Hermitian matrix")
    w, V = np.linalg.eigh(A)
    return EigenSystem(w, _fix_phases(V))


def apply_fn(A, f: Callable[[np.ndarray], np.ndarray], es: EigenSystem | None = None) -> np.ndarray:
    """``V f(diag) V^*``.  ``f`` is applied to the real spectrum and may return complex values."""
    es = eig(A) if es is None else es
    with np.errstate(all="raise"):
        try:
            fv = np.asarray(f(es.values))
        except FloatingPointError as exc:
            raise ValueError(f"function not defined on the spectrum: {exc}") from None
    if not np.all(np.isfinite(fv)):
        raise ValueError("function not finite on the spectrum")
    return (es.vectors * fv[None, :]) @ es.vectors.conj().T


def propagator(h, t: float, es: EigenSystem | None = None) -> np.ndarray:
    """Unitary ``exp(i t h)``."""
    es = eig(h) if es is None else es
    return (es.vectors * np.exp(1j * t * es.values)[None, :]) @ es.vectors.conj().T


def log1p_exp(x):
    """``log(1 + e^x)`` without overflow."""
    return np.logaddexp(0.0, x)


def logdet_one_plus_psd(A: np.ndarray) -> float:
    """``sum log(1 + lambda_i)`` for Hermitian positive semidefinite ``A``."""
    w = np.linalg.eigvalsh(A)
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.size and w.min() < -PSD_BROKEN * scale:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {w.min():.3e})")
    w = np.where(w < PSD_CLAMP * scale, np.maximum(w, 0.0), w)
    return float(np.sum(np.log1p(w)))


def logdet_one_plus_general(A: np.ndarray) -> complex:
    """``log det(1 + A)`` accumulated along an LU factorisation.

    The imaginary part is the sum of the principal arguments of the pivots
    (plus ``pi`` per row swap), so ``exp`` of the result is the determinant but
    the branch is not folded back into ``(-pi, pi]``.
    """
    B = np.eye(A.shape[0], dtype=complex) + np.asarray(A, dtype=complex)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(B, check_finite=True)
    d = np.diag(lu)
    if np.any(d == 0):
        raise np.linalg.LinAlgError("1 + A is singular")
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    return complex(np.sum(np.log(d.astype(complex))) + 1j * np.pi * (swaps % 2))


def _realify(M: np.ndarray) -> np.ndarray:
    R, I = M.real, M.imag
    return np.block([[R, -I], [I, R]])


def graded_log_singular_values(a: np.ndarray, W: np.ndarray, b: np.ndarray, method: str = "jacobi") -> np.ndarray:
    """Log singular values of ``diag(e^a) W diag(e^b)``, ascending.

    ``method="jacobi"`` uses ``dgejsv`` on the real form of the product
    (each singular value appears twice there); ``"svd"`` is the plain
    divide-and-conquer SVD.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, b0 = a.max(), b.max()
    # entries below e^-700 underflow; their contribution is far below roundoff
    M = np.exp(np.maximum(a - a0, -700.0))[:, None] * W * np.exp(np.maximum(b - b0, -700.0))[None, :]
    if method == "svd":
        s = np.linalg.svd(M, compute_uv=False)
    elif method == "jacobi":
        if np.iscomplexobj(M) and np.abs(M.imag).max(initial=0.0) > 0:
            A = _realify(M)
            sva, _, _, work, _, info = lapack.dgejsv(A, joba=2, jobu=3, jobv=3, jobr=0, jobt=0, jobp=0)
            s = np.sort(sva * (work[0] / work[1]))[::2]
        else:
            sva, _, _, work, _, info = lapack.dgejsv(
                np.ascontiguousarray(M.real), joba=2, jobu=3, jobv=3, jobr=0, jobt=0, jobp=0
            )
            s = sva * (work[0] / work[1])
        if info != 0:
            raise np.linalg.LinAlgError(f"dgejsv failed with info={info}")
    else:
        raise ValueError(f"unknown method {method!r}")
    with np.errstate(divide="ignore"):
        return np.sort(np.log(s)) + a0 + b0


def _sum_log1p_pow(log_s: np.ndarray, q: float) -> float:
    return float(np.sum(np.logaddexp(0.0, 2.0 * q * log_s)))


def logdet_one_plus_gram_power(
    a: np.ndarray, W: np.ndarray, b: np.ndarray, q: float = 1.0, method: str = "auto", tol: float = 1e-12
) -> float:
    """``log det(1 + (M M^*)^q)`` with ``M = diag(e^a) W diag(e^b)``.

    ``method="auto"`` first runs the plain SVD, bounds the effect of its
    absolute error ``~ eps * sigma_max`` on the sum, and reruns with Jacobi if
    that bound exceeds ``tol``.
    """
    if method != "auto":
        return _sum_log1p_pow(graded_log_singular_values(a, W, b, method), q)
    log_s = graded_log_singular_values(a, W, b, "svd")
    top = log_s.max()
    upper = np.logaddexp(0.0, 2.0 * q * (top + np.log(np.exp(log_s - top) + 4.0 * _EPS)))
    err = float(np.sum(upper - np.logaddexp(0.0, 2.0 * q * log_s)))
    if err <= tol:
        return _sum_log1p_pow(log_s, q)
    return _sum_log1p_pow(graded_log_singular_values(a, W, b, "jacobi"), q)
