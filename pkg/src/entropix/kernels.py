"""Hot numeric kernels with a numba path and a pure-numpy path.

Set ``ENTROPIX_NUMBA=0`` in the environment (before import) to force the
numpy implementations; numba is also skipped when it is not importable.
Both paths are always importable as ``<name>_numpy`` / ``<name>_numba`` so
they can be compared directly.

Kernels
-------
``logdet_ratio``
    ``log det(1 + K(E)) - log det(1 + K_0(E))`` for batches of 2x2 on-shell
    scattering matrices; ``kind`` 0 is the ES/GC matrix, 1 the finite-``p``
    matrix, 2 the ``p = inf`` matrix.
``continued_fraction``
    Backward Jacobi continued fraction ``m <- 1 / (lam - z - J^2 m)``.
``pair_weights``
    Accumulates ``w[i] * |U[j, i]|^2`` into (cluster_i, cluster_j) bins.
"""

from __future__ import annotations

import math
import os

import numpy as np

KIND_ES, KIND_P, KIND_INF = 0, 1, 2

try:  # pragma: no cover - exercised implicitly
    import numba as _nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _nb = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("ENTROPIX_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def _njit(fn):
    if not HAVE_NUMBA:
        return fn
    return _nb.njit(cache=True, fastmath=False)(fn)


# ---------------------------------------------------------------------------
# 2x2 entropic integrands
# ---------------------------------------------------------------------------


def logdet_ratio_numpy(s, kl, kr, alpha, p, kind):
    s = np.asarray(s, dtype=complex)
    kl = np.asarray(kl, dtype=float)
    kr = np.asarray(kr, dtype=float)
    s11, s12, s21, s22 = s[:, 0, 0], s[:, 0, 1], s[:, 1, 0], s[:, 1, 1]
    log_den = np.logaddexp(0.0, kl) + np.logaddexp(0.0, kr)
    log_det_k = kl + kr

    if kind == KIND_ES:
        # Delta = s^* k0 s - k0, traceless Hermitian
        d1 = (np.abs(s11) ** 2 * kl + np.abs(s21) ** 2 * kr) - kl
        z = np.conj(s11) * kl * s12 + np.conj(s21) * kr * s22
        r = np.sqrt(d1 * d1 + np.abs(z) ** 2)
        u = np.abs(alpha) * r
        sg = 1.0 if alpha >= 0 else -1.0
        ek = np.maximum(kl, kr)
        sum_e = np.exp(kl - ek) + np.exp(kr - ek)
        dif_e = np.exp(kl - ek) - np.exp(kr - ek)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(r > 0, d1 / np.where(r > 0, r, 1.0), 0.0)
        small = u < 20.0
        # small u: direct cosh/sinh; sinh(alpha r)/r -> alpha as r -> 0
        with np.errstate(invalid="ignore", divide="ignore"):
            shc = np.where(r > 1e-150, np.sinh(alpha * r) / np.where(r > 1e-150, r, 1.0), alpha)
        tr_small = np.cosh(np.where(small, alpha * r, 0.0)) * sum_e + np.where(small, shc, 0.0) * d1 * dif_e
        em = np.exp(-2.0 * u)
        tr_big = 0.5 * ((1.0 + em) * sum_e + sg * (-np.expm1(-2.0 * u)) * ratio * dif_e)
        with np.errstate(divide="ignore"):
            log_tr = np.where(small, np.log(np.where(small, tr_small, 1.0)) + ek, np.log(tr_big) + u + ek)
    elif kind == KIND_P:
        a = (1.0 - alpha) / p
        b = 2.0 * alpha / p
        q = 0.5 * p
        cb = np.maximum(b * kl, b * kr)
        el = np.exp(b * kl - cb)
        er = np.exp(b * kr - cb)
        y11 = np.abs(s11) ** 2 * el + np.abs(s12) ** 2 * er
        y22 = np.abs(s21) ** 2 * el + np.abs(s22) ** 2 * er
        y12 = s11 * np.conj(s21) * el + s12 * np.conj(s22) * er
        ca = np.maximum(a * kl, a * kr)
        dl = np.exp(a * kl - ca)
        dr = np.exp(a * kr - ca)
        x11 = dl * dl * y11
        x22 = dr * dr * y22
        x12 = dl * dr * y12
        shift = cb + 2.0 * ca
        log_detx = (2.0 * a + b) * (kl + kr) - 2.0 * shift
        tr = x11 + x22
        disc = np.maximum((x11 - x22) ** 2 + 4.0 * np.abs(x12) ** 2, 0.0)
        mu_hi = 0.5 * (tr + np.sqrt(disc))
        log_hi = np.log(mu_hi)
        log_lo = log_detx - log_hi
        log_tr = np.logaddexp(q * (log_hi + shift), q * (log_lo + shift))
    elif kind == KIND_INF:
        # L = (1 - alpha) k0 + alpha s k0 s^*
        m11 = np.abs(s11) ** 2 * kl + np.abs(s12) ** 2 * kr
        m22 = np.abs(s21) ** 2 * kl + np.abs(s22) ** 2 * kr
        m12 = s11 * np.conj(s21) * kl + s12 * np.conj(s22) * kr
        l11 = (1.0 - alpha) * kl + alpha * m11
        l22 = (1.0 - alpha) * kr + alpha * m22
        l12 = alpha * m12
        half = 0.5 * (l11 + l22)
        rad = np.sqrt(0.25 * (l11 - l22) ** 2 + np.abs(l12) ** 2)
        log_tr = np.logaddexp(half + rad, half - rad)
    else:
        raise ValueError(f"unknown kind {kind}")
    top = np.logaddexp(np.logaddexp(0.0, log_tr), log_det_k)
    return top - log_den


@_njit
def _logaddexp(x, y):
    if x == -math.inf:
        return y
    if y == -math.inf:
        return x
    m = x if x > y else y
    return m + math.log1p(math.exp(-abs(x - y)))


@_njit
def _abs2(c):
    return c.real * c.real + c.imag * c.imag


def _logdet_ratio_loop(s, kl, kr, alpha, p, kind):
    n = s.shape[0]
    out = np.empty(n)
    for i in range(n):
        s11 = s[i, 0, 0]
        s12 = s[i, 0, 1]
        s21 = s[i, 1, 0]
        s22 = s[i, 1, 1]
        a1 = kl[i]
        a2 = kr[i]
        log_den = _logaddexp(0.0, a1) + _logaddexp(0.0, a2)
        if kind == 0:
            d1 = (_abs2(s11) * a1 + _abs2(s21) * a2) - a1
            z = s11.conjugate() * a1 * s12 + s21.conjugate() * a2 * s22
            r = math.sqrt(d1 * d1 + _abs2(z))
            u = abs(alpha) * r
            ek = a1 if a1 > a2 else a2
            sum_e = math.exp(a1 - ek) + math.exp(a2 - ek)
            dif_e = math.exp(a1 - ek) - math.exp(a2 - ek)
            if u < 20.0:
                shc = math.sinh(alpha * r) / r if r > 1e-150 else alpha
                log_tr = math.log(math.cosh(alpha * r) * sum_e + shc * d1 * dif_e) + ek
            else:
                sg = 1.0 if alpha >= 0 else -1.0
                ratio = d1 / r
                tr_big = 0.5 * ((1.0 + math.exp(-2.0 * u)) * sum_e + sg * (-math.expm1(-2.0 * u)) * ratio * dif_e)
                log_tr = math.log(tr_big) + u + ek
        elif kind == 1:
            a = (1.0 - alpha) / p
            b = 2.0 * alpha / p
            q = 0.5 * p
            cb = b * a1 if b * a1 > b * a2 else b * a2
            el = math.exp(b * a1 - cb)
            er = math.exp(b * a2 - cb)
            y11 = _abs2(s11) * el + _abs2(s12) * er
            y22 = _abs2(s21) * el + _abs2(s22) * er
            y12 = s11 * s21.conjugate() * el + s12 * s22.conjugate() * er
            ca = a * a1 if a * a1 > a * a2 else a * a2
            dl = math.exp(a * a1 - ca)
            dr = math.exp(a * a2 - ca)
            x11 = dl * dl * y11
            x22 = dr * dr * y22
            x12 = dl * dr * y12
            shift = cb + 2.0 * ca
            log_detx = (2.0 * a + b) * (a1 + a2) - 2.0 * shift
            tr = x11 + x22
            disc = (x11 - x22) ** 2 + 4.0 * _abs2(x12)
            if disc < 0.0:
                disc = 0.0
            log_hi = math.log(0.5 * (tr + math.sqrt(disc)))
            log_lo = log_detx - log_hi
            log_tr = _logaddexp(q * (log_hi + shift), q * (log_lo + shift))
        else:
            m11 = _abs2(s11) * a1 + _abs2(s12) * a2
            m22 = _abs2(s21) * a1 + _abs2(s22) * a2
            m12 = s11 * s21.conjugate() * a1 + s12 * s22.conjugate() * a2
            l11 = (1.0 - alpha) * a1 + alpha * m11
            l22 = (1.0 - alpha) * a2 + alpha * m22
            l12 = alpha * m12
            half = 0.5 * (l11 + l22)
            rad = math.sqrt(0.25 * (l11 - l22) ** 2 + _abs2(l12))
            log_tr = _logaddexp(half + rad, half - rad)
        top = _logaddexp(_logaddexp(0.0, log_tr), a1 + a2)
        out[i] = top - log_den
    return out


# ---------------------------------------------------------------------------
# Jacobi continued fraction
# ---------------------------------------------------------------------------


def continued_fraction_numpy(z, lam, Jsq, m0):
    """Run ``m <- 1/(lam[n] - z - Jsq[n] m)`` for ``n = 0..D-1`` (deepest first)."""
    m = np.array(m0, dtype=complex, copy=True)
    z = np.asarray(z, dtype=complex)
    for n in range(len(lam)):
        m = 1.0 / (lam[n] - z - Jsq[n] * m)
    return m


def _continued_fraction_loop(zr, zi, lam, Jsq, m0r, m0i):
    # depth outermost so the inner loop runs over independent z values and vectorises;
    # complex division written out in real arithmetic
    mr = m0r.copy()
    mi = m0i.copy()
    for n in range(lam.shape[0]):
        a = lam[n]
        b = Jsq[n]
        for i in range(zr.shape[0]):
            dr = a - zr[i] - b * mr[i]
            di = -zi[i] - b * mi[i]
            inv = 1.0 / (dr * dr + di * di)
            mr[i] = dr * inv
            mi[i] = -di * inv
    return mr + 1j * mi


# ---------------------------------------------------------------------------
# FCS pair accumulation
# ---------------------------------------------------------------------------


def pair_weights_numpy(U, w, labels, n_clusters):
    """``P[c, c'] = sum_{i in c, j in c'} w[i] |U[j, i]|^2``."""
    A = (np.abs(U) ** 2) * w[None, :]
    idx = labels[None, :] * n_clusters + labels[:, None]
    return np.bincount(idx.ravel(), weights=A.ravel(), minlength=n_clusters * n_clusters).reshape(
        n_clusters, n_clusters
    )


def _pair_weights_loop(U, w, labels, n_clusters):
    P = np.zeros((n_clusters, n_clusters))
    n = U.shape[0]
    for j in range(n):  # row-major: U[j, :] is contiguous
        cj = labels[j]
        for i in range(n):
            u = U[j, i]
            P[labels[i], cj] += w[i] * (u.real * u.real + u.imag * u.imag)
    return P


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    _logdet_ratio_jit = _njit(_logdet_ratio_loop)
    _continued_fraction_jit = _njit(_continued_fraction_loop)
    _pair_weights_jit = _njit(_pair_weights_loop)

    def logdet_ratio_numba(s, kl, kr, alpha, p, kind):
        return _logdet_ratio_jit(
            np.ascontiguousarray(s, dtype=np.complex128),
            np.ascontiguousarray(kl, dtype=np.float64),
            np.ascontiguousarray(kr, dtype=np.float64),
            float(alpha),
            float(p),
            int(kind),
        )

    def continued_fraction_numba(z, lam, Jsq, m0):
        z = np.ascontiguousarray(np.atleast_1d(z), dtype=np.complex128)
        m0 = np.broadcast_to(np.asarray(m0, dtype=np.complex128), z.shape)
        return _continued_fraction_jit(
            np.ascontiguousarray(z.real),
            np.ascontiguousarray(z.imag),
            np.ascontiguousarray(lam, dtype=np.float64),
            np.ascontiguousarray(Jsq, dtype=np.float64),
            np.ascontiguousarray(m0.real),
            np.ascontiguousarray(m0.imag),
        )

    def pair_weights_numba(U, w, labels, n_clusters):
        return _pair_weights_jit(
            np.ascontiguousarray(U, dtype=np.complex128),
            np.ascontiguousarray(w, dtype=np.float64),
            np.ascontiguousarray(labels, dtype=np.int64),
            int(n_clusters),
        )

else:  # pragma: no cover
    logdet_ratio_numba = logdet_ratio_numpy
    continued_fraction_numba = continued_fraction_numpy
    pair_weights_numba = pair_weights_numpy


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def logdet_ratio(s, kl, kr, alpha, p=2.0, kind=KIND_ES):
    if USE_NUMBA:
        return logdet_ratio_numba(s, kl, kr, alpha, p, kind)
    return logdet_ratio_numpy(s, kl, kr, alpha, p, kind)


def continued_fraction(z, lam, Jsq, m0):
    if USE_NUMBA:
        return continued_fraction_numba(z, lam, Jsq, m0)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return continued_fraction_numpy(z, np.asarray(lam, float), np.asarray(Jsq, float), np.broadcast_to(m0, z.shape))


def pair_weights(U, w, labels, n_clusters):
    if USE_NUMBA:
        return pair_weights_numba(U, w, labels, n_clusters)
    return pair_weights_numpy(U, np.asarray(w, float), np.asarray(labels, np.int64), n_clusters)
