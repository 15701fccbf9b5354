"""Finite-volume, finite-time entropic functionals of the confined chain.

Every functional is a ratio of one-particle determinants; the many-body
partition function never appears.  With ``k = -beta_l h_l - beta_r h_r`` and
``k_t = e^{ith} k e^{-ith}``:

* ``es_t``   ``log det(1 + e^{k/2} e^{a(k_t - k)} e^{k/2}) - log det(1 + e^k)``
* ``ep_t``   ``log det(1 + (e^{(1-a)k/p} e^{2a k_{-t}/p} e^{(1-a)k/p})^{p/2}) - ...``
* ``einf_t`` ``log det(1 + e^{(1-a)k + a k_{-t}}) - ...``
* ``gc_t``   ES evaluated in the state relaxed for a time ``s``
* ``fcs_char`` the FCS characteristic function at complex ``a``

Each positive product is written as ``M M^*`` with ``M = D1 W D2`` (``W``
unitary) so that :func:`~entropix.linalg.logdet_one_plus_gram_power` can keep
small eigenvalues accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .chain import ChainSpec, Interval, restrict, tridiagonal
from .linalg import (
    EigenSystem,
    eig,
    log1p_exp,
    logdet_one_plus_general,
    logdet_one_plus_gram_power,
    propagator,
)

__all__ = [
    "ConfinedSystem",
    "FunctionalQuery",
    "assemble",
    "evolve_k",
    "es_t",
    "ep_t",
    "einf_t",
    "fcs_char",
    "fcs_log_char",
    "gc_t",
    "mean_ep_rate",
    "es_derivative_trace",
    "es_derivative_gauss",
    "functional",
    "causal_interval",
    "flux_left",
    "flux_left_time_average",
]

KINDS = ("ES", "EP", "EINF", "FCS", "GC")


@dataclass(frozen=True, eq=False)
class ConfinedSystem:
    spec: ChainSpec
    iv: Interval
    h: np.ndarray
    h_l: np.ndarray
    h_r: np.ndarray
    v: np.ndarray
    k: np.ndarray

    @property
    def N(self) -> int:
        return self.iv.N

    @property
    def beta_l(self) -> float:
        return self.spec.beta_l

    @property
    def beta_r(self) -> float:
        return self.spec.beta_r

    @cached_property
    def h_eig(self) -> EigenSystem:
        return eig(self.h)

    @cached_property
    def k_eig(self) -> EigenSystem:
        # k = -beta_l h_l - beta_r h_r is block diagonal; diagonalise blockwise
        n_l = self.iv.n_left
        el = eig(self.h_l[:n_l, :n_l])
        er = eig(self.h_r[n_l:, n_l:])
        vals = np.concatenate([-self.beta_l * el.values, -self.beta_r * er.values])
        vecs = np.zeros((self.N, self.N))
        vecs[:n_l, :n_l] = el.vectors.real
        vecs[n_l:, n_l:] = er.vectors.real
        order = np.argsort(vals, kind="stable")
        return EigenSystem(vals[order], vecs[:, order])

    @cached_property
    def log_norm(self) -> float:
        """``log det(1 + e^k)``."""
        return float(np.sum(log1p_exp(self.k_eig.values)))

    @cached_property
    def rho(self) -> np.ndarray:
        """One-particle density ``(1 + e^{-k})^{-1}`` of the initial state."""
        kv = self.k_eig.values
        return self.k_eig.apply(lambda x: 1.0 / (1.0 + np.exp(-x))).real if kv.size else np.zeros((0, 0))

    @cached_property
    def ikh(self) -> np.ndarray:
        """``i[k, h]``; supported on sites -1..2 only."""
        return 1j * (self.k @ self.h - self.h @ self.k)

    @cached_property
    def phi_l(self) -> np.ndarray:
        """One-particle heat flux ``i[h_l, v]`` out of the left part."""
        return 1j * (self.h_l @ self.v - self.v @ self.h_l)

    @cached_property
    def phi_r(self) -> np.ndarray:
        return 1j * (self.h_r @ self.v - self.v @ self.h_r)

    def U(self, t: float) -> np.ndarray:
        """``e^{ith}``."""
        return propagator(self.h, t, self.h_eig)


@dataclass(frozen=True)
class FunctionalQuery:
    kind: str
    alpha: complex
    t: float
    p: float = 2.0
    s: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not self.p > 0:
            raise ValueError("p must be positive (use math.inf for the variational functional)")
        if self.kind == "GC" and self.s < 0:
            raise ValueError("relaxation time s must be nonnegative")


def assemble(spec: ChainSpec, iv: Interval) -> ConfinedSystem:
    J, lam = restrict(spec, iv)
    h = tridiagonal(J, lam)
    n_l = iv.n_left
    h_l = np.zeros_like(h)
    h_r = np.zeros_like(h)
    h_l[:n_l, :n_l] = h[:n_l, :n_l]
    h_r[n_l:, n_l:] = h[n_l:, n_l:]
    v = np.zeros_like(h)
    j0 = J[n_l - 1]
    v[n_l - 1, n_l] = v[n_l, n_l - 1] = j0
    k = -spec.beta_l * h_l - spec.beta_r * h_r
    return ConfinedSystem(spec, iv, h, h_l, h_r, v, k)


CAUSAL_MARGIN = 16


def causal_interval(spec: ChainSpec, t: float, s: float = 0.0, M0: int = CAUSAL_MARGIN) -> Interval:
    """``[-M, M]`` with ``M = M0 + ceil(v_max (|t| + s))``.

    The default margin keeps boundary effects below ~1e-11 on the presets.
    """
    M = M0 + int(math.ceil(spec.v_max * (abs(t) + abs(s))))
    return Interval.symmetric(M)


def evolve_k(sys: ConfinedSystem, t: float) -> np.ndarray:
    U = sys.U(t)
    return U @ sys.k @ U.conj().T


def _herm(A):
    return 0.5 * (A + A.conj().T)


def es_t(sys: ConfinedSystem, alpha: float, t: float, method: str = "auto") -> float:
    kv, V = sys.k_eig
    if alpha == 0 or t == 0:
        return 0.0
    dk = eig(_herm(evolve_k(sys, t) - sys.k), check=False)
    W = V.T @ dk.vectors
    val = logdet_one_plus_gram_power(0.5 * kv, W, 0.5 * alpha * dk.values, 1.0, method)
    return val - sys.log_norm


def ep_t(sys: ConfinedSystem, p: float, alpha: float, t: float, method: str = "auto") -> float:
    """Interpolating functional ``e_{p,t}(alpha)``; ``p = inf`` gives :func:`einf_t`."""
    if not p > 0:
        raise ValueError("p must be positive")
    if math.isinf(p):
        return einf_t(sys, alpha, t)
    kv, V = sys.k_eig
    W = V.T @ sys.U(-t) @ V
    a = (1.0 - alpha) / p * kv
    b = alpha / p * kv
    return logdet_one_plus_gram_power(a, W, b, 0.5 * p, method) - sys.log_norm


def einf_t(sys: ConfinedSystem, alpha: float, t: float) -> float:
    L = (1.0 - alpha) * sys.k + alpha * evolve_k(sys, -t)
    lv = np.linalg.eigvalsh(_herm(L))
    return float(np.sum(log1p_exp(lv))) - sys.log_norm


def gc_t(sys: ConfinedSystem, alpha: float, t: float, s: float, method: str = "auto") -> float:
    """``log omega_s(e^{-alpha t Sigma^t})`` with ``omega_s`` the initial state evolved for time ``s``."""
    if s < 0:
        raise ValueError("relaxation time s must be nonnegative")
    if s == 0:
        return es_t(sys, alpha, t, method)
    kv, V = sys.k_eig
    if alpha == 0 or t == 0:
        return 0.0
    dk = eig(_herm(evolve_k(sys, t) - sys.k), check=False)
    W = V.T @ sys.U(s) @ dk.vectors
    val = logdet_one_plus_gram_power(0.5 * kv, W, 0.5 * alpha * dk.values, 1.0, method)
    return val - sys.log_norm


def _logdet(A: np.ndarray) -> complex:
    lu, piv = sla.lu_factor(A)
    d = np.diag(lu)
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    return complex(np.sum(np.log(d.astype(complex))) + 1j * np.pi * (swaps % 2))


def fcs_log_char(sys: ConfinedSystem, alpha: complex, t: float, method: str = "graded") -> complex:
    """Log of the FCS characteristic function at complex ``alpha``.

    ``method="direct"`` evaluates
    ``log det(1 + (1+e^{-k})^{-1} (e^{-alpha k} e^{-ith} e^{alpha k} e^{ith} - 1))``
    literally.  It loses digits once ``|Re alpha|`` times the spread of ``k``
    is large, because ``e^{-alpha k}`` and ``e^{alpha k}`` are formed
    separately.

    ``method="graded"`` (default) uses the equal ratio
    ``det(1 + D1 G D2 G^*) / det(1 + e^k)`` with ``D1 = e^{(1-alpha)kappa}``,
    ``D2 = e^{alpha kappa}`` and unitary ``G = V^T e^{ith} V``.  Each diagonal
    is split into a part of modulus >= 1 and a part of modulus <= 1:
    ``1 + X = Db1 (Db1^{-1} G Db2^{-1} + Ds1 G Ds2) Db2 G^*``.  The middle
    factor has entries bounded by one.
    """
    kv, V = sys.k_eig
    alpha = complex(alpha)
    if method == "direct":
        em = (V * np.exp(-alpha * kv)[None, :]) @ V.T
        ep = (V * np.exp(alpha * kv)[None, :]) @ V.T
        Ut = sys.U(t)
        B = em @ Ut.conj().T @ ep @ Ut - np.eye(sys.N)
        return logdet_one_plus_general(sys.rho @ B)
    if method != "graded":
        raise ValueError(f"unknown method {method!r}")
    G = V.T @ sys.U(t) @ V
    l1 = (1.0 - alpha) * kv
    l2 = alpha * kv
    big1, big2 = np.maximum(l1.real, 0.0), np.maximum(l2.real, 0.0)
    # Db = e^{big}, Ds = e^{l - big}; the imaginary phase rides with the small part
    C = np.exp(-big1)[:, None] * G * np.exp(-big2)[None, :] + np.exp(l1 - big1)[:, None] * G * np.exp(l2 - big2)[None, :]
    val = np.sum(big1) + np.sum(big2) + _logdet(C) - _logdet(G)
    return complex(val) - sys.log_norm


def fcs_char(sys: ConfinedSystem, alpha: complex, t: float) -> complex:
    """FCS characteristic function ``sum_phi e^{-alpha t phi} P_t(phi)``."""
    return complex(np.exp(fcs_log_char(sys, alpha, t)))


def mean_ep_rate(sys: ConfinedSystem, t: float) -> float:
    """``omega(Sigma^t) = tr((1 + e^{-k})^{-1} (k - k_t)) / t``."""
    if t == 0:
        raise ValueError("t must be nonzero")
    return float(np.real(np.trace(sys.rho @ (sys.k - evolve_k(sys, t))))) / t


def _es_derivative_integrand(sys: ConfinedSystem, alpha: float, t: float, u: float) -> float:
    k1 = evolve_k(sys, t * (1.0 - u))
    U2 = sys.U(-t * u)
    k2 = U2 @ sys.k @ U2.conj().T
    A = eig(_herm(-alpha * (k1 - k2)), check=False).apply(np.exp)
    kv, V = sys.k_eig
    B = U2 @ ((V * np.exp(-kv)[None, :]) @ V.T) @ U2.conj().T
    X = np.eye(sys.N) + A @ B
    return float(np.real(np.trace(np.linalg.solve(X, sys.ikh))))


def es_derivative_gauss(sys: ConfinedSystem, alpha: float, t: float, nodes: int) -> float:
    """The derivative trace formula with a fixed ``nodes``-point Gauss-Legendre rule in ``u``."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (x + 1.0)
    return -t * 0.5 * sum(wi * _es_derivative_integrand(sys, alpha, t, ui) for ui, wi in zip(u, w))


def es_derivative_trace(
    sys: ConfinedSystem, alpha: float, t: float, nodes: int = 32, tol: float = 1e-9, max_nodes: int = 512
) -> float:
    """``d/dalpha ES_t(alpha)`` from the time-integrated trace formula.

    ``-t int_0^1 tr[(1 + e^{-alpha(k_{t(1-u)} - k_{-tu})} e^{-k_{-tu}})^{-1} i[k,h]] du``
    by Gauss-Legendre in ``u``, doubling the node count until two successive
    values differ by less than ``tol``.
    """
    prev = es_derivative_gauss(sys, alpha, t, nodes)
    n, change = nodes, math.inf
    while 2 * n <= max_nodes:
        n *= 2
        cur = es_derivative_gauss(sys, alpha, t, n)
        change = abs(cur - prev)
        if change < tol:
            return cur
        prev = cur
    raise RuntimeError(f"u-quadrature did not reach {tol:g} with {n} nodes (last change {change:.2e})")


def functional(sys: ConfinedSystem, q: FunctionalQuery, method: str = "auto"):
    if q.kind == "ES":
        return es_t(sys, float(np.real(q.alpha)), q.t, method)
    if q.kind == "EP":
        return ep_t(sys, q.p, float(np.real(q.alpha)), q.t, method)
    if q.kind == "EINF":
        return einf_t(sys, float(np.real(q.alpha)), q.t)
    if q.kind == "GC":
        return gc_t(sys, float(np.real(q.alpha)), q.t, q.s, method)
    if q.kind == "FCS":
        val = fcs_log_char(sys, q.alpha, q.t)
        return val.real if np.imag(q.alpha) == 0 else val
    raise ValueError(q.kind)


def flux_left(sys: ConfinedSystem, t: float) -> float:
    """``omega(tau^t(Phi_l)) = tr(rho e^{ith} i[h_l, v] e^{-ith})``."""
    U = sys.U(t)
    return float(np.real(np.trace(sys.rho @ U @ sys.phi_l @ U.conj().T)))


def flux_left_time_average(sys: ConfinedSystem, t1: float, t2: float) -> float:
    """Exact average of :func:`flux_left` over ``[t1, t2]`` in the eigenbasis of ``h``."""
    ev, Vh = sys.h_eig
    rt = Vh.conj().T @ sys.rho @ Vh
    ft = Vh.conj().T @ sys.phi_l @ Vh
    w = ev[None, :] - ev[:, None]  # w[a, b] = e_b - e_a
    T = t2 - t1
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = np.where(
            np.abs(w) * T > 1e-12,
            (np.exp(1j * w * t2) - np.exp(1j * w * t1)) / (1j * w * T),
            np.exp(1j * w * t1),
        )
    return float(np.real(np.sum(rt * ft.T * avg)))
