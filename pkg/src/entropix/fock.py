"""Brute-force many-body oracle on the 2^N spin / Fock space.

The computational basis of each site is ``(empty, occupied)``: bit ``1`` of
site ``x`` means spin up and an occupied fermion mode, and site ``lo`` is the
most significant tensor factor.  Pauli matrices are written in that ordering,
so ``sigma3 = 2 n - 1`` and ``a = [[0, 1], [0, 0]]`` for a single site.

The Jordan-Wigner string is ``S_x = prod_{y<x} (1 - 2 n_y)``; with it the spin
Hamiltonian equals ``dGamma(h) - sum(lambda)/2`` entrywise.

Every routine here works with explicit dense matrices and spectral
decompositions; nothing reuses the one-particle determinant formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .chain import ChainSpec, Interval, restrict
from .kernels import pair_weights
from .linalg import EigenSystem, graded_log_singular_values

__all__ = [
    "MAX_SITES",
    "CLUSTER_TOL",
    "PRUNE_WEIGHT",
    "DiscreteMeasure",
    "FockSystem",
    "pauli",
    "spin_hamiltonians",
    "pauli_flux_observables",
    "jw_fermions",
    "second_quantize",
    "density_matrix",
    "fcs_distribution",
    "sigma_spectral_measure",
    "relative_entropy",
    "cluster_values",
]

MAX_SITES = 12
CLUSTER_TOL = 1e-10
PRUNE_WEIGHT = 1e-15

# (empty, occupied) ordering
_ID = np.eye(2)
_S1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_S2 = np.array([[0.0, 1j], [-1j, 0.0]], dtype=complex)
_S3 = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
_LOWER = np.array([[0.0, 1.0], [0.0, 0.0]])


def pauli(j: int) -> np.ndarray:
    return {1: _S1, 2: _S2, 3: _S3}[j].copy()


def _check_size(N: int):
    if N > MAX_SITES:
        raise ValueError(f"Fock oracle limited to N <= {MAX_SITES} sites (got {N})")
    if N < 1:
        raise ValueError("need at least one site")


def _embed(ops: dict[int, np.ndarray], N: int) -> sp.csr_matrix:
    """Tensor product with ``ops[i]`` at position ``i`` (0 = most significant) and identities elsewhere."""
    out = sp.identity(1, format="csr", dtype=complex)
    for i in range(N):
        out = sp.kron(out, sp.csr_matrix(ops.get(i, _ID)), format="csr")
    return out


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many atoms ``values[i]`` with probabilities ``weights[i]``, sorted by value."""

    values: np.ndarray
    weights: np.ndarray
    pruned_mass: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if v.shape != w.shape or v.ndim != 1:
            raise ValueError("values and weights must be 1-d arrays of equal length")
        if np.any(w < -1e-14):
            raise ValueError("negative weight")
        if abs(w.sum() + self.pruned_mass - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum() + self.pruned_mass!r}, not 1")
        order = np.argsort(v, kind="stable")
        object.__setattr__(self, "values", v[order])
        object.__setattr__(self, "weights", np.maximum(w[order], 0.0))

    @classmethod
    def from_atoms(cls, values, weights, merge_tol: float = 1e-9, prune: float = PRUNE_WEIGHT) -> DiscreteMeasure:
        values = np.asarray(values, dtype=float).reshape(-1)
        weights = np.asarray(weights, dtype=float).reshape(-1)
        labels, reps = cluster_values(values, merge_tol)
        w = np.bincount(labels, weights=weights, minlength=reps.size)
        keep = w >= prune
        return cls(reps[keep], w[keep], float(w[~keep].sum()))

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.weights.tolist()))

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.weights))

    def log_mgf(self, alpha: complex, t: float) -> complex:
        """``log sum_phi e^{-alpha t phi} w_phi``; real when ``alpha`` is real."""
        mask = self.weights > 0
        expo = -complex(alpha) * t * self.values[mask] + np.log(self.weights[mask])
        if np.imag(alpha) == 0:
            return float(logsumexp(expo.real))
        top = expo.real.max()
        return complex(np.log(np.sum(np.exp(expo - top))) + top)

    def weight_at(self, phi: float, tol: float = 1e-8) -> float:
        """Weight of the atom within ``tol`` of ``phi``, or 0 if there is none."""
        i = np.searchsorted(self.values, phi)
        best = 0.0
        for j in (i - 1, i):
            if 0 <= j < self.values.size and abs(self.values[j] - phi) <= tol:
                best = max(best, float(self.weights[j]))
        return best


def cluster_values(values: np.ndarray, tol: float = CLUSTER_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Single-linkage grouping of reals with gaps ``<= tol``.

    Returns ``(labels, representatives)`` with each representative the mean
    of its cluster.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    order = np.argsort(values, kind="stable")
    sv = values[order]
    breaks = np.concatenate([[0], np.cumsum(np.diff(sv) > tol)])
    labels = np.empty_like(breaks)
    labels[order] = breaks
    n = int(breaks[-1]) + 1
    reps = np.bincount(breaks, weights=sv, minlength=n) / np.bincount(breaks, minlength=n)
    return labels.astype(np.int64), reps


def spin_hamiltonians(spec: ChainSpec, iv: Interval) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(H, H_l, H_r, V)`` from Pauli tensor products."""
    N = iv.N
    _check_size(N)
    J, lam = restrict(spec, iv)
    n_l = iv.n_left
    dim = 2**N
    H_l = sp.csr_matrix((dim, dim), dtype=complex)
    H_r = sp.csr_matrix((dim, dim), dtype=complex)
    V = None
    for i in range(N - 1):
        bond = 0.5 * J[i] * (_embed({i: _S1, i + 1: _S1}, N) + _embed({i: _S2, i + 1: _S2}, N))
        if i == n_l - 1:
            V = bond
        elif i < n_l - 1:
            H_l = H_l + bond
        else:
            H_r = H_r + bond
    for i in range(N):
        field = 0.5 * lam[i] * _embed({i: _S3}, N)
        if i < n_l:
            H_l = H_l + field
        else:
            H_r = H_r + field
    H_l, H_r, V = (np.real(M.toarray()) for M in (H_l, H_r, V))
    return H_l + H_r + V, H_l, H_r, V


def pauli_flux_observables(spec: ChainSpec, iv: Interval) -> tuple[np.ndarray, np.ndarray]:
    """Heat fluxes out of the two halves written out as Pauli polynomials around the cut.

    Needs sites -1..2 inside ``iv``.
    """
    N = iv.N
    _check_size(N)
    if iv.lo > -1 or iv.hi < 2:
        raise ValueError("flux polynomials need sites -1..2 in the interval")
    i = iv.index
    E = lambda ops: _embed({i(x): m for x, m in ops.items()}, N).toarray()  # noqa: E731
    J0, Jm, Jp = spec.J(0), spec.J(-1), spec.J(1)
    l0, l1 = spec.lam(0), spec.lam(1)
    phi_l = 0.5 * J0 * Jm * (E({0: _S3, 1: _S1, -1: _S2}) - E({0: _S3, 1: _S2, -1: _S1})) + 0.5 * J0 * l0 * (
        E({1: _S2, 0: _S1}) - E({1: _S1, 0: _S2})
    )
    phi_r = 0.5 * J0 * Jp * (E({1: _S3, 0: _S1, 2: _S2}) - E({1: _S3, 0: _S2, 2: _S1})) + 0.5 * J0 * l1 * (
        E({0: _S2, 1: _S1}) - E({0: _S1, 1: _S2})
    )
    return phi_l, phi_r


def jw_fermions(N: int) -> list[sp.csr_matrix]:
    """Annihilators ``a_x = S_x n_x^-`` with string ``S_x = prod_{y<x}(1 - 2 n_y)``."""
    _check_size(N)
    parity = np.diag([1.0, -1.0])
    return [_embed({**{y: parity for y in range(x)}, x: _LOWER}, N) for x in range(N)]


def second_quantize(a: list, A: np.ndarray) -> np.ndarray:
    """``dGamma(A) = sum_{xy} A[x, y] a_x^* a_y`` as a dense matrix."""
    A = np.asarray(A)
    dim = a[0].shape[0]
    out = sp.csr_matrix((dim, dim), dtype=complex)
    for x, y in zip(*np.nonzero(A)):
        out = out + A[x, y] * (a[x].conj().T @ a[y])
    out = out.toarray()
    return out.real if np.isrealobj(A) else out


@dataclass(frozen=True, eq=False)
class FockSystem:
    """Spin-chain Hamiltonians and the initial state of a confined chain."""

    spec: ChainSpec
    iv: Interval
    H: np.ndarray
    H_l: np.ndarray
    H_r: np.ndarray
    V: np.ndarray

    @classmethod
    def build(cls, spec: ChainSpec, iv: Interval) -> FockSystem:
        return cls(spec, iv, *spin_hamiltonians(spec, iv))

    @property
    def N(self) -> int:
        return self.iv.N

    @cached_property
    def H_eig(self) -> EigenSystem:
        w, U = np.linalg.eigh(self.H)
        return EigenSystem(w, U)

    @cached_property
    def entropy_eig(self) -> EigenSystem:
        """Spectral decomposition of ``S = -log omega``."""
        K = -self.spec.beta_l * self.H_l - self.spec.beta_r * self.H_r
        w, Q = np.linalg.eigh(K)
        return EigenSystem(logsumexp(w) - w, Q)

    @cached_property
    def S(self) -> np.ndarray:
        return self.entropy_eig.apply(lambda s: s).real

    @cached_property
    def omega(self) -> np.ndarray:
        return self.entropy_eig.apply(lambda s: np.exp(-s)).real

    @cached_property
    def flux_l(self) -> np.ndarray:
        return 1j * (self.H_l @ self.V - self.V @ self.H_l)

    @cached_property
    def flux_r(self) -> np.ndarray:
        return 1j * (self.H_r @ self.V - self.V @ self.H_r)

    @cached_property
    def sigma(self) -> np.ndarray:
        """``-beta_l Phi_l - beta_r Phi_r``."""
        return -self.spec.beta_l * self.flux_l - self.spec.beta_r * self.flux_r

    def U(self, t: float) -> np.ndarray:
        """``e^{itH}``."""
        w, V = self.H_eig
        return (V * np.exp(1j * t * w)[None, :]) @ V.T

    def heisenberg(self, A: np.ndarray, t: float) -> np.ndarray:
        """``tau^t(A) = e^{itH} A e^{-itH}``."""
        U = self.U(t)
        return U @ A @ U.conj().T

    def evolved_state(self, s: float) -> np.ndarray:
        """``omega_s = e^{-isH} omega e^{isH}``."""
        return self.heisenberg(self.omega, -s)

    def sigma_t(self, t: float) -> np.ndarray:
        """Mean entropy production observable ``(S_t - S) / t``."""
        return (self.heisenberg(self.S, t) - self.S) / t

    def sigma_t_eig(self, t: float) -> EigenSystem:
        """Spectral decomposition of ``t Sigma^t = S_t - S``."""
        D = self.heisenberg(self.S, t) - self.S
        w, Y = np.linalg.eigh(0.5 * (D + D.conj().T))
        return EigenSystem(w, Y)

    # trace definitions of the entropic functionals ---------------------------------

    def _graded_trace(self, t: float, alpha: float, s: float) -> float:
        # log tr(omega_s e^{-alpha t Sigma^t}) as a sum of positive terms
        sv, Q = self.entropy_eig
        dv, Y = self.sigma_t_eig(t)
        W = Y.conj().T @ self.U(-s) @ Q
        return float(logsumexp(-alpha * dv[:, None] - sv[None, :], b=np.abs(W) ** 2))

    def es(self, alpha: float, t: float) -> float:
        """``log omega(e^{-alpha t Sigma^t})``."""
        return self._graded_trace(t, alpha, 0.0) if t != 0 else 0.0

    def gc(self, alpha: float, t: float, s: float) -> float:
        """``log omega_s(e^{-alpha t Sigma^t})``."""
        return self._graded_trace(t, alpha, s) if t != 0 else 0.0

    def ep(self, p: float, alpha: float, t: float) -> float:
        """``log tr (omega^{(1-a)/p} omega_t^{2a/p} omega^{(1-a)/p})^{p/2}``, ``omega_t = e^{-itH} omega e^{itH}``."""
        if math.isinf(p):
            return self.einf(alpha, t)
        sv, Q = self.entropy_eig
        W = Q.T @ self.U(-t) @ Q
        log_sigma = graded_log_singular_values(-(1.0 - alpha) / p * sv, W, -alpha / p * sv, "jacobi")
        return float(logsumexp(p * log_sigma))

    def einf(self, alpha: float, t: float) -> float:
        """``log tr e^{(1-a) log omega + a log omega_t}``."""
        S_mt = self.heisenberg(self.S, -t)
        L = -(1.0 - alpha) * self.S - alpha * S_mt
        return float(logsumexp(np.linalg.eigvalsh(0.5 * (L + L.conj().T))))

    def fcs_log_char(self, alpha: complex, t: float) -> complex:
        """``log sum_{ij} omega_i |<j|e^{-itH}|i>|^2 e^{-alpha (s_j - s_i)}`` over eigenvectors of ``S``.

        Summed from the unpruned pair weights: atoms below the pruning cutoff
        still matter once weighted by ``e^{-alpha t phi}`` with ``alpha`` outside [0, 1].
        """
        sv, Q = self.entropy_eig
        U = Q.T @ self.U(-t) @ Q
        gap = sv[:, None] - sv[None, :]  # gap[j, i] = s_j - s_i
        with np.errstate(divide="ignore"):
            r = np.log(np.abs(U) ** 2) - sv[None, :] - np.real(alpha) * gap
        top = r.max()
        total = np.sum(np.exp(r - top) * np.exp(-1j * np.imag(alpha) * gap))
        return complex(np.log(total) + top)

    def fcs_char(self, alpha: complex, t: float) -> complex:
        return complex(np.exp(self.fcs_log_char(alpha, t)))

    def theta(self, A: np.ndarray) -> np.ndarray:
        """Time reversal; ``H`` is real in this basis, so it is complex conjugation."""
        return np.conj(A)


def _system(spec_or_sys, iv: Interval | None) -> FockSystem:
    if isinstance(spec_or_sys, FockSystem):
        return spec_or_sys
    if iv is None:
        raise ValueError("an interval is required with a ChainSpec")
    return FockSystem.build(spec_or_sys, iv)


def density_matrix(spec: ChainSpec, iv: Interval) -> np.ndarray:
    """``omega = e^{-beta_l H_l - beta_r H_r} / tr(...)``."""
    return FockSystem.build(spec, iv).omega


def fcs_distribution(spec, iv: Interval | None = None, t: float = 1.0) -> DiscreteMeasure:
    """Two-time measurement statistics of ``S = -log omega`` over ``phi = (s' - s)/t``.

    ``spec`` may be a :class:`FockSystem`, in which case ``iv`` is ignored.
    """
    if t == 0:
        raise ValueError("t must be nonzero")
    fs = _system(spec, iv)
    sv, Q = fs.entropy_eig
    labels, reps = cluster_values(sv, CLUSTER_TOL)
    U = Q.T @ fs.U(-t) @ Q
    P = pair_weights(U, np.exp(-sv), labels, reps.size)
    phi = (reps[None, :] - reps[:, None]) / t
    return DiscreteMeasure.from_atoms(phi.reshape(-1), P.reshape(-1), merge_tol=1e-9 / abs(t))


def sigma_spectral_measure(spec, iv: Interval | None = None, t: float = 1.0, s: float | None = None) -> DiscreteMeasure:
    """Distribution of ``Sigma^t`` in the initial state, or in ``omega_s`` when ``s`` is given."""
    if t == 0:
        raise ValueError("t must be nonzero")
    fs = _system(spec, iv)
    dv, Y = fs.sigma_t_eig(t)
    state = fs.omega if s is None else fs.evolved_state(s)
    w = np.real(np.einsum("ij,ik,kj->j", Y.conj(), state, Y))
    labels, reps = cluster_values(dv, CLUSTER_TOL)
    weights = np.bincount(labels, weights=w, minlength=reps.size)
    return DiscreteMeasure.from_atoms(reps / t, weights, merge_tol=CLUSTER_TOL / abs(t))


def relative_entropy(rho: np.ndarray, nu: np.ndarray) -> float:
    """``tr(rho (log nu - log rho))``; ``-inf`` when ``rho`` charges the kernel of ``nu``."""
    r, R = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    n, Nv = np.linalg.eigh(0.5 * (nu + nu.conj().T))
    cut_r = 1e-14 * max(r.max(), 1e-300)
    cut_n = 1e-14 * max(n.max(), 1e-300)
    r = np.where(r > cut_r, r, 0.0)
    overlap = np.abs(Nv.conj().T @ R) ** 2  # overlap[j, i] = |<nu_j | rho_i>|^2
    mass = overlap @ r  # rho-weight carried by each eigenvector of nu
    ker = n <= cut_n
    if np.any(mass[ker] > 1e-12):
        return -math.inf
    with np.errstate(divide="ignore"):
        log_n = np.where(ker, 0.0, np.log(np.where(ker, 1.0, n)))
        log_r = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), 0.0)
    return float(np.dot(mass, log_n) - np.dot(r, log_r))
