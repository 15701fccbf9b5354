"""Large-time entropic functionals from on-shell scattering data.

All functionals are integrals over the essential support of
``log(det(1 + K(E)) / det(1 + K_0(E))) / 2pi`` for 2x2 matrices built from
``k0(E) = diag(-beta_l E, -beta_r E)`` and ``s(E)``; see :func:`k_matrices`
for the definitions and :mod:`entropix.kernels` for the batched closed-form
evaluation used inside the quadratures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import finite
from .chain import ChainSpec, Interval
from .kernels import KIND_ES, KIND_INF, KIND_P, logdet_ratio
from .linalg import EigenSystem, apply_fn, eig
from .quadrature import integrate_band
from .scattering import SupportSet, essential_support, reflectionless_test, smatrix

__all__ = [
    "KMatrices",
    "RateFunction",
    "IdentityReport",
    "k_matrices",
    "e_plus",
    "e_p_plus",
    "e_plus_reflectionless",
    "entropic_identity_report",
    "landauer_flux",
    "finite_volume_flux",
    "derivative",
    "second_derivative",
    "clt_variance",
    "rate_function",
    "finite_time_convergence",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-12
P_GRID = (0.5, 1.0, 2.0, 4.0, math.inf)
FD_STEP_1 = 1e-4
FD_STEP_2 = 1e-3
ALPHA_BOUND = 40.0


@dataclass(frozen=True)
class KMatrices:
    E: float
    s: np.ndarray
    k0: np.ndarray
    K_0: np.ndarray
    K_alpha: np.ndarray
    K_alpha_p: np.ndarray
    K_alpha_inf: np.ndarray


def _expm_h(A: np.ndarray) -> np.ndarray:
    return apply_fn(0.5 * (A + A.conj().T), np.exp)


def k_matrices(E: float, alpha: float, p: float, spec: ChainSpec, swap: bool = False) -> KMatrices:
    """The 2x2 matrices ``K_0``, ``K_alpha``, ``K_{alpha,p}`` and ``K_{alpha,inf}`` at energy ``E``.

    ``K_alpha = e^{k0/2} e^{alpha(s^* k0 s - k0)} e^{k0/2}``,
    ``K_{alpha,p} = (e^{(1-alpha)k0/p} s e^{2 alpha k0/p} s^* e^{(1-alpha)k0/p})^{p/2}``,
    ``K_{alpha,inf} = e^{(1-alpha)k0 + alpha s k0 s^*}``.
    ``swap`` exchanges ``s`` and ``s^*`` everywhere.
    """
    s = np.asarray(smatrix(float(E), spec))
    if swap:
        s = s.conj().T
    k0 = np.diag([-spec.beta_l * E, -spec.beta_r * E]).astype(complex)
    half = _expm_h(0.5 * k0)
    K_alpha = half @ _expm_h(alpha * (s.conj().T @ k0 @ s - k0)) @ half
    if math.isinf(p):
        K_p = _expm_h((1.0 - alpha) * k0 + alpha * (s @ k0 @ s.conj().T))
    else:
        d = _expm_h((1.0 - alpha) / p * k0)
        X = d @ s @ _expm_h(2.0 * alpha / p * k0) @ s.conj().T @ d
        K_p = apply_fn(0.5 * (X + X.conj().T), lambda x: np.maximum(x, 0.0) ** (0.5 * p))
    K_inf = _expm_h((1.0 - alpha) * k0 + alpha * (s @ k0 @ s.conj().T))
    return KMatrices(float(E), s, k0.real, _expm_h(k0), K_alpha, K_p, K_inf)


def _support(spec: ChainSpec, support: SupportSet | None) -> SupportSet:
    return essential_support(spec) if support is None else support


def _integrate(f: Callable[[np.ndarray], np.ndarray], support: SupportSet, tol: float) -> float:
    total = 0.0
    n = max(1, len(support.intervals))
    for lo, hi in support.intervals:
        val, _ = integrate_band(f, lo, hi, tol=tol / n)
        total += val
    return total


def _scattering_integrand(spec: ChainSpec, alpha: float, p: float, kind: int, swap: bool):
    def f(E):
        s = smatrix(E, spec)
        if swap:
            s = np.conj(np.swapaxes(s, -1, -2))
        return logdet_ratio(s, -spec.beta_l * E, -spec.beta_r * E, alpha, p, kind) / (2.0 * np.pi)

    return f


def e_plus(alpha: float, spec: ChainSpec, tol: float = DEFAULT_TOL, support: SupportSet | None = None, swap: bool = False) -> float:
    """``e_+(alpha)``, the common large-time limit of ``ES_t/t`` and ``GC_t/t``."""
    if alpha == 0:
        return 0.0
    return _integrate(_scattering_integrand(spec, alpha, 2.0, KIND_ES, swap), _support(spec, support), tol)


def e_p_plus(
    alpha: float, p: float, spec: ChainSpec, tol: float = DEFAULT_TOL, support: SupportSet | None = None, swap: bool = False
) -> float:
    """``e_{p,+}(alpha) = lim e_{p,t}(alpha)/t`` for ``p`` in ``]0, inf]``."""
    if not p > 0:
        raise ValueError("p must be positive")
    if alpha == 0:
        return 0.0
    kind = KIND_INF if math.isinf(p) else KIND_P
    pp = 1.0 if math.isinf(p) else float(p)
    return _integrate(_scattering_integrand(spec, alpha, pp, kind, swap), _support(spec, support), tol)


def _logcosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)


def e_plus_reflectionless(
    alpha: float, spec: ChainSpec, tol: float = DEFAULT_TOL, support: SupportSet | None = None, check: bool = True
) -> float:
    """Closed-form ``e_+`` valid only for reflectionless chains."""
    if check and not reflectionless_test(spec).reflectionless:
        raise ValueError("chain is not reflectionless; the closed form does not apply")
    bl, br = spec.beta_l, spec.beta_r
    a = bl * (1 - alpha) + br * alpha
    b = br * (1 - alpha) + bl * alpha

    def f(E):
        return (_logcosh(a * E / 2) + _logcosh(b * E / 2) - _logcosh(bl * E / 2) - _logcosh(br * E / 2)) / (2 * np.pi)

    return _integrate(f, _support(spec, support), tol)


def landauer_flux(spec: ChainSpec, tol: float = DEFAULT_TOL, support: SupportSet | None = None) -> tuple[float, float]:
    """Steady-state ``(<Phi_l>_+, <sigma>_+)``."""
    bl, br = spec.beta_l, spec.beta_r
    db = spec.delta_beta

    def f(E):
        s = smatrix(E, spec)
        T = np.abs(s[:, 0, 1]) ** 2
        return E * T * np.sinh(db * E / 2) / (np.cosh(br * E / 2) * np.cosh(bl * E / 2)) / (4 * np.pi)

    phi = _integrate(f, _support(spec, support), tol)
    return phi, db * phi


def finite_volume_flux(spec: ChainSpec, M: int = 400, t1: float = 50.0, t2: float = 100.0) -> float:
    """Long-time average of ``omega(tau^t(Phi_l))`` on ``[-M, M]`` over ``[t1, t2]``."""
    sys = finite.assemble(spec, Interval.symmetric(M))
    return finite.flux_left_time_average(sys, t1, t2)


def derivative(f: Callable[[float], float], x: float = 0.0, h: float = FD_STEP_1) -> float:
    """Central difference, Richardson-extrapolated once."""
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def second_derivative(f: Callable[[float], float], x: float = 0.0, h: float = FD_STEP_2, f0: float | None = None) -> float:
    f0 = f(x) if f0 is None else f0
    d1 = (f(x + h) - 2 * f0 + f(x - h)) / (h * h)
    d2 = (f(x + h / 2) - 2 * f0 + f(x - h / 2)) / (h * h / 4)
    return (4 * d2 - d1) / 3


def clt_variance(spec: ChainSpec, tol: float = 1e-14) -> float:
    """``D_+ = e_+''(0)``."""
    support = essential_support(spec)
    if support.empty or spec.delta_beta == 0:
        return 0.0
    return second_derivative(lambda a: e_plus(a, spec, tol, support), 0.0, f0=0.0)


@dataclass(frozen=True)
class IdentityReport:
    verdict: str
    reflectionless: bool
    e_plus_at_1: float
    p_spread_at_half: float
    e_p_at_half: dict = field(default_factory=dict)
    reflection_deviation: float = float("nan")

    @property
    def consistent(self) -> bool:
        """Entropic identity holds exactly when the chain is reflectionless."""
        if self.verdict == "no transport":
            return True
        identity = abs(self.e_plus_at_1) < 1e-8 and self.p_spread_at_half < 1e-8
        return identity == self.reflectionless

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "reflectionless": self.reflectionless,
            "e_plus_at_1": self.e_plus_at_1,
            "p_spread_at_half": self.p_spread_at_half,
            "e_p_at_half": {str(k): v for k, v in self.e_p_at_half.items()},
            "reflection_deviation": self.reflection_deviation,
            "consistent": self.consistent,
        }


def entropic_identity_report(spec: ChainSpec, tol: float = DEFAULT_TOL) -> IdentityReport:
    support = essential_support(spec)
    if support.empty:
        return IdentityReport("no transport", False, 0.0, 0.0, {p: 0.0 for p in P_GRID})
    refl = reflectionless_test(spec)
    e1 = e_plus(1.0, spec, tol, support)
    ep = {p: e_p_plus(0.5, p, spec, tol, support) for p in P_GRID}
    spread = max(ep.values()) - min(ep.values())
    if spec.delta_beta == 0:
        verdict = "equilibrium"
    else:
        verdict = "entropic identity holds" if refl.reflectionless else "entropic identity fails"
    return IdentityReport(verdict, refl.reflectionless, e1, spread, ep, refl.max_deviation)


@dataclass(frozen=True)
class RateFunction:
    """Legendre transform ``I(theta) = -inf_alpha (alpha theta + e(alpha))`` of a convex ``e``.

    ``theta`` outside the open range of ``-e'`` on ``[-alpha_bound, alpha_bound]``
    gives ``+inf``.
    """

    e: Callable[[float], float]
    alpha_bound: float = ALPHA_BOUND
    h: float = FD_STEP_1
    alpha_tol: float = 1e-8

    def de(self, a: float) -> float:
        return derivative(self.e, a, self.h)

    @property
    def domain(self) -> tuple[float, float]:
        return -self.de(self.alpha_bound), -self.de(-self.alpha_bound)

    def minimiser(self, theta: float) -> float | None:
        g = lambda a: self.de(a) + theta  # noqa: E731  increasing in a
        lo, hi = -self.alpha_bound, self.alpha_bound
        glo, ghi = g(lo), g(hi)
        if not (glo < 0 < ghi):
            return None
        a = 0.5
        ga = g(a)
        for _ in range(200):
            if ga > 0:
                hi = a
            else:
                lo = a
            d2 = (self.de(a + 1e-3) - self.de(a - 1e-3)) / 2e-3
            step = ga / d2 if d2 > 0 else math.inf
            new = a - step
            if not (lo < new < hi):
                new = 0.5 * (lo + hi)
            if abs(new - a) < self.alpha_tol or hi - lo < self.alpha_tol:
                return new
            a = new
            ga = g(a)
        raise RuntimeError("Legendre transform did not converge")

    def __call__(self, theta: float) -> float:
        a = self.minimiser(theta)
        if a is None:
            return math.inf
        return -(a * theta + self.e(a))


def rate_function(which: str, spec: ChainSpec, tol: float = 1e-14) -> RateFunction:
    """``which="ES_GC"`` transforms ``e_+``; ``"FCS"`` transforms ``e_{2,+}``."""
    support = essential_support(spec)
    if which == "ES_GC":
        return RateFunction(lambda a: e_plus(a, spec, tol, support))
    if which == "FCS":
        return RateFunction(lambda a: e_p_plus(a, 2.0, spec, tol, support))
    raise ValueError("which must be 'ES_GC' or 'FCS'")


def _default_M(spec: ChainSpec, t: float, s: float, M0: int = finite.CAUSAL_MARGIN) -> int:
    return M0 + int(math.ceil(spec.v_max * (abs(t) + s)))


def finite_time_convergence(
    spec: ChainSpec,
    kind: str,
    alpha: float,
    t_list: Sequence[float],
    M_rule: Callable[[float], int] | int | None = None,
    p: float = 2.0,
    s_rule: Callable[[float], float] | None = None,
    limit: float | None = None,
) -> list[dict]:
    """Rows ``{t, M, s, value, limit, error}`` with ``value = functional_t / t``.

    ``kind`` is ``"EP"`` (uses ``p``), ``"ES"`` or ``"GC"`` (relaxation time
    ``s_rule(t)``, default ``s = t``).  ``M_rule`` is a fixed half-width or a
    function of ``t``; by default ``M = 16 + ceil(v_max (t + s))``.
    """
    if kind not in ("EP", "ES", "GC"):
        raise ValueError("kind must be EP, ES or GC")
    if limit is None:
        limit = e_p_plus(alpha, p, spec) if kind == "EP" else e_plus(alpha, spec)
    rows = []
    for t in t_list:
        s = (s_rule(t) if s_rule else t) if kind == "GC" else 0.0
        if M_rule is None:
            M = _default_M(spec, t, s)
        elif callable(M_rule):
            M = int(M_rule(t))
        else:
            M = int(M_rule)
        sys = finite.assemble(spec, Interval.symmetric(M))
        if kind == "EP":
            val = finite.ep_t(sys, p, alpha, t)
        elif kind == "ES":
            val = finite.es_t(sys, alpha, t)
        else:
            val = finite.gc_t(sys, alpha, t, s)
        rows.append({"t": t, "M": M, "s": s, "value": val / t, "limit": limit, "error": abs(val / t - limit)})
    return rows
