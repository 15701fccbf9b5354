"""Half-line Green's functions and the on-shell scattering matrix.

``G_l(z) = <d_0, (h_l - z)^{-1} d_0>`` on sites ``x <= 0`` and
``G_r(z) = <d_1, (h_r - z)^{-1} d_1>`` on sites ``x >= 1``.  Both are exact:
a finite continued fraction over the explicit sites, closed by the fixed point
of the tail's one-period Moebius map.  For real ``E`` inside a tail band the
two fixed points are complex conjugate and the one with ``Im > 0`` is the
``E + i0`` boundary value; elsewhere the attracting fixed point is taken.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .chain import ChainSpec, TailModel
from .kernels import continued_fraction

__all__ = [
    "ScatteringPoint",
    "SupportSet",
    "ReflectionResult",
    "weyl_m",
    "weyl_m_truncated",
    "weyl_m_oracle",
    "tail_bands",
    "smatrix",
    "scattering_point",
    "transmission",
    "essential_support",
    "support_grid",
    "reflectionless_test",
]

SUPPORT_EPS = 1e-8
EDGE_TOL = 1e-13


@dataclass(frozen=True)
class ScatteringPoint:
    E: float
    G_l: complex
    G_r: complex
    F_l: float
    F_r: float
    s: np.ndarray
    in_support: bool

    @property
    def transmission(self) -> float:
        return float(abs(self.s[0, 1]) ** 2)


@dataclass(frozen=True)
class SupportSet:
    """Disjoint sorted energy intervals where both half-line densities are positive."""

    intervals: tuple[tuple[float, float], ...]
    eps: float = SUPPORT_EPS

    def __post_init__(self):
        iv = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        for (a0, b0), (a1, _) in zip(iv, iv[1:]):
            if a1 < b0:
                raise ValueError("support intervals overlap")
        if any(b <= a for a, b in iv):
            raise ValueError("support intervals must have positive length")
        object.__setattr__(self, "intervals", iv)

    @property
    def measure(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    @property
    def empty(self) -> bool:
        return not self.intervals

    def contains(self, E) -> np.ndarray:
        E = np.asarray(E, dtype=float)
        out = np.zeros(E.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (E > a) & (E < b)
        return out

    def to_list(self) -> list[list[float]]:
        return [[a, b] for a, b in self.intervals]


class ReflectionResult(NamedTuple):
    reflectionless: bool
    max_deviation: float
    vacuous: bool = False


# ---------------------------------------------------------------------------
# Moebius maps m -> 1/(lam - z - J^2 m)  <->  [[0, 1], [-J^2, lam - z]]
# ---------------------------------------------------------------------------


def _period_matrix(Jsq: np.ndarray, lam: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Product ``T_0 T_1 ... T_{P-1}`` for each ``z`` (shape ``(n, 2, 2)``)."""
    T = np.broadcast_to(np.eye(2, dtype=complex), z.shape + (2, 2)).copy()
    for j2, l in zip(Jsq, lam):
        step = np.zeros(z.shape + (2, 2), dtype=complex)
        step[..., 0, 1] = 1.0
        step[..., 1, 0] = -j2
        step[..., 1, 1] = l - z
        T = T @ step
    return T


def _fixed_point(T: np.ndarray, z: np.ndarray) -> np.ndarray:
    A, B, C, D = T[..., 0, 0], T[..., 0, 1], T[..., 1, 0], T[..., 1, 1]
    disc = (A - D) ** 2 + 4.0 * B * C
    sq = np.sqrt(disc)
    w1 = A - D + sq
    w2 = A - D - sq
    with np.errstate(divide="ignore", invalid="ignore"):
        # each root from whichever formula avoids cancellation
        m1 = np.where(np.abs(w2) >= np.abs(w1), -2.0 * B / w2, w1 / (2.0 * C))
        m2 = np.where(np.abs(w1) >= np.abs(w2), -2.0 * B / w1, w2 / (2.0 * C))
        g1 = np.abs(C * m1 + D)
        g2 = np.abs(C * m2 + D)
    g1 = np.where(np.isfinite(m1), g1, -np.inf)
    g2 = np.where(np.isfinite(m2), g2, -np.inf)
    attracting = np.where(g1 >= g2, m1, m2)
    on_axis = (z.imag == 0) & (disc.real < 0)
    upper = np.where(m1.imag >= m2.imag, m1, m2)
    out = np.where(on_axis, upper, attracting)
    # real spectrum boundary value: strip roundoff imaginary part off the bands
    return np.where((z.imag == 0) & ~on_axis, out.real + 0j, out)


def _tail_orbit(tail: TailModel, start: int, step: int, P: int) -> tuple[np.ndarray, np.ndarray]:
    xs = start + step * np.arange(P)
    lam = tail.lam_at(xs)
    bonds = xs if step > 0 else xs - 1
    return tail.J_at(bonds) ** 2, lam


def _as_z(z) -> tuple[np.ndarray, bool]:
    arr = np.asarray(z)
    scalar = arr.ndim == 0
    return np.atleast_1d(arr).astype(complex).reshape(-1), scalar


def weyl_m(side: str, z, spec: ChainSpec):
    """Boundary Green's function of the left (``"l"``) or right (``"r"``) half-line.

    ``z`` may be real (``E + i0`` boundary values) or complex, scalar or array.
    """
    zz, scalar = _as_z(z)
    w_lo, w_hi = spec.window_range
    if side == "r":
        x0 = max(1, w_hi + 1)
        Jsq, lam = _tail_orbit(spec.right, x0, +1, spec.right.period)
        m = _fixed_point(_period_matrix(Jsq, lam, zz), zz)
        xs = np.arange(x0 - 1, 0, -1)  # deepest first
        jsq_w = np.asarray(spec.J(xs), dtype=float).reshape(-1) ** 2
    elif side == "l":
        x1 = min(0, w_lo - 1)
        Jsq, lam = _tail_orbit(spec.left, x1, -1, spec.left.period)
        m = _fixed_point(_period_matrix(Jsq, lam, zz), zz)
        xs = np.arange(x1 + 1, 1)
        jsq_w = np.asarray(spec.J(xs - 1), dtype=float).reshape(-1) ** 2
    else:
        raise ValueError("side must be 'l' or 'r'")
    if xs.size:
        lam_w = np.asarray(spec.lam(xs), dtype=float).reshape(-1)
        m = continued_fraction(zz, lam_w, jsq_w, m)
        m = np.where((zz.imag == 0) & (np.abs(m.imag) < 1e-300), m.real + 0j, m)
    return complex(m[0]) if scalar else np.asarray(m)


def weyl_m_truncated(side: str, z, spec: ChainSpec, depth: int = 10_000):
    """Plain continued fraction of the half-line truncated to ``depth`` sites (``m = 0`` beyond)."""
    zz, scalar = _as_z(z)
    if side == "r":
        xs = np.arange(depth, 0, -1)
        jsq = np.asarray(spec.J(xs), dtype=float) ** 2
        jsq[0] = 0.0
    elif side == "l":
        xs = np.arange(-depth + 1, 1)
        jsq = np.asarray(spec.J(xs - 1), dtype=float) ** 2
        jsq[0] = 0.0
    else:
        raise ValueError("side must be 'l' or 'r'")
    lam = np.asarray(spec.lam(xs), dtype=float)
    m = continued_fraction(zz, lam, jsq, np.zeros_like(zz))
    return complex(m[0]) if scalar else np.asarray(m)


def weyl_m_oracle(side: str, E, spec: ChainSpec, depth: int = 10_000, w=None, degree: int = 6):
    """Independent boundary values from truncated continued fractions.

    Evaluates the depth-``depth`` truncation at ``E + i w^2`` for several
    ``w`` and extrapolates a degree-``degree`` polynomial in ``w`` to zero.
    Squaring makes the function analytic in ``w`` even at band edges, where
    it behaves like ``sqrt(z - edge)``.  A direct evaluation at tiny ``eta``
    cannot work: the truncated operator has level spacing ``~1/depth``, far
    above any ``eta`` that would be close to the limit.
    """
    w = np.linspace(0.05, 0.12, 9) if w is None else np.asarray(w, dtype=float)
    E_arr = np.asarray(E, dtype=float)
    Ev = np.atleast_1d(E_arr).reshape(-1)
    vals = np.array([weyl_m_truncated(side, Ev + 1j * wi * wi, spec, depth) for wi in w])
    coef = np.polyfit(w, vals, degree)
    out = coef[-1]
    return complex(out[0]) if E_arr.ndim == 0 else out


def smatrix_from_green(G_l, G_r, J0: float):
    """On-shell scattering matrices (shape ``(n, 2, 2)``) from half-line boundary values."""
    G_l = np.asarray(G_l, dtype=complex)
    G_r = np.asarray(G_r, dtype=complex)
    F_l = np.maximum(G_l.imag, 0.0)
    F_r = np.maximum(G_r.imag, 0.0)
    den = 1.0 - J0 * J0 * G_l * G_r
    s = np.empty(G_l.shape + (2, 2), dtype=complex)
    s[..., 0, 0] = 1.0 + 2j * J0 * J0 * F_l * G_r / den
    s[..., 1, 1] = 1.0 + 2j * J0 * J0 * F_r * G_l / den
    s[..., 0, 1] = s[..., 1, 0] = -2j * J0 * np.sqrt(F_l * F_r) / den
    return s, F_l, F_r


def smatrix(E, spec: ChainSpec) -> np.ndarray:
    """``s(E)``; a single 2x2 matrix for scalar ``E``, else shape ``(n, 2, 2)``."""
    E_arr = np.asarray(E, dtype=float)
    Ev = np.atleast_1d(E_arr).reshape(-1)
    s, _, _ = smatrix_from_green(weyl_m("l", Ev, spec), weyl_m("r", Ev, spec), spec.J(0))
    return s[0] if E_arr.ndim == 0 else s


def transmission(E, spec: ChainSpec) -> np.ndarray:
    """``|s_lr(E)|^2``."""
    s = smatrix(np.atleast_1d(E), spec)
    return np.abs(s[:, 0, 1]) ** 2


def scattering_point(E: float, spec: ChainSpec, support: SupportSet | None = None) -> ScatteringPoint:
    G_l = weyl_m("l", float(E), spec)
    G_r = weyl_m("r", float(E), spec)
    s, F_l, F_r = smatrix_from_green(np.array([G_l]), np.array([G_r]), spec.J(0))
    support = essential_support(spec) if support is None else support
    return ScatteringPoint(float(E), G_l, G_r, float(F_l[0]), float(F_r[0]), s[0], bool(support.contains(E)))


# ---------------------------------------------------------------------------
# bands and the essential support
# ---------------------------------------------------------------------------


def _band_function(tail: TailModel, E: np.ndarray) -> np.ndarray:
    """``(tr T)^2 - 4 det T`` of the one-period transfer matrix; negative inside bands."""
    Jsq = np.asarray(tail.J) ** 2
    lam = np.asarray(tail.lam)
    T = _period_matrix(Jsq, lam, E.astype(complex))
    tr = (T[..., 0, 0] + T[..., 1, 1]).real
    det = float(np.prod(Jsq))
    return tr * tr - 4.0 * det


def _bisect(f, a: float, b: float, tol: float = EDGE_TOL) -> float:
    fa = f(np.array([a]))[0]
    for _ in range(200):
        if b - a <= tol * max(1.0, abs(a)):
            break
        c = 0.5 * (a + b)
        fc = f(np.array([c]))[0]
        if (fc < 0) == (fa < 0):
            a, fa = c, fc
        else:
            b = c
    return 0.5 * (a + b)


def tail_bands(tail: TailModel, n_scan: int = 4001) -> list[tuple[float, float]]:
    """Spectral bands of the periodic operator defined by ``tail``, edges bisected."""
    R = 2.0 * max(abs(j) for j in tail.J) + max(abs(l) for l in tail.lam) + 1.0
    grid = np.linspace(-R, R, n_scan)
    f = lambda E: _band_function(tail, E)  # noqa: E731
    vals = f(grid)
    inside = vals < 0
    bands = []
    i = 0
    while i < n_scan:
        if inside[i]:
            j = i
            while j + 1 < n_scan and inside[j + 1]:
                j += 1
            lo = _bisect(f, grid[i - 1], grid[i]) if i > 0 else grid[0]
            hi = _bisect(f, grid[j], grid[j + 1]) if j + 1 < n_scan else grid[-1]
            bands.append((lo, hi))
            i = j + 1
        else:
            i += 1
    # touching bands of a periodic operator (closed gaps) are one band
    merged: list[list[float]] = []
    for lo, hi in bands:
        if merged and lo - merged[-1][1] < 1e-9:
            merged[-1][1] = hi
        else:
            merged.append([lo, hi])
    return [tuple(b) for b in merged]


def _intersect(a: list, b: list) -> list[tuple[float, float]]:
    out = []
    for lo1, hi1 in a:
        for lo2, hi2 in b:
            lo, hi = max(lo1, lo2), min(hi1, hi2)
            if hi > lo:
                out.append((lo, hi))
    return sorted(out)


def support_grid(support: SupportSet, n: int = 2001) -> np.ndarray:
    """Chebyshev points (endpoints excluded) in every support interval."""
    pts = []
    k = np.arange(1, n + 1)
    x = np.cos((2 * k - 1) * np.pi / (2 * n))[::-1]
    for a, b in support.intervals:
        pts.append(0.5 * (a + b) + 0.5 * (b - a) * x)
    return np.concatenate(pts) if pts else np.zeros(0)


def essential_support(spec: ChainSpec, n_check: int = 201, eps: float = SUPPORT_EPS) -> SupportSet:
    """``E`` with both half-line densities positive.

    Band edges come from bisection on the tails' transfer-matrix discriminants;
    each candidate interval is then confirmed on a Chebyshev grid, requiring
    ``min(F_l, F_r) > eps * max F`` at the interior points.
    """
    cand = _intersect(tail_bands(spec.left), tail_bands(spec.right))
    keep = []
    for lo, hi in cand:
        E = support_grid(SupportSet(((lo, hi),)), n_check)
        F_l = np.imag(weyl_m("l", E, spec))
        F_r = np.imag(weyl_m("r", E, spec))
        F = np.minimum(F_l, F_r)
        if F.min() > eps * max(F_l.max(), F_r.max()):
            keep.append((lo, hi))
    return SupportSet(tuple(keep), eps)


def reflectionless_test(spec: ChainSpec, eps_refl: float = 1e-9, n: int = 2001) -> ReflectionResult:
    support = essential_support(spec)
    if support.empty:
        return ReflectionResult(False, float("nan"), True)
    E = support_grid(support, n)
    dev = float(np.max(np.abs(1.0 - transmission(E, spec))))
    return ReflectionResult(dev < eps_refl, dev, False)
