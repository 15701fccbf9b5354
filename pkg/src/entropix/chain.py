"""XY-chain coefficient sequences, reservoir temperatures and finite restrictions.

Conventions: ``J[x]`` is the bond between sites ``x`` and ``x + 1``; the cut
sits between sites 0 and 1, so ``J[0]`` is the coupling that joins the two
reservoirs.  Outside the explicit window the left tail supplies every
coefficient with ``x <= 0`` (including the cut bond) and the right tail every
coefficient with ``x >= 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "TailModel",
    "ChainSpec",
    "Interval",
    "preset",
    "restrict",
    "PRESETS",
]


@dataclass(frozen=True)
class TailModel:
    """Constant or periodic coefficients of one half of the chain.

    The value at site ``x`` is ``J[(x + phase) % period]``, i.e. ``phase`` is
    the residue picked at ``x = 0``.
    """

    J: tuple[float, ...]
    lam: tuple[float, ...]
    phase: int = 0

    def __post_init__(self):
        J = tuple(float(v) for v in np.atleast_1d(self.J))
        lam = tuple(float(v) for v in np.atleast_1d(self.lam))
        if len(J) == 0 or len(J) != len(lam):
            raise ValueError("tail J and lambda lists must be nonempty with equal length")
        if any(v == 0.0 for v in J):
            raise ValueError("zero coupling J_x = 0 is not allowed")
        if not all(np.isfinite(J + lam)):
            raise ValueError("tail coefficients must be finite")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "phase", int(self.phase) % len(J))

    @classmethod
    def constant(cls, J: float, lam: float = 0.0) -> TailModel:
        return cls((J,), (lam,))

    @property
    def period(self) -> int:
        return len(self.J)

    @property
    def kind(self) -> str:
        return "constant" if self.period == 1 else "periodic"

    def index(self, x):
        return (np.asarray(x) + self.phase) % self.period

    def J_at(self, x):
        return np.asarray(self.J)[self.index(x)]

    def lam_at(self, x):
        return np.asarray(self.lam)[self.index(x)]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "J": list(self.J), "lam": list(self.lam), "phase": self.phase}

    @classmethod
    def from_dict(cls, d: Mapping) -> TailModel:
        kind = d.get("kind", "constant" if len(np.atleast_1d(d["J"])) == 1 else "periodic")
        if kind not in ("constant", "periodic"):
            raise ValueError(f"unsupported tail kind {kind!r}; only constant/periodic tails are representable")
        tail = cls(tuple(np.atleast_1d(d["J"])), tuple(np.atleast_1d(d.get("lam", 0.0))), d.get("phase", 0))
        if kind == "constant" and tail.period != 1:
            raise ValueError("constant tail must carry exactly one J and one lambda")
        return tail


@dataclass(frozen=True)
class Interval:
    """Sites ``lo..hi`` inclusive, with the cut between sites 0 and 1."""

    lo: int
    hi: int

    def __post_init__(self):
        if not (int(self.lo) <= 0 < int(self.hi)):
            raise ValueError(f"interval [{self.lo}, {self.hi}] must satisfy lo <= 0 < hi")
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "hi", int(self.hi))

    @classmethod
    def symmetric(cls, M: int) -> Interval:
        """``[-M, M]``; for ``M = 0`` this degenerates, so ``M >= 1``."""
        return cls(-M, M)

    @classmethod
    def of_size(cls, N: int) -> Interval:
        """Interval with ``N >= 2`` sites, left half ``ceil(N/2)`` sites long."""
        if N < 2:
            raise ValueError("need at least two sites")
        n_left = (N + 1) // 2
        return cls(1 - n_left, N - n_left)

    @property
    def N(self) -> int:
        return self.hi - self.lo + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    @property
    def n_left(self) -> int:
        return 1 - self.lo

    def index(self, x: int) -> int:
        """Row/column of site ``x`` in an ``N x N`` one-body matrix."""
        return x - self.lo


@dataclass(frozen=True)
class ChainSpec:
    left: TailModel
    right: TailModel
    beta_l: float
    beta_r: float
    window: tuple[tuple[int, float, float], ...] = field(default=())

    def __post_init__(self):
        if not (self.beta_l > 0 and self.beta_r > 0):
            raise ValueError("inverse temperatures must be positive")
        rows = []
        seen = set()
        for x, J, lam in self.window:
            x = int(x)
            if x in seen:
                raise ValueError(f"site {x} listed twice in window")
            if float(J) == 0.0:
                raise ValueError(f"zero coupling J_{x} = 0 is not allowed")
            seen.add(x)
            rows.append((x, float(J), float(lam)))
        object.__setattr__(self, "window", tuple(sorted(rows)))
        object.__setattr__(self, "beta_l", float(self.beta_l))
        object.__setattr__(self, "beta_r", float(self.beta_r))

    @property
    def delta_beta(self) -> float:
        return self.beta_r - self.beta_l

    @property
    def window_range(self) -> tuple[int, int]:
        """Smallest and largest explicit site, or ``(1, 0)`` if the window is empty."""
        if not self.window:
            return (1, 0)
        return (self.window[0][0], self.window[-1][0])

    def _coef(self, x, which: int):
        x = np.asarray(x, dtype=np.int64)
        out = np.where(
            x <= 0,
            (self.left.J_at(x) if which == 1 else self.left.lam_at(x)),
            (self.right.J_at(x) if which == 1 else self.right.lam_at(x)),
        ).astype(float)
        if self.window:
            lookup = {row[0]: row[which] for row in self.window}
            flat = out.reshape(-1)
            for i, xi in enumerate(x.reshape(-1)):
                if int(xi) in lookup:
                    flat[i] = lookup[int(xi)]
        return out if out.ndim else float(out)

    def J(self, x):
        return self._coef(x, 1)

    def lam(self, x):
        return self._coef(x, 2)

    def _all_J(self) -> np.ndarray:
        vals = list(self.left.J) + list(self.right.J) + [row[1] for row in self.window]
        return np.abs(np.asarray(vals))

    def _all_lam(self) -> np.ndarray:
        vals = list(self.left.lam) + list(self.right.lam) + [row[2] for row in self.window]
        return np.abs(np.asarray(vals))

    @property
    def sup_J(self) -> float:
        return float(self._all_J().max())

    @property
    def sup_lam(self) -> float:
        return float(self._all_lam().max())

    @property
    def v_max(self) -> float:
        """Causality speed ``2 sup|J| + sup|lambda|`` used to size finite windows."""
        return 2.0 * self.sup_J + self.sup_lam

    def with_betas(self, beta_l: float, beta_r: float) -> ChainSpec:
        return ChainSpec(self.left, self.right, beta_l, beta_r, self.window)

    def to_dict(self) -> dict:
        return {
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
            "window": [list(row) for row in self.window],
            "beta_l": self.beta_l,
            "beta_r": self.beta_r,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> ChainSpec:
        if "preset" in d:
            params = dict(d.get("params", {}))
            return preset(d["preset"], **params)
        return cls(
            TailModel.from_dict(d["left"]),
            TailModel.from_dict(d["right"]),
            d["beta_l"],
            d["beta_r"],
            tuple(tuple(row) for row in d.get("window", ())),
        )


def _constant(J=1.0, lam=0.0, beta_l=1.0, beta_r=2.0):
    tail = TailModel.constant(J, lam)
    return ChainSpec(tail, tail, beta_l, beta_r)


def _step_J(J_left=0.5, J_right=1.0, lam=0.0, beta_l=1.0, beta_r=2.0):
    return ChainSpec(TailModel.constant(J_left, lam), TailModel.constant(J_right, lam), beta_l, beta_r)


def _periodic2(J=(1.0, 2.0), lam=(0.0, 0.0), phase=0, beta_l=1.0, beta_r=2.0):
    tail = TailModel(tuple(J), tuple(lam), phase)
    return ChainSpec(tail, tail, beta_l, beta_r)


def _tabulated(window, left=(1.0, 0.0), right=(1.0, 0.0), beta_l=1.0, beta_r=2.0):
    def tail(t):
        if isinstance(t, TailModel):
            return t
        if isinstance(t, Mapping):
            return TailModel.from_dict(t)
        return TailModel.constant(*t)

    return ChainSpec(tail(left), tail(right), beta_l, beta_r, tuple(tuple(r) for r in window))


PRESETS = {
    "constant": _constant,
    "step_J": _step_J,
    "periodic2": _periodic2,
    "tabulated": _tabulated,
}


def preset(name: str, **params) -> ChainSpec:
    """Build one of the named chain families (``constant``, ``step_J``, ``periodic2``, ``tabulated``)."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(**params)


def restrict(spec: ChainSpec, iv: Interval) -> tuple[np.ndarray, np.ndarray]:
    """Bond couplings ``J_lo..J_{hi-1}`` and fields ``lambda_lo..lambda_hi`` on ``iv``."""
    sites = iv.sites
    return np.asarray(spec.J(sites[:-1]), dtype=float).reshape(-1), np.asarray(
        spec.lam(sites), dtype=float
    ).reshape(-1)


def tridiagonal(J: Sequence[float], lam: Iterable[float]) -> np.ndarray:
    lam = np.asarray(list(lam), dtype=float)
    J = np.asarray(J, dtype=float)
    return np.diag(lam) + np.diag(J, 1) + np.diag(J, -1)
