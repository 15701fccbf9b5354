"""``entropix <task> --config <file>``: sweeps, persistence and the oracle harness.

A run reads a versioned JSON config, evaluates one task over its grids on a
thread pool, and writes ``<task>.csv`` (data), ``<task>.json`` (config echo,
versions, wall time, verdicts) and ``<task>.dat`` plus ``<task>.caption.txt``
(whitespace-delimited plot data).

Exit status: 0 success, 2 config error, 3 numerical verification failure,
4 resource cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import jsonschema
import numpy as np

from . import __version__, asymptotics, finite, kernels, scattering, verification
from .chain import ChainSpec, Interval

__all__ = [
    "TASKS",
    "SCHEMA",
    "ConfigError",
    "ResourceCapError",
    "RunConfig",
    "ResultTable",
    "parse_config",
    "emit_config",
    "load_config",
    "expand_grid",
    "run",
    "persist",
    "emit_plotdata",
    "main",
]

TASKS = ("functional", "limit", "scattering", "flux", "rates", "verify", "converge")
SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_RESOURCE = 0, 2, 3, 4

DEFAULT_TOLERANCES = {"verify": 1e-9, "quad": 1e-12}
DEFAULT_LIMITS = {"max_points": 100_000, "max_sites": 4001, "max_fock_sites": 10}

_number = {"type": "number"}
_grid = {
    "oneOf": [
        {"type": "array", "items": {"type": ["number", "string"]}, "minItems": 1},
        {
            "type": "object",
            "properties": {"start": _number, "stop": _number, "step": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["start", "stop", "step"],
            "additionalProperties": False,
        },
        _number,
    ]
}
_tail = {
    "type": "object",
    "properties": {
        "J": {"type": "array", "items": _number, "minItems": 1},
        "lam": {"type": "array", "items": _number, "minItems": 1},
        "phase": {"type": "integer"},
    },
    "required": ["J", "lam"],
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "task": {"enum": list(TASKS)},
        "chain": {
            "oneOf": [
                {
                    "type": "object",
                    "properties": {"preset": {"type": "string"}, "params": {"type": "object"}},
                    "required": ["preset"],
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "properties": {
                        "left": _tail,
                        "right": _tail,
                        "beta_l": {"type": "number", "exclusiveMinimum": 0},
                        "beta_r": {"type": "number", "exclusiveMinimum": 0},
                        "window": {"type": "array", "items": {"type": "array", "items": _number, "minItems": 3, "maxItems": 3}},
                    },
                    "required": ["left", "right", "beta_l", "beta_r"],
                    "additionalProperties": False,
                },
            ]
        },
        "kind": {"enum": ["ES", "EP", "EINF", "FCS", "GC"]},
        "which": {"enum": ["ES_GC", "FCS"]},
        "grids": {
            "type": "object",
            "properties": {k: _grid for k in ("alpha", "alpha_imag", "t", "p", "s", "E", "theta", "N")},
            "additionalProperties": False,
        },
        "interval": {
            "oneOf": [
                {"type": "object", "properties": {"M": {"type": "integer", "minimum": 1}}, "required": ["M"], "additionalProperties": False},
                {
                    "type": "object",
                    "properties": {"lo": {"type": "integer", "maximum": 0}, "hi": {"type": "integer", "minimum": 1}},
                    "required": ["lo", "hi"],
                    "additionalProperties": False,
                },
            ]
        },
        "M_rule": {"oneOf": [{"const": "causal"}, {"type": "integer", "minimum": 1}]},
        "flux": {
            "type": "object",
            "properties": {"M": {"type": "integer", "minimum": 2}, "t1": _number, "t2": _number},
            "additionalProperties": False,
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": {"type": "number", "exclusiveMinimum": 0},
        },
        "limits": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 1}},
        "threads": {"type": "integer", "minimum": 1},
        "output": {
            "type": "object",
            "properties": {"path": {"type": "string"}, "format": {"enum": ["csv"]}},
            "additionalProperties": False,
        },
    },
    "required": ["version", "chain"],
    "additionalProperties": False,
}

# grids each task needs, with defaults when the config leaves them out
_TASK_GRIDS: dict[str, dict[str, Any]] = {
    "functional": {"alpha": None, "t": None},
    "limit": {"alpha": None},
    "scattering": {"E": None},
    "flux": {},
    "rates": {"theta": None},
    "verify": {"N": [4, 6, 8]},
    "converge": {"alpha": None, "t": None},
}


class ConfigError(ValueError):
    """Schema or semantic violation; ``where`` names the field and line when known."""

    def __init__(self, msg: str, where: str = ""):
        super().__init__(f"{where}: {msg}" if where else msg)
        self.where = where


class ResourceCapError(RuntimeError):
    pass


def _locate(text: str, path: Sequence) -> int | None:
    """Line of the deepest key in ``path`` found by scanning the raw text in order."""
    pos, line = 0, None
    for key in path:
        if isinstance(key, int):
            continue
        hit = text.find(json.dumps(key), pos)
        if hit < 0:
            break
        pos = hit
        line = text.count("\n", 0, hit) + 1
    return line


def _where(text: str, path: Sequence) -> str:
    field_name = "/".join(str(p) for p in path) or "<root>"
    line = _locate(text, path) if path else 1
    return f"line {line}, field {field_name}" if line else f"field {field_name}"


def _number_or_inf(x) -> float:
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        raise ConfigError(f"grid entry {x!r} is not a number (only 'inf' is accepted as text)")
    return float(x)


def expand_grid(spec) -> tuple[float, ...]:
    """A list, a ``{start, stop, step}`` range (stop included) or a single number."""
    if isinstance(spec, Mapping):
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        if n < 1:
            raise ConfigError("empty range")
        # round to suppress accumulated float noise, so 0.05-steps hit 0 and 1 exactly
        return tuple(float(round(start + i * step, 12)) for i in range(n))
    if isinstance(spec, (list, tuple)):
        return tuple(_number_or_inf(x) for x in spec)
    return (_number_or_inf(spec),)


@dataclass(frozen=True)
class RunConfig:
    task: str
    chain: dict
    grids: dict = field(default_factory=dict)
    kind: str | None = None
    which: str | None = None
    interval: dict | None = None
    M_rule: Any = None
    flux: dict | None = None
    tolerances: dict = field(default_factory=dict)
    limits: dict = field(default_factory=dict)
    threads: int | None = None
    output: dict = field(default_factory=dict)
    version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"version": self.version, "task": self.task, "chain": self.chain}
        for key in ("kind", "which", "interval", "M_rule", "flux", "threads"):
            val = getattr(self, key)
            if val is not None:
                d[key] = val
        for key in ("grids", "tolerances", "limits", "output"):
            val = getattr(self, key)
            if val:
                d[key] = val
        return d

    @property
    def spec(self) -> ChainSpec:
        return ChainSpec.from_dict(self.chain)

    def grid(self, name: str) -> tuple[float, ...]:
        if name in self.grids:
            return expand_grid(self.grids[name])
        default = _TASK_GRIDS.get(self.task, {}).get(name)
        if default is None:
            raise ConfigError(f"task {self.task!r} needs a grid {name!r}", f"field grids/{name}")
        return expand_grid(default)

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))

    def limit(self, name: str) -> int:
        return int(self.limits.get(name, DEFAULT_LIMITS[name]))


def parse_config(text: str, task: str | None = None) -> RunConfig:
    """Validate JSON config text; ``task`` (from the command line) fills or must match ``task``."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        best = jsonschema.exceptions.best_match(errors) or err
        path = list(best.absolute_path)
        raise ConfigError(best.message, _where(text, path))
    cfg_task = raw.get("task")
    if task is not None and cfg_task is not None and task != cfg_task:
        raise ConfigError(f"config is for task {cfg_task!r} but {task!r} was requested", _where(text, ["task"]))
    raw["task"] = task or cfg_task
    if raw["task"] is None:
        raise ConfigError("no task given on the command line or in the config", "field task")
    cfg = RunConfig(**raw)
    _check_semantics(cfg, text)
    return cfg


def _check_semantics(cfg: RunConfig, text: str) -> None:
    try:
        cfg.spec
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc), _where(text, ["chain"])) from None
    for name in cfg.grids:
        try:
            values = expand_grid(cfg.grids[name])
        except ConfigError as exc:
            raise ConfigError(str(exc), _where(text, ["grids", name])) from None
        if not values:
            raise ConfigError("grid is empty", _where(text, ["grids", name]))
    for name in _TASK_GRIDS[cfg.task]:
        cfg.grid(name)
    if cfg.task in ("functional", "converge") and cfg.kind is None:
        raise ConfigError(f"task {cfg.task!r} needs 'kind'", "field kind")
    if cfg.task == "converge" and cfg.kind not in ("EP", "ES", "GC"):
        raise ConfigError("converge supports kind EP, ES or GC", _where(text, ["kind"]))
    if cfg.task == "rates" and cfg.which is None:
        raise ConfigError("task 'rates' needs 'which'", "field which")
    if "p" in cfg.grids and any(not p > 0 for p in cfg.grid("p")):
        raise ConfigError("p must be positive", _where(text, ["grids", "p"]))
    if "s" in cfg.grids and any(s < 0 for s in cfg.grid("s")):
        raise ConfigError("relaxation times must be nonnegative", _where(text, ["grids", "s"]))


def emit_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


def load_config(path: str | os.PathLike, task: str | None = None) -> RunConfig:
    return parse_config(Path(path).read_text(), task)


@dataclass(frozen=True)
class ResultTable:
    columns: dict[str, np.ndarray]
    metadata: dict

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"column lengths differ: { {k: len(v) for k, v in self.columns.items()} }")

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(self.columns))
        for row in zip(*self.columns.values()):
            writer.writerow([_fmt(x) for x in row])
        return buf.getvalue()


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return repr(float(x))


def _pool_map(fn: Callable, items: Sequence, threads: int) -> list:
    """Evaluate on a thread pool, then return results in grid order."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(fn, x): i for i, x in enumerate(items)}
        done = [(futures[f], f.result()) for f in futures]
    return [r for _, r in sorted(done, key=lambda pair: pair[0])]


def _check_points(cfg: RunConfig, n: int) -> None:
    if n > cfg.limit("max_points"):
        raise ResourceCapError(f"{n} grid points exceed max_points={cfg.limit('max_points')}")


def _check_sites(cfg: RunConfig, N: int) -> None:
    if N > cfg.limit("max_sites"):
        raise ResourceCapError(f"interval with {N} sites exceeds max_sites={cfg.limit('max_sites')}")


def _interval(cfg: RunConfig, t: float, s: float = 0.0) -> Interval:
    if cfg.interval is not None:
        if "M" in cfg.interval:
            iv = Interval.symmetric(int(cfg.interval["M"]))
        else:
            iv = Interval(int(cfg.interval["lo"]), int(cfg.interval["hi"]))
    else:
        iv = finite.causal_interval(cfg.spec, t, s)
    _check_sites(cfg, iv.N)
    return iv


# --- tasks: each returns (columns, verdicts, extra metadata) ------------------------------


def _task_functional(cfg: RunConfig, threads: int):
    spec = cfg.spec
    kind = cfg.kind
    alphas = cfg.grid("alpha")
    imag = cfg.grid("alpha_imag") if "alpha_imag" in cfg.grids else (0.0,)
    if kind != "FCS" and any(v != 0 for v in imag):
        raise ConfigError("complex alpha is only available for kind FCS", "field grids/alpha_imag")
    ts = cfg.grid("t")
    ps = cfg.grid("p") if kind == "EP" else (math.inf,) if kind == "EINF" else (2.0,)
    ss = cfg.grid("s") if kind == "GC" else (0.0,)
    points = list(itertools.product(ts, ss, ps, imag, alphas))
    _check_points(cfg, len(points))
    systems: dict[Interval, finite.ConfinedSystem] = {}
    for t, s in itertools.product(ts, ss):
        iv = _interval(cfg, t, s)
        if iv not in systems:
            systems[iv] = finite.assemble(spec, iv)

    def evaluate(pt):
        t, s, p, ai, ar = pt
        sys = systems[_interval(cfg, t, s)]
        q = finite.FunctionalQuery(kind, complex(ar, ai) if ai else ar, t, p, s)
        val = complex(finite.functional(sys, q))
        return t, s, p, ar, ai, val.real, val.imag, sys.N

    rows = _pool_map(evaluate, points, threads)
    cols = dict(zip(("t", "s", "p", "alpha", "alpha_imag", "value", "value_imag", "N"), map(np.array, zip(*rows))))
    if kind != "FCS":
        del cols["value_imag"], cols["alpha_imag"]
    verdicts = {}
    tol = cfg.tol("verify")
    on_axis = np.ones(len(rows), bool) if "alpha_imag" not in cols else cols["alpha_imag"] == 0
    ends = on_axis & np.isin(cols["alpha"], [0.0, 1.0])
    if kind in ("EP", "EINF", "FCS") and ends.any():
        dev = float(np.abs(cols["value"][ends]).max())
        verdicts["vanishes_at_alpha_0_and_1"] = {"max_deviation": dev, "tol": tol, "passed": dev <= tol}
    return cols, verdicts, {}


def _task_limit(cfg: RunConfig, threads: int):
    spec = cfg.spec
    kind = cfg.kind or "ES"
    if kind not in ("ES", "EP"):
        raise ConfigError("limit supports kind ES (e_+) or EP (e_{p,+})", "field kind")
    tol = cfg.tol("quad")
    support = scattering.essential_support(spec)
    ps = cfg.grid("p") if kind == "EP" else (math.nan,)
    points = list(itertools.product(ps, cfg.grid("alpha")))
    _check_points(cfg, len(points))

    def evaluate(pt):
        p, a = pt
        if kind == "EP":
            return p, a, asymptotics.e_p_plus(a, p, spec, tol, support)
        return p, a, asymptotics.e_plus(a, spec, tol, support)

    rows = _pool_map(evaluate, points, threads)
    cols = dict(zip(("p", "alpha", "value"), map(np.array, zip(*rows))))
    report = asymptotics.entropic_identity_report(spec, tol)
    verdicts = {"identity_consistent_with_reflection": {"passed": report.consistent, **report.to_dict()}}
    return cols, verdicts, {"essential_support": support.to_list()}


def _task_scattering(cfg: RunConfig, threads: int):
    spec = cfg.spec
    support = scattering.essential_support(spec)
    E = np.asarray(cfg.grid("E"))
    _check_points(cfg, E.size)
    s = scattering.smatrix(E, spec)
    m_l = scattering.weyl_m("l", E, spec)
    m_r = scattering.weyl_m("r", E, spec)
    inside = support.contains(E)
    eye = np.eye(2)
    unitarity = np.array([np.abs(si.conj().T @ si - eye).max() for si in s])
    unitarity = np.where(inside, unitarity, np.nan)
    cols = {
        "E": E,
        "transmission": np.where(inside, np.abs(s[:, 0, 1]) ** 2, 0.0),
        "F_l": m_l.imag,
        "F_r": m_r.imag,
        "in_support": inside.astype(float),
        "unitarity_deviation": unitarity,
    }
    tol = cfg.tol("verify")
    worst = float(np.nanmax(unitarity)) if inside.any() else 0.0
    refl = scattering.reflectionless_test(spec)
    verdicts = {
        "unitarity": {"max_deviation": worst, "tol": tol, "passed": worst <= max(tol, 1e-9)},
        "reflectionless": {"value": refl.reflectionless, "max_deviation": refl.max_deviation, "vacuous": refl.vacuous, "passed": True},
    }
    return cols, verdicts, {"essential_support": support.to_list()}


def _task_flux(cfg: RunConfig, threads: int):
    spec = cfg.spec
    opts = {"M": 400, "t1": 50.0, "t2": 100.0, **(cfg.flux or {})}
    _check_sites(cfg, 2 * int(opts["M"]) + 1)
    tol = cfg.tol("quad")
    support = scattering.essential_support(spec)
    phi_l, sigma = asymptotics.landauer_flux(spec, tol, support)
    finite_vol = asymptotics.finite_volume_flux(spec, int(opts["M"]), float(opts["t1"]), float(opts["t2"]))
    slope = asymptotics.derivative(lambda a: asymptotics.e_plus(a, spec, 1e-14, support), 0.0)
    from_e = -slope / spec.delta_beta if spec.delta_beta else math.nan
    cols = {
        "landauer_flux": np.array([phi_l]),
        "finite_volume_flux": np.array([finite_vol]),
        "flux_from_e_plus_slope": np.array([from_e]),
        "mean_entropy_production": np.array([sigma]),
    }
    rel = abs(finite_vol - phi_l) / max(abs(phi_l), 1e-300)
    verdicts = {
        "finite_volume_agreement": {"relative_deviation": rel, "tol": 1e-2, "passed": rel <= 1e-2},
        "slope_agreement": {"deviation": abs(from_e - phi_l), "tol": 1e-6, "passed": abs(from_e - phi_l) <= 1e-6},
    }
    return cols, verdicts, {"flux_window": opts}


def _task_rates(cfg: RunConfig, threads: int):
    spec = cfg.spec
    I = asymptotics.rate_function(cfg.which, spec)
    thetas = cfg.grid("theta")
    _check_points(cfg, 2 * len(thetas))
    values = _pool_map(I, list(thetas) + [-th for th in thetas], threads)
    n = len(thetas)
    plus, minus = np.array(values[:n]), np.array(values[n:])
    cols = {"theta": np.array(thetas), "rate": plus, "rate_at_minus_theta": minus}
    verdicts = {}
    if cfg.which == "FCS":
        finite_pair = np.isfinite(plus) & np.isfinite(minus)
        # I(-theta) = I(theta) + theta
        dev = float(np.abs(minus - plus - np.array(thetas))[finite_pair].max()) if finite_pair.any() else 0.0
        verdicts["fluctuation_relation"] = {"max_deviation": dev, "tol": 1e-6, "passed": dev <= 1e-6}
    sigma = asymptotics.landauer_flux(spec)[1]
    at_mean = I(sigma)
    verdicts["vanishes_at_mean"] = {"value": at_mean, "tol": 1e-8, "passed": abs(at_mean) < 1e-8}
    return cols, verdicts, {"mean_entropy_production": sigma, "domain": list(I.domain)}


def _task_converge(cfg: RunConfig, threads: int):
    spec = cfg.spec
    kind = cfg.kind
    p = cfg.grid("p")[0] if "p" in cfg.grids else 2.0
    M_rule = None if cfg.M_rule in (None, "causal") else int(cfg.M_rule)
    if cfg.interval is not None and "M" in cfg.interval:
        M_rule = int(cfg.interval["M"])
    ts = cfg.grid("t")
    alphas = cfg.grid("alpha")
    _check_points(cfg, len(ts) * len(alphas))
    limits = {}
    for a in alphas:
        limits[a] = asymptotics.e_p_plus(a, p, spec) if kind == "EP" else asymptotics.e_plus(a, spec)
    for t in ts:
        s = t if kind == "GC" else 0.0
        M = M_rule if M_rule is not None else asymptotics._default_M(spec, t, s)
        _check_sites(cfg, 2 * M + 1)

    def evaluate(pt):
        a, t = pt
        row = asymptotics.finite_time_convergence(spec, kind, a, [t], M_rule, p, limit=limits[a])[0]
        return a, row["t"], row["M"], row["s"], row["value"], row["limit"], row["error"]

    rows = _pool_map(evaluate, list(itertools.product(alphas, ts)), threads)
    cols = dict(zip(("alpha", "t", "M", "s", "value", "limit", "error"), map(np.array, zip(*rows))))
    return cols, {}, {"p": p}


def _task_verify(cfg: RunConfig, threads: int):
    Ns = tuple(int(n) for n in cfg.grid("N"))
    if max(Ns) > cfg.limit("max_fock_sites"):
        raise ResourceCapError(f"oracle size N={max(Ns)} exceeds max_fock_sites={cfg.limit('max_fock_sites')}")
    tol = cfg.tol("verify")
    spec = cfg.spec
    betas = (spec.beta_l, spec.beta_r)
    suites = [
        lambda: verification.oracle_matrix(Ns=Ns, tol=tol, betas=betas),
        lambda: verification.fluctuation_checks(betas=betas),
        lambda: verification.time_structure_checks(betas=betas),
        lambda: verification.functional_structure_checks(betas=betas),
    ]
    checks = [c for group in _pool_map(lambda f: f(), suites, threads) for c in group]
    cols = {
        "check": np.array([c.name for c in checks], dtype=object),
        "preset": np.array([str(c.params.get("preset", "")) for c in checks], dtype=object),
        "N": np.array([float(c.params.get("N", math.nan)) for c in checks]),
        "t": np.array([float(c.params.get("t", math.nan)) for c in checks]),
        "alpha_real": np.array([complex(c.params.get("alpha", math.nan)).real for c in checks]),
        "alpha_imag": np.array([complex(c.params.get("alpha", math.nan)).imag for c in checks]),
        "p": np.array([float(c.params.get("p", math.nan)) for c in checks]),
        "s": np.array([float(c.params.get("s", math.nan)) for c in checks]),
        "deviation": np.array([c.deviation for c in checks]),
        "tol": np.array([c.tol for c in checks]),
        "passed": np.array([float(c.passed) for c in checks]),
    }
    summary = verification.summarize(checks)
    verdicts = {name: {**entry, "passed": entry["failed"] == 0} for name, entry in summary.items()}
    failures = [c.to_dict() for c in checks if not c.passed]
    return cols, verdicts, {"failures": failures}


_TASK_FUNCS = {
    "functional": _task_functional,
    "limit": _task_limit,
    "scattering": _task_scattering,
    "flux": _task_flux,
    "rates": _task_rates,
    "verify": _task_verify,
    "converge": _task_converge,
}

PLOT_STYLES = {
    "functional": (("alpha", "value"), "alpha  functional value"),
    "limit": (("alpha", "value"), "alpha  large-time limit"),
    "converge": (("t", "value", "limit"), "t  finite-time value / t  large-time limit"),
    "scattering": (("E", "transmission", "F_l", "F_r"), "E  |s_lr|^2  F_l  F_r"),
    "rates": (("theta", "rate"), "theta  rate function"),
}


def run(cfg: RunConfig, threads: int | None = None, tol: float | None = None) -> ResultTable:
    """Evaluate ``cfg`` and return the table; nothing is written."""
    if tol is not None:
        cfg = RunConfig(**{**cfg.to_dict(), "tolerances": {**cfg.tolerances, "verify": float(tol)}})
    n_threads = int(threads or cfg.threads or 1)
    started = time.perf_counter()
    cols, verdicts, extra = _TASK_FUNCS[cfg.task](cfg, n_threads)
    wall = time.perf_counter() - started
    metadata = {
        "config": cfg.to_dict(),
        "code_version": __version__,
        "backend": kernels.backend(),
        "numpy": np.__version__,
        "threads": n_threads,
        "wall_time_s": wall,
        "verdicts": verdicts,
        "passed": all(v.get("passed", True) for v in verdicts.values()),
        **extra,
    }
    return ResultTable(cols, metadata)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def persist(table: ResultTable, out_dir: str | os.PathLike, stem: str) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / f"{stem}.csv", "json": out / f"{stem}.json"}
    paths["csv"].write_text(table.to_csv())
    paths["json"].write_text(json.dumps(_json_safe(table.metadata), indent=2, sort_keys=True) + "\n")
    return paths


def emit_plotdata(table: ResultTable, style: str, path: str | os.PathLike) -> tuple[Path, Path]:
    """Whitespace-delimited columns for ``style`` plus a ``.caption.txt`` sidecar."""
    names, caption = PLOT_STYLES[style]
    path = Path(path)
    lines = ["# " + "  ".join(names)]
    for row in zip(*(table.columns[n] for n in names)):
        lines.append(" ".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")
    cap = path.with_suffix(".caption.txt")
    cfg = table.metadata.get("config", {})
    chain = cfg.get("chain", {})
    label = chain.get("preset", "custom chain")
    cap.write_text(f"{caption}; chain: {label}; task: {cfg.get('task', style)}; columns: {' '.join(names)}\n")
    return path, cap


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="entropix", description="Entropic fluctuation functionals of the open XY chain.")
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config", required=True, help="JSON config (schema version 1)")
    ap.add_argument("--out", default=None, help="output directory (default: output.path or ./results)")
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--tol", type=float, default=None, help="verification tolerance override")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.tol is not None and not args.tol > 0:
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.task)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or cfg.output.get("path", "results")
    try:
        table = run(cfg, args.threads, args.tol)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceCapError as exc:
        record = {"status": "resource_cap", "message": str(exc), "config": cfg.to_dict()}
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / f"{cfg.task}.failure.json").write_text(json.dumps(record, indent=2) + "\n")
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    paths = persist(table, out_dir, cfg.task)
    if cfg.task in PLOT_STYLES:
        emit_plotdata(table, cfg.task, Path(out_dir) / f"{cfg.task}.dat")
    status = "ok" if table.metadata["passed"] else "verification_failed"
    for name, v in table.metadata["verdicts"].items():
        mark = "PASS" if v.get("passed", True) else "FAIL"
        print(f"{mark}  {name}")
    print(f"{status}: wrote {paths['csv']} and {paths['json']}")
    if not table.metadata["passed"]:
        failed = {k: v for k, v in table.metadata["verdicts"].items() if not v.get("passed", True)}
        record = {"status": status, "failed_verdicts": failed, "failures": table.metadata.get("failures", [])}
        (Path(out_dir) / f"{cfg.task}.failure.json").write_text(json.dumps(_json_safe(record), indent=2) + "\n")
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
