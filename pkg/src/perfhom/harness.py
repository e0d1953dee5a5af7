"""Epsilon sweeps: solve both problems, measure errors, compare with predicted rates."""
from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corrector import CorrectorField
from .femlab import Problem, assemble, build_mesh, error_norms, l2_norm, solve_cg
from .femlab.solvers import SOLVER_TOL
from .regime import (
    ContractError,
    PerforationParams,
    RateBundle,
    Scenario,
    limit_regime,
    params_from_mapping,
    rates_for,
    validate_epsilon,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "LOADS",
    "Load",
    "FitError",
    "SweepError",
    "SweepConfig",
    "SweepRow",
    "ERROR_RATE_PAIRS",
    "run_sweep",
    "fit_rate",
    "rows_to_csv",
    "summary",
    "load_config",
    "config_from_mapping",
    "parse_eps_list",
]


# ---------------------------------------------------------------------------
# loads with analytic L2 norms on the unit square


@dataclass(frozen=True)
class Load:
    name: str
    func: object
    l2_norm: float

    def __call__(self, p):
        return self.func(p)


def _sine(p):
    return np.sin(np.pi * p[..., 0]) * np.sin(np.pi * p[..., 1])


_GAUSS_CENTER = (0.37, 0.61)
_GAUSS_WIDTH = 0.1


def _gauss(p):
    cx, cy = _GAUSS_CENTER
    r2 = (p[..., 0] - cx) ** 2 + (p[..., 1] - cy) ** 2
    return np.exp(-r2 / (2 * _GAUSS_WIDTH ** 2))


def _gauss_norm():
    s = _GAUSS_WIDTH
    axis = [s * math.sqrt(math.pi) / 2 * (math.erf((1 - c) / s) + math.erf(c / s)) for c in _GAUSS_CENTER]
    return math.sqrt(axis[0] * axis[1])


def _taper_1d(t):
    return 1.0 - (2.0 * t - 1.0) ** 8


def _taper(p):
    return _taper_1d(p[..., 0]) * _taper_1d(p[..., 1])


LOADS = {
    "sine": Load("sine", _sine, 0.5),
    "gauss": Load("gauss", _gauss, _gauss_norm()),
    "taper": Load("taper", _taper, 1.0 - 2.0 / 9.0 + 1.0 / 17.0),
}

# measured error -> rate it is compared with
ERROR_RATE_PAIRS = {
    "L2": "eta",
    "H1": "eta_prime",
    "H1_corrected": "eta_tilde",
    "u_norm": "th5_bound",
}


# ---------------------------------------------------------------------------
# config and rows


class SweepError(RuntimeError):
    """A geometry or solver failure at one sweep point."""

    def __init__(self, eps: float, cause: Exception):
        super().__init__(f"eps={eps!r}: {type(cause).__name__}: {cause}")
        self.eps = eps
        self.cause = cause


class FitError(ValueError):
    pass


@dataclass
class SweepConfig:
    params: PerforationParams
    eps_list: Sequence[float]
    loads: Sequence[str] = ("sine", "gauss", "taper")
    refinement: int = 0
    record: Sequence[str] = ("L2", "H1", "H1_corrected")
    csv_path: Optional[str] = None
    json_path: Optional[str] = None
    seed: int = 0
    tol: float = SOLVER_TOL
    name: str = "sweep"

    def __post_init__(self):
        self.eps_list = [float(e) for e in self.eps_list]
        if len(self.eps_list) < 3:
            raise ContractError("a sweep needs at least three eps values")
        if any(b >= a for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ContractError("eps_list must be strictly decreasing")
        for e in self.eps_list:
            bad = validate_epsilon(self.params, e)
            if bad:
                raise ContractError(f"eps={e!r} violates {[v.value for v in bad]}")
        unknown = [name for name in self.loads if name not in LOADS]
        if unknown or not self.loads:
            raise ContractError(f"unknown loads {unknown}; choose from {sorted(LOADS)}")
        unknown = [k for k in self.record if k not in ("L2", "H1", "H1_corrected")]
        if unknown:
            raise ContractError(f"unknown error keys {unknown}")
        if self.refinement < 0:
            raise ContractError("refinement must be non-negative")

    @property
    def scenario(self) -> Scenario:
        return limit_regime(self.params).scenario


@dataclass
class SweepRow:
    eps: float
    rates: RateBundle
    errors: dict
    per_load: dict = field(default_factory=dict)
    fitted: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def __post_init__(self):
        if any(v is not None and v < 0 for v in self.errors.values()):
            raise ContractError("measured errors must be non-negative")


def _sweep_point(config: SweepConfig, eps: float) -> SweepRow:
    params = config.params
    vanishing = config.scenario is Scenario.VANISHING
    rates = rates_for(params, eps)
    mesh = build_mesh(params, eps, config.refinement)
    filled = None if vanishing else mesh.filled()
    corrector = None
    if not vanishing and "H1_corrected" in config.record:
        corrector = CorrectorField(params, eps)
    V = None if vanishing else float(limit_regime(params).V)
    per_load = {}
    for name in config.loads:
        load = LOADS[name]
        u_eps = solve_cg(assemble(mesh, params, eps, Problem.perforated(), load), tol=config.tol)
        if vanishing:
            per_load[name] = {"u_norm": l2_norm(u_eps) / load.l2_norm}
            continue
        u = solve_cg(assemble(filled, params, eps, Problem.homogenized(V), load), tol=config.tol)
        norms = error_norms(u_eps, u, corrector)
        per_load[name] = {k: (None if norms[k] is None else norms[k] / load.l2_norm) for k in config.record}
    keys = ["u_norm"] if vanishing else list(config.record)
    errors = {k: max(per_load[n][k] for n in config.loads) for k in keys}
    return SweepRow(eps, rates, errors, per_load)


def _fill_ratios(rows):
    for row in rows:
        for err_key, value in row.errors.items():
            rate = getattr(row.rates, ERROR_RATE_PAIRS[err_key])
            if value is not None and rate is not None and rate > 0:
                row.fitted[f"{err_key}/{ERROR_RATE_PAIRS[err_key]}"] = value / rate


def run_sweep(config: SweepConfig) -> list:
    """One row per eps, in the order of ``config.eps_list``."""
    rows = []
    for eps in config.eps_list:
        start = time.perf_counter()
        try:
            row = _sweep_point(config, eps)
        except (ValueError, RuntimeError) as exc:
            raise SweepError(eps, exc) from exc
        row.wall_time = time.perf_counter() - start
        rows.append(row)
    _fill_ratios(rows)
    return rows


def fit_rate(rows, error_key: str, rate_key: str):
    """``(C, deviation)`` with ``C = max error/rate`` and ``deviation = max ratio / min ratio``."""
    if len(rows) < 3:
        raise ContractError("rate fitting needs at least three rows")
    ratios = []
    for row in rows:
        err = row.errors[error_key] if hasattr(row, "errors") else row[error_key]
        rate = getattr(row.rates, rate_key) if hasattr(row, "rates") else row[rate_key]
        if rate is None or rate < 0:
            raise ContractError(f"rate {rate_key} is not available on every row")
        if rate == 0:
            if err != 0:
                raise FitError(f"zero {rate_key} with non-zero {error_key}")
            continue
        ratios.append(err / rate)
    if not ratios:
        raise FitError("no row with a positive rate")
    C = max(ratios)
    lo = min(ratios)
    deviation = math.inf if lo == 0 else C / lo
    return C, deviation


# ---------------------------------------------------------------------------
# output


def _csv_columns(rows):
    err_keys = list(rows[0].errors) if rows else []
    fit_keys = sorted({k for r in rows for k in r.fitted})
    return ["eps", *err_keys, *RateBundle.FIELDS, *fit_keys], err_keys, fit_keys


def _fmt(v):
    return "" if v is None else repr(float(v))


def rows_to_csv(rows, target=None) -> str:
    """CSV with a stable column order; written to ``target`` when given."""
    cols, err_keys, fit_keys = _csv_columns(rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        rates = r.rates.to_dict()
        w.writerow([_fmt(r.eps)] + [_fmt(r.errors[k]) for k in err_keys]
                   + [_fmt(rates[k]) for k in RateBundle.FIELDS]
                   + [_fmt(r.fitted.get(k)) for k in fit_keys])
    text = buf.getvalue()
    if target is not None:
        Path(target).write_text(text)
    return text


def summary(config: SweepConfig, rows, checks: Optional[dict] = None, timings: bool = False) -> dict:
    """JSON-ready summary; wall times are left out unless asked for, to keep output reproducible."""
    out = {
        "name": config.name,
        "scenario": config.scenario.value,
        "refinement": config.refinement,
        "loads": list(config.loads),
        "seed": config.seed,
        "rows": [],
    }
    for r in rows:
        item = {"eps": r.eps, "errors": r.errors, "rates": r.rates.to_dict(),
                "fitted": r.fitted, "per_load": r.per_load}
        if timings:
            item["wall_time"] = r.wall_time
        out["rows"].append(item)
    fits = {}
    for err_key in (rows[0].errors if rows else {}):
        rate_key = ERROR_RATE_PAIRS[err_key]
        try:
            C, dev = fit_rate(rows, err_key, rate_key)
        except (FitError, ContractError):
            continue
        fits[f"{err_key}/{rate_key}"] = {"C": C, "deviation": dev}
    out["fits"] = fits
    if checks is not None:
        out["checks"] = checks
    return out


def write_plot_data(rows, directory) -> list:
    """Two-column ``eps value`` files, one per measured error and one per rate."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    series = {}
    for key in rows[0].errors:
        series[f"error_{key}"] = [(r.eps, r.errors[key]) for r in rows]
    for key in RateBundle.FIELDS:
        pts = [(r.eps, getattr(r.rates, key)) for r in rows]
        if all(v is not None for _, v in pts):
            series[f"rate_{key}"] = pts
    for name, pts in series.items():
        path = d / f"{name}.dat"
        path.write_text("".join(f"{e!r} {v!r}\n" for e, v in pts if v is not None))
        written.append(str(path))
    return written


# ---------------------------------------------------------------------------
# config files


def parse_eps_list(value) -> list:
    """A list of numbers, or ``"a:b:k"`` meaning ``k`` geometric steps from ``a`` to ``b``.

    Values ``1/k`` are snapped to exact reciprocals so meshes tile the square.
    """
    if isinstance(value, str):
        parts = value.split(":")
        if len(parts) != 3:
            raise ContractError("expected a:b:k")
        a, b, k = float(_num(parts[0])), float(_num(parts[1])), int(parts[2])
        if k < 2 or a <= 0 or b <= 0:
            raise ContractError("need k >= 2 and positive endpoints")
        vals = list(np.geomspace(a, b, k))
    else:
        vals = [float(_num(v)) for v in value]
    out = []
    for v in vals:
        inv = round(1.0 / v)
        out.append(1.0 / inv if inv > 0 and abs(inv * v - 1.0) < 1e-9 else v)
    return out


def _num(v):
    if isinstance(v, str) and "/" in v:
        a, b = v.split("/")
        return float(a) / float(b)
    return float(v)


def config_from_mapping(m: dict) -> SweepConfig:
    params = params_from_mapping(m["params"] if "params" in m else m)
    sweep = m.get("sweep", m)
    output = m.get("output", {})
    kw = {}
    if "loads" in sweep:
        kw["loads"] = tuple(sweep["loads"])
    if "record" in sweep:
        kw["record"] = tuple(sweep["record"])
    return SweepConfig(
        params=params,
        eps_list=parse_eps_list(sweep["eps"]),
        refinement=int(sweep.get("refinement", 0)),
        csv_path=output.get("csv"),
        json_path=output.get("json"),
        seed=int(sweep.get("seed", 0)),
        tol=float(sweep.get("tol", SOLVER_TOL)),
        name=str(m.get("name", "sweep")),
        **kw,
    )


def read_config_file(path) -> dict:
    p = Path(path)
    if p.suffix.lower() == ".json":
        return json.loads(p.read_text())
    with open(p, "rb") as fh:
        return tomllib.load(fh)


def load_config(path) -> SweepConfig:
    """Sweep config from a TOML or JSON file."""
    return config_from_mapping(read_config_file(path))
