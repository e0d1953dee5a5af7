"""Command line entry point ``perfhom``.

Every subcommand exits with status 0 exactly when all of its enabled checks
pass; configuration and geometry errors exit with status 2.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import corrector as corr
from . import harness, quasiunitary
from .femlab import Problem, assemble, build_mesh, error_norms, l2_norm, solve_cg, write_mesh
from .regime import (
    ContractError,
    DomainError,
    GeometryError,
    PerforationParams,
    RateBundle,
    ScalingLaw,
    limit_regime,
    params_from_mapping,
    perforation_numbers,
    rates_for,
    validate_epsilon,
)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def _add_params(p):
    p.add_argument("--config", help="TOML or JSON file with n, d.*, gamma.* keys")
    p.add_argument("--n", type=int)
    p.add_argument("--d-exponent", default=None, help="s in d = c eps^s (rationals like 3/2 allowed)")
    p.add_argument("--d-coefficient", type=float, default=1.0)
    p.add_argument("--d-log-power", type=int, default=0)
    p.add_argument("--gamma-exponent", default=None, help="t in gamma = c eps^t")
    p.add_argument("--gamma-coefficient", type=float, default=1.0)
    p.add_argument("--gamma-log-power", type=int, default=0)


def _params(args) -> PerforationParams:
    if args.config:
        return params_from_mapping(_section(harness.read_config_file(args.config), "params"))
    if args.n is None or args.d_exponent is None or args.gamma_exponent is None:
        raise ContractError("give --config or all of --n, --d-exponent, --gamma-exponent")
    return PerforationParams(
        args.n,
        ScalingLaw(args.d_coefficient, args.d_exponent, args.d_log_power),
        ScalingLaw(args.gamma_coefficient, args.gamma_exponent, args.gamma_log_power),
    )


def _section(m, key):
    return m[key] if key in m else m


def _table(pairs) -> str:
    width = max(len(k) for k, _ in pairs)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in pairs)


def _fmt(v):
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


# ---------------------------------------------------------------------------


def cmd_regime(args) -> int:
    params = _params(args)
    report = limit_regime(params)
    if args.sweep:
        key, _, spec = args.sweep.partition("=")
        if key.strip() != "eps":
            raise ContractError("--sweep expects eps=a:b:k")
        eps_list = harness.parse_eps_list(spec)
        cols = ["eps", "P_eps", "Q_eps", "V_eps", "Lambda_eps", "admissible", *RateBundle.FIELDS]
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(cols)
        ok = True
        for e in eps_list:
            nums = perforation_numbers(params, e)
            bad = validate_epsilon(params, e)
            ok &= not bad
            rates = rates_for(params, e).to_dict()
            w.writerow([repr(e), repr(nums.P_eps), repr(nums.Q_eps), repr(nums.V_eps),
                        repr(nums.Lambda_eps), "yes" if not bad else "no"]
                       + ["" if rates[k] is None else repr(rates[k]) for k in RateBundle.FIELDS])
        return 0 if ok else 1
    out = {"regime": report.to_dict()}
    bad = []
    if args.eps is not None:
        nums = perforation_numbers(params, args.eps)
        bad = validate_epsilon(params, args.eps)
        out["eps"] = args.eps
        out["numbers"] = {"P_eps": nums.P_eps, "Q_eps": nums.Q_eps, "V_eps": nums.V_eps,
                          "D_script": nums.D_script, "Lambda_eps": nums.Lambda_eps}
        out["violations"] = [v.value for v in bad]
        out["rates"] = rates_for(params, args.eps).to_dict()
    if args.table:
        pairs = [(k, _fmt(v)) for k, v in out["regime"].items()]
        for section in ("numbers", "rates"):
            pairs += [(k, _fmt(v)) for k, v in out.get(section, {}).items()]
        if "violations" in out:
            pairs.append(("violations", ", ".join(out["violations"]) or "none"))
        print(_table(pairs))
    else:
        print(_dump(out))
    return 0 if not bad else 1


def cmd_corrector_check(args) -> int:
    rows = corr.run_identity_suite(sample_count=args.samples)
    worst_robin = max(r.robin_residual / r.gamma if r.gamma > 0 else r.robin_residual for r in rows)
    worst_flux = max(r.flux_rel_error for r in rows)
    worst_sup = max(r.sup_rel_error for r in rows)
    failed = [r for r in rows if not r.passed]
    print(_table([
        ("tuples", str(len(rows))),
        ("max robin residual / gamma", f"{worst_robin:.3e}"),
        ("max flux relative error", f"{worst_flux:.3e}"),
        ("max sup relative error", f"{worst_sup:.3e}"),
        ("failures", str(len(failed))),
    ]))
    for r in failed[:20]:
        print(f"FAIL n={r.n} s={r.s} t={r.t} eps={r.eps}")
    print(json.dumps({
        "tuples": len(rows),
        "max_robin_residual_over_gamma": worst_robin,
        "max_flux_rel_error": worst_flux,
        "max_sup_rel_error": worst_sup,
        "failures": len(failed),
        "passed": not failed,
    }, sort_keys=True))
    return 0 if not failed else 1


def cmd_abstract_check(args) -> int:
    rows = quasiunitary.abstract_suite(args.instances, args.max_dim, args.seed, args.coupling)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["seed", "dim", "delta", "L2_defect", "4delta", "H1_defect", "6delta",
                "dH_spec", "bound", "passed"])
    for r in rows:
        w.writerow([r.seed, r.dim, repr(r.delta), repr(r.l2_defect), repr(4 * r.delta),
                    repr(r.h1_defect), repr(6 * r.delta), repr(r.spectral_distance),
                    repr(r.spectral_bound), int(r.passed)])
    bad = sum(not r.passed for r in rows)
    print(f"verdict: {'PASS' if bad == 0 else 'FAIL'} ({len(rows) - bad}/{len(rows)} instances)")
    return 0 if bad == 0 else 1


def _write_vector(directory: Path, name: str, values: np.ndarray, meta: dict):
    path = directory / f"{name}.f64"
    np.asarray(values, dtype="<f8").tofile(path)
    side = dict(meta)
    side.update({"file": path.name, "dtype": "float64", "endianness": "little",
                 "length": int(len(values))})
    (directory / f"{name}.json").write_text(_dump(side) + "\n")


def cmd_solve(args) -> int:
    cfg = harness.read_config_file(args.config)
    params = params_from_mapping(_section(cfg, "params"))
    solve_cfg = cfg.get("solve", cfg)
    eps = float(harness.parse_eps_list([solve_cfg["eps"]])[0])
    refinement = int(solve_cfg.get("refinement", 0))
    load_name = solve_cfg.get("load", "sine")
    tol = float(solve_cfg.get("tol", 1e-10))
    if load_name not in harness.LOADS:
        raise ContractError(f"unknown load {load_name!r}")
    load = harness.LOADS[load_name]
    bad = validate_epsilon(params, eps)
    if bad:
        raise ContractError(f"eps={eps!r} violates {[v.value for v in bad]}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = limit_regime(params)
    mesh = build_mesh(params, eps, refinement)
    if args.write_mesh:
        write_mesh(mesh, out / "mesh_perforated.txt")
        write_mesh(mesh.filled(), out / "mesh_filled.txt")
    u_eps = solve_cg(assemble(mesh, params, eps, Problem.perforated(), load), tol=tol)
    base = {"eps": eps, "refinement": refinement, "load": load_name, "n_nodes": mesh.n_nodes}
    _write_vector(out, "u_eps", u_eps.values, {**base, **u_eps.metadata})
    result = {"eps": eps, "regime": report.to_dict(), "rates": rates_for(params, eps).to_dict()}
    ok = u_eps.metadata["residual"] <= tol
    if report.V is not None:
        filled = mesh.filled()
        u = solve_cg(assemble(filled, params, eps, Problem.homogenized(report.V), load), tol=tol)
        _write_vector(out, "u_hom", u.values, {**base, "n_nodes": filled.n_nodes, **u.metadata})
        norms = error_norms(u_eps, u, corr.CorrectorField(params, eps))
        result["errors"] = {k: v / load.l2_norm for k, v in norms.items()}
        ok &= u.metadata["residual"] <= tol
    else:
        result["errors"] = {"u_norm": l2_norm(u_eps) / load.l2_norm}
    result["normalized_by"] = load.l2_norm
    (out / "errors.json").write_text(_dump(result) + "\n")
    print(_dump(result["errors"]))
    return 0 if ok else 1


def _parse_check(text, parts):
    bits = text.split(":")
    if len(bits) != parts:
        raise ContractError(f"malformed check {text!r}")
    return bits


def _sweep_checks(args, rows) -> dict:
    checks = {}
    for key in args.check_decreasing or []:
        vals = [r.errors[key] for r in rows]
        checks[f"decreasing:{key}"] = all(b < a for a, b in zip(vals, vals[1:]))
    for spec in args.check_deviation or []:
        err, rate, bound = _parse_check(spec, 3)
        _, dev = harness.fit_rate(rows, err, rate)
        checks[f"deviation:{spec}"] = bool(dev < float(bound))
    for spec in args.check_coarse_constant or []:
        err, rate, factor = _parse_check(spec, 3)
        ratios = [r.errors[err] / getattr(r.rates, rate) for r in rows]
        checks[f"coarse_constant:{spec}"] = all(x <= float(factor) * ratios[0] for x in ratios[1:])
    return checks


def cmd_sweep(args) -> int:
    cfg = harness.load_config(args.config)
    rows = harness.run_sweep(cfg)
    checks = _sweep_checks(args, rows)
    text = harness.rows_to_csv(rows, args.csv or cfg.csv_path)
    if not (args.csv or cfg.csv_path):
        sys.stdout.write(text)
    json_path = args.json or cfg.json_path
    if json_path:
        Path(json_path).write_text(_dump(harness.summary(cfg, rows, checks, args.timings)) + "\n")
    if args.plot_data:
        harness.write_plot_data(rows, args.plot_data)
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}", file=sys.stderr)
    return 0 if all(checks.values()) else 1


def cmd_fit(args) -> int:
    with open(args.csv) as fh:
        rows = [{k: (float(v) if v != "" else None) for k, v in r.items()} for r in csv.DictReader(fh)]
    C, dev = harness.fit_rate(rows, args.error, args.rate)
    print(_dump({"error": args.error, "rate": args.rate, "C": C, "deviation": dev}))
    if args.max_deviation is not None:
        return 0 if dev < args.max_deviation else 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="perfhom", description="Perforated-domain homogenization checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("regime", help="limits, regime and rates of a parameter family")
    _add_params(p)
    p.add_argument("--eps", type=float)
    p.add_argument("--table", action="store_true", help="aligned table instead of JSON")
    p.add_argument("--sweep", help="eps=a:b:k, CSV with one row per eps")
    p.set_defaults(func=cmd_regime)

    p = sub.add_parser("corrector-check", help="closed-form corrector identities on a parameter grid")
    p.add_argument("--samples", type=int, default=32)
    p.set_defaults(func=cmd_corrector_check)

    p = sub.add_parser("abstract-check", help="resolvent and spectral bounds on random matrices")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--max-dim", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--coupling", type=float, default=0.01)
    p.set_defaults(func=cmd_abstract_check)

    p = sub.add_parser("solve", help="solve both problems at one eps")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--write-mesh", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="eps sweep with error and rate columns")
    p.add_argument("--config", required=True)
    p.add_argument("--csv")
    p.add_argument("--json")
    p.add_argument("--plot-data", metavar="DIR", help="write two-column files for gnuplot")
    p.add_argument("--timings", action="store_true", help="include wall times in the JSON summary")
    p.add_argument("--check-decreasing", action="append", metavar="ERROR")
    p.add_argument("--check-deviation", action="append", metavar="ERROR:RATE:BOUND")
    p.add_argument("--check-coarse-constant", action="append", metavar="ERROR:RATE:FACTOR")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit C and the ratio deviation from a sweep CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--error", required=True)
    p.add_argument("--rate", required=True)
    p.add_argument("--max-deviation", type=float)
    p.set_defaults(func=cmd_fit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ContractError, DomainError, GeometryError, harness.SweepError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
