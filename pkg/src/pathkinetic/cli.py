"""Command-line runner: ``pathkinetic run`` and ``pathkinetic table``."""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import os
import sys
import traceback
from pathlib import Path

from . import config as cfgmod
from . import mfg
from .diagnostics.certificates import holder_bound, holder_estimate, moment_certificate, certify
from .errors import KineticError
from .fixpoint import (
    CONVERGED,
    SolveReport,
    default_dictionary,
    solve_adapted,
    solve_anticipating,
    solve_global_pathindep,
    solve_local,
    solve_mfg,
)
from .generators import ebdd_probe
from .measures import MeasurePath, coarsen
from .propagators import BackendKind

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2
EXIT_CERTIFICATE = 3

OUT_ENV = "PATHKIN_OUT"
DEFAULT_OUT = "pathkin_runs"


def run_scenario(cfg: dict, seed: int | None = None) -> SolveReport:
    """Solve a normalized scenario and attach the requested extra certificates."""
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg["backend"]["seed"] = seed
    backend = cfgmod.build_backend(cfg)
    mu = cfgmod.build_initial(cfg)
    s, d = cfg["solver"], cfg["diagnostics"]
    name = s["name"]
    wanted = d["certificates"]
    solver_certs = cfgmod.SOLVER_CERTIFICATES[name]
    chosen = solver_certs if wanted is None else tuple(c for c in solver_certs if c in wanted)
    common = dict(seed=s["probe_seed"], residual_bound=s["residual_bound"])
    if s["max_iter"] is not None:
        common["max_iter"] = s["max_iter"]

    if name == "solve_mfg":
        g = cfg["game"]
        game = mfg.QuadraticCostGame(g["base01"], g["base10"], g["u_max"], tuple(g["running"]),
                                     tuple(g["terminal"]), g["crowd"], g["running_crowd"])
        kw = dict(seed=s["probe_seed"], residual_bound=s["residual_bound"])
        if s["max_iter"] is not None:
            kw["max_iter"] = s["max_iter"]
        report = solve_mfg(mfg.forward_generator(game), mfg.control_builder(game, backend.h_in), mu, backend,
                           s["T"], s["tol"], s["h"], beta=1.0 if s["beta"] is None else s["beta"], **kw)
        gen = None
    else:
        gen = cfgmod.build_generator(cfg)
        dictionary = default_dictionary(gen, d["dictionary_size"], d["dictionary_seed"], backend.states,
                                        d["dictionary_class"])
        common.update(dictionary=dictionary, probe_trials=s["probe_trials"])
        args = (gen, mu, backend, s["T"], s["tol"], s["h"])
        if name == "solve_local":
            report = solve_local(*args, certificates=bool(chosen), **common)
        elif name == "solve_global_pathindep":
            report = solve_global_pathindep(*args, certificates=chosen, safety=s["safety"],
                                            perturbations=s["perturbations"], **common)
        elif name == "solve_adapted":
            report = solve_adapted(*args, certificates=chosen, perturbations=s["perturbations"], **common)
        else:
            kw = {} if s["beta"] is None else {"beta": s["beta"]}
            report = solve_anticipating(*args, certificates=chosen, moment_p=d["moment_p"], **kw, **common)
    if wanted is not None:
        for key in list(report.certificates):
            if key not in wanted:
                del report.certificates[key]

    sol = report.solution
    report.diagnostics["holder_estimate"] = holder_estimate(sol)
    report.extra["terminal_mean"] = float(sol.final.mean()[0])
    extras = set(wanted or ()) & set(cfgmod.EXTRA_CERTIFICATES)
    if extras and gen is not None:
        pts = backend.states if backend.kind == BackendKind.FINITE_STATE else None
        T = sol.T - sol.t0
        if "HOLDER" in extras:
            P = ebdd_probe(gen, 2.0, horizon=sol.T, times=(sol.t0, sol.T), points=pts)
            report.add(certify("HOLDER", report.diagnostics["holder_estimate"], holder_bound(P, T, sol.d),
                               slack=0.1, one_sided=True, context=f"dyadic pairs; P={P:.6g}; boundedness only"))
        if "MOMENT" in extras and "MOMENT" not in report.certificates:
            p = d["moment_p"]
            P = ebdd_probe(gen, p, horizon=sol.T, times=(sol.t0, sol.T), points=pts)
            report.add(moment_certificate(sol, p, P))
    report.extra["config"] = cfg
    return report


def report_dict(report: SolveReport) -> dict:
    data = report.to_dict()
    data["config"] = data["extra"].pop("config")
    return data


def exit_code(report: SolveReport) -> int:
    if report.status != CONVERGED:
        return EXIT_NOT_CONVERGED
    if not report.certified:
        return EXIT_CERTIFICATE
    return EXIT_OK


def _csv_path(sol: MeasurePath, max_atoms: int, particle: bool) -> str:
    if particle:
        sol = MeasurePath(sol.grid, tuple(coarsen(m, max_atoms) for m in sol.measures))
    return sol.to_csv()


def _certificates_csv(report: SolveReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "verdict", "measured", "bound", "slack", "context"])
    for name, c in sorted(report.certificates.items()):
        w.writerow([name, c.verdict, repr(float(c.measured)), repr(float(c.bound)), repr(float(c.slack)), c.context])
    return buf.getvalue()


def write_artifacts(report: SolveReport, cfg: dict, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    o = cfg["output"]
    files = {
        "report": out / o["report"],
        "path_csv": out / o["path_csv"],
        "certificates_csv": out / o["certificates_csv"],
    }
    data = report_dict(report)
    files["report"].write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
    particle = cfg["backend"]["kind"] == "PARTICLE"
    files["path_csv"].write_text(_csv_path(report.solution, o["csv_max_atoms"], particle))
    files["certificates_csv"].write_text(_certificates_csv(report))
    return files


def output_dir(cfg: dict, out: str | None) -> Path:
    if out:
        return Path(out)
    base = os.environ.get(OUT_ENV) or DEFAULT_OUT
    return Path(base) / cfg["scenario"]["name"]


def _where(exc: BaseException) -> str:
    """Package module in which the exception was raised."""
    mod = "pathkinetic"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("pathkinetic"):
            mod = name
    return mod


def _error(exc: BaseException) -> int:
    print(f"error [{_where(exc)}] {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_INVALID


def cmd_run(args) -> int:
    try:
        cfg = cfgmod.load(args.config)
        report = run_scenario(cfg, args.seed)
        if args.seed is not None:
            cfg["backend"]["seed"] = args.seed
        files = write_artifacts(report, cfg, output_dir(cfg, args.out))
    except KineticError as exc:
        return _error(exc)
    code = exit_code(report)
    passed = sum(c.ok for c in report.certificates.values())
    print(f"{cfg['scenario']['name']}: {report.status} after {report.iterations} iterations; "
          f"certificates {passed}/{len(report.certificates)} pass; exit {code}")
    for c in report.certificates.values():
        print(f"  {c.name:<15} {c.verdict:<9} measured={c.measured:.6g} bound={c.bound:.6g}")
    print(f"  report: {files['report']}")
    return code


def flatten(data, prefix: str = "") -> dict:
    """Scalar leaves of a nested report, keyed by dotted path."""
    out = {}
    if isinstance(data, dict):
        for k, v in data.items():
            out.update(flatten(v, f"{prefix}{k}."))
    elif isinstance(data, (str, int, float, bool)) or data is None:
        out[prefix[:-1]] = data
    return out


def lookup(flat: dict, field: str):
    if field in flat:
        return flat[field]
    hits = [k for k in flat if k.endswith("." + field)]
    if len(hits) == 1:
        return flat[hits[0]]
    raise KeyError(field)


def _report_for(path: str) -> tuple[str, dict]:
    p = Path(path)
    if p.suffix == ".json":
        try:
            data = json.loads(p.read_text())
        except (OSError, ValueError) as exc:
            raise cfgmod.ValidationError(f"{p}: cannot read report ({exc})") from None
        if "solution" in data:
            return data.get("config", {}).get("scenario", {}).get("name", p.stem), data
    cfg = cfgmod.load(p)
    return cfg["scenario"]["name"], report_dict(run_scenario(cfg))


def cmd_table(args) -> int:
    rows = []
    try:
        for path in args.configs:
            name, data = _report_for(path)
            flat = flatten(data)
            try:
                rows.append((name, lookup(flat, args.field)))
            except KeyError:
                fields = sorted(k for k in flat if not k.startswith(("solution.path", "config.")))
                print(f"error [cli] unknown field {args.field!r} for {name}; available fields:", file=sys.stderr)
                for f in fields:
                    print(f"  {f}", file=sys.stderr)
                return EXIT_INVALID
    except KineticError as exc:
        return _error(exc)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["scenario", args.field])
    for name, value in rows:
        w.writerow([name, repr(value) if isinstance(value, float) else value])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pathkinetic", description="Fixed-point solvers for path-dependent kinetic equations.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve one scenario and write its report")
    r.add_argument("config", help="scenario TOML, or a JSON report to re-run")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<name> or ./{DEFAULT_OUT}/<name>)")
    r.add_argument("--seed", type=int, help="override backend.seed")
    r.set_defaults(func=cmd_run)
    t = sub.add_parser("table", help="print one report field per scenario as CSV")
    t.add_argument("configs", nargs="+", help="scenario TOMLs or JSON reports")
    t.add_argument("--field", required=True)
    t.set_defaults(func=cmd_table)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
