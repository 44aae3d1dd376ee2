"""Command-line front end.

Exit codes: 0 Optimal, 2 PrimalInfeasible, 3 DualInfeasible, 4 Unfinished,
5 NumericalFailure, 64 usage error, 65 unreadable or malformed input.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ingest.generators import SiceSpec, build_sice_lp, generate_random_lp
from .ingest.mps import MpsParseError, read_mps, write_mps
from .ipm import SolverConfig, Status
from .pipeline import solve_general
from .presolve import ProvenInfeasible, ProvenUnbounded, dims_report, prepare

__all__ = ["BenchRecord", "BENCH_SCHEMA", "cli_main", "main"]

EXIT_USAGE = 64
EXIT_DATAERR = 65
BENCH_SCHEMA = "abip.bench/1"

log = logging.getLogger("abip")


@dataclass(frozen=True)
class BenchRecord:
    instance: str
    status: str
    objective: float
    pres: float
    dres: float
    dgap: float
    wall_time: float
    admm_steps: int
    outer_iters: int


BENCH_FIELDS = tuple(f.name for f in dataclasses.fields(BenchRecord))


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver options")
    g.add_argument("--config", help="JSON file with SolverConfig fields; flags override it")
    g.add_argument("--tol", type=float, help="set all five tolerances")
    for name in ("pres", "dres", "dgap", "pinfeas", "dinfeas"):
        g.add_argument(f"--eps-{name}", type=float, dest=f"eps_{name}")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta0", type=float)
    g.add_argument("--gamma-min", type=float, dest="gamma_min")
    g.add_argument("--gamma-max", type=float, dest="gamma_max")
    g.add_argument("--max-admm-steps", type=int, dest="max_admm_steps")
    g.add_argument("--max-outer", type=int, dest="max_outer")
    g.add_argument("--no-bb", action="store_true", help="keep the penalty fixed at beta0")
    g.add_argument("--no-presolve", action="store_true")
    g.add_argument("--no-scaling", action="store_true")
    g.add_argument("--linsys", choices=("direct", "cg"))


def _config(args) -> SolverConfig:
    values: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                values.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise _UsageError(f"cannot read config file {args.config}: {exc}") from exc
    if args.tol is not None:
        for name in ("pres", "dres", "dgap", "pinfeas", "dinfeas"):
            values[f"eps_{name}"] = args.tol
    for name in ("eps_pres", "eps_dres", "eps_dgap", "eps_pinfeas", "eps_dinfeas", "alpha", "beta0",
                 "gamma_min", "gamma_max", "max_admm_steps", "max_outer", "linsys"):
        val = getattr(args, name, None)
        if val is not None:
            values[name] = val
    if args.no_bb:
        values["bb_enabled"] = False
    known = {f.name for f in dataclasses.fields(SolverConfig)}
    unknown = set(values) - known
    if unknown:
        raise _UsageError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        return SolverConfig(**values)
    except (TypeError, ValueError) as exc:
        raise _UsageError(str(exc)) from exc


def _finite(x: float):
    return x if isinstance(x, (int, float)) and math.isfinite(x) else None


def _solve_record(path: str, cfg: SolverConfig, use_presolve: bool, use_scaling: bool) -> tuple[dict, int]:
    lp = read_mps(path)
    res = solve_general(lp, cfg, use_presolve=use_presolve, use_scaling=use_scaling)
    rep = res.report
    rel = rep.relative_residuals if rep is not None else (math.nan,) * 3
    out = {
        "instance": lp.name or os.path.basename(path),
        "status": res.status.value,
        "objective": _finite(res.objective),
        "pres": _finite(rel[0]),
        "dres": _finite(rel[1]),
        "dgap": _finite(rel[2]),
        "wall_time": res.wall_time,
        "admm_steps": rep.total_admm_steps if rep is not None else 0,
        "outer_iters": rep.outer_iters if rep is not None else 0,
        "bb_updates": rep.bb_updates if rep is not None else 0,
        "message": res.message,
    }
    if res.stack is not None:
        out["presolve"] = {"before": dims_report(lp), "after": dims_report(res.stack.scaling.scaled)}
    if rep is not None and rep.certificate is not None:
        out["certificate"] = rep.certificate.tolist()
    return out, res.status.exit_code


def _bench_one(job):
    path, cfg, use_presolve, use_scaling = job
    try:
        rec, _ = _solve_record(path, cfg, use_presolve, use_scaling)
    except (MpsParseError, OSError) as exc:
        return BenchRecord(os.path.basename(path), f"ParseError: {exc}", math.nan, math.nan, math.nan,
                           math.nan, 0.0, 0, 0)
    nan = math.nan
    return BenchRecord(
        instance=rec["instance"], status=rec["status"],
        objective=rec["objective"] if rec["objective"] is not None else nan,
        pres=rec["pres"] if rec["pres"] is not None else nan,
        dres=rec["dres"] if rec["dres"] is not None else nan,
        dgap=rec["dgap"] if rec["dgap"] is not None else nan,
        wall_time=rec["wall_time"], admm_steps=rec["admm_steps"], outer_iters=rec["outer_iters"],
    )


def _emit_bench(records: list[BenchRecord], fmt: str, out) -> None:
    if fmt == "csv":
        w = csv.writer(out)
        w.writerow(BENCH_FIELDS)
        for r in records:
            w.writerow([getattr(r, f) for f in BENCH_FIELDS])
        return
    rows = [{k: (_finite(v) if isinstance(v, float) else v) for k, v in dataclasses.asdict(r).items()}
            for r in records]
    json.dump({"schema": BENCH_SCHEMA, "fields": list(BENCH_FIELDS), "records": rows}, out, indent=2)
    out.write("\n")


def _write_text(text: str, path: str | None, out) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        out.write(text)


def _write_sidecar(data: dict, args) -> None:
    path = args.sidecar
    if path is None and args.out:
        path = os.path.splitext(args.out)[0] + ".json"
    if path:
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2)
            fh.write("\n")


def _build_parser() -> _Parser:
    p = _Parser(prog="abip", description="ADMM-based interior point LP solver")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("solve", help="solve an MPS file and print a JSON report")
    s.add_argument("file")
    _solver_flags(s)
    s.add_argument("--presolve-report", action="store_true", help="print only the presolve dimensions")

    g = sub.add_parser("gen", help="generate instances as MPS")
    gsub = g.add_subparsers(dest="kind", parser_class=_Parser)
    r = gsub.add_parser("random", help="random LP with a planted optimum")
    r.add_argument("--m", type=int, required=True)
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", "-o")
    r.add_argument("--sidecar", help="JSON file for the planted solution (default: next to --out)")
    c = gsub.add_parser("sice", help="one column of sparse inverse covariance estimation")
    c.add_argument("--cov", required=True, help="dense comma-separated covariance matrix")
    c.add_argument("--col", type=int, required=True, help="1-based column index")
    c.add_argument("--samples", type=float, required=True)
    c.add_argument("--out", "-o")
    c.add_argument("--sidecar", help="JSON file for the instance parameters (default: next to --out)")

    b = sub.add_parser("bench", help="solve every .mps file in a directory")
    b.add_argument("directory")
    _solver_flags(b)
    fmt = b.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")
    b.add_argument("--threads", type=int, default=1)

    pr = sub.add_parser("presolve-report", help="dimensions before and after presolve as JSON")
    pr.add_argument("file")
    return p


def _configure_logging(stream) -> None:
    level = os.environ.get("ABIP_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG, "warning": logging.WARNING}
    log.setLevel(levels.get(level, logging.ERROR))
    for h in [h for h in log.handlers if getattr(h, "_abip", False)]:
        log.removeHandler(h)
    h = logging.StreamHandler(stream)
    h.setFormatter(logging.Formatter("%(message)s"))
    h._abip = True
    log.addHandler(h)


def _presolve_report(path: str, no_presolve: bool = False, no_scaling: bool = False) -> dict:
    lp = read_mps(path)
    prep = prepare(lp, use_presolve=not no_presolve, use_scaling=not no_scaling)
    report = {"instance": lp.name or os.path.basename(path), "before": dims_report(lp)}
    if isinstance(prep, (ProvenInfeasible, ProvenUnbounded)):
        report["verdict"] = type(prep).__name__
        report["reason"] = prep.reason
        return report
    st = prep.stack
    report["after_reductions"] = dims_report(st.reduced)
    report["after"] = dims_report(prep.lp)
    report["reductions"] = {k: st.kinds.count(k) for k in dict.fromkeys(st.kinds)}
    return report


def cli_main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    _configure_logging(stderr)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required")
        if args.command == "solve":
            cfg = _config(args)
            if args.presolve_report:
                rep = _presolve_report(args.file, args.no_presolve, args.no_scaling)
                json.dump(rep, stdout, indent=2)
                stdout.write("\n")
                return 0
            rec, code = _solve_record(args.file, cfg, not args.no_presolve, not args.no_scaling)
            json.dump(rec, stdout, indent=2)
            stdout.write("\n")
            return code
        if args.command == "presolve-report":
            json.dump(_presolve_report(args.file), stdout, indent=2)
            stdout.write("\n")
            return 0
        if args.command == "gen":
            if args.kind == "random":
                try:
                    planted = generate_random_lp(args.m, args.n, args.seed)
                except ValueError as exc:
                    raise _UsageError(str(exc)) from exc
                head = f"* planted objective {planted.objective!r}\n"
                _write_text(head + write_mps(planted.lp), args.out, stdout)
                _write_sidecar({"m": args.m, "n": args.n, "seed": args.seed, "objective": planted.objective,
                                "x": planted.x.tolist(), "y": planted.y.tolist(), "s": planted.s.tolist()}, args)
                return 0
            if args.kind == "sice":
                try:
                    sigma = np.loadtxt(args.cov, delimiter=",", ndmin=2)
                except (OSError, ValueError) as exc:
                    print(f"abip: cannot read covariance {args.cov}: {exc}", file=stderr)
                    return EXIT_DATAERR
                try:
                    spec = SiceSpec(sigma, args.samples, args.col)
                except ValueError as exc:
                    print(f"abip: {exc}", file=stderr)
                    return EXIT_DATAERR
                head = f"* lambda {spec.lam!r}\n"
                _write_text(head + write_mps(build_sice_lp(spec)), args.out, stdout)
                _write_sidecar({"column": spec.column, "samples": spec.samples, "d": spec.d, "lambda": spec.lam}, args)
                return 0
            raise _UsageError("gen needs 'random' or 'sice'")
        if args.command == "bench":
            cfg = _config(args)
            if args.threads < 1:
                raise _UsageError("--threads must be at least 1")
            if not os.path.isdir(args.directory):
                raise _UsageError(f"{args.directory} is not a directory")
            files = sorted(f for f in os.listdir(args.directory) if f.lower().endswith(".mps"))
            jobs = [(os.path.join(args.directory, f), cfg, not args.no_presolve, not args.no_scaling) for f in files]
            if args.threads == 1:
                records = [_bench_one(j) for j in jobs]
            else:
                with ProcessPoolExecutor(max_workers=args.threads) as pool:
                    records = list(pool.map(_bench_one, jobs))
            _emit_bench(records, args.fmt or "json", stdout)
            return 0
    except _UsageError as exc:
        print(f"abip: {exc}", file=stderr)
        parser.print_usage(stderr)
        return EXIT_USAGE
    except MpsParseError as exc:
        print(f"abip: parse error: {exc}", file=stderr)
        return EXIT_DATAERR
    except OSError as exc:
        print(f"abip: {exc}", file=stderr)
        return EXIT_DATAERR
    return EXIT_USAGE


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
