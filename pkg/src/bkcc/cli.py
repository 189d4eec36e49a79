"""Command-line interface: ``bkcc {rev,cc,table,asymptotic,verify}``.

Floats are written with 17 significant digits so that output files round-trip
exactly. Exit codes: 0 success, 1 verification failure, 2 usage error,
3 quadrature non-convergence, 4 uncertified search, 5 search ceiling reached.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .cc import (CCCeilingError, CCQuery, cc_asymptotic, cc_exact, cc_sl_asymptotic,
                 cc_sl_exact)
from .dist import Example11Curve, TruncatedGPD, load_curve_csv
from .oracle import McConfig, mc_rev_opt, mc_rev_vcg
from .orderstat import DEFAULT_QUADRATURE, QuadratureConfig, QuadratureError
from .revenue import rev_opt, rev_sl_vcg, rev_vcg

__all__ = ["RunConfig", "main", "build_parser"]

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_QUADRATURE, EXIT_UNCERTIFIED, EXIT_CEILING = range(6)
TABLE_DOCUMENTED_MAX = 593


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    threads: int
    output: Optional[Path]
    format: str
    quadrature: QuadratureConfig
    seed: int

    def __post_init__(self):
        if self.format not in ("csv", "json"):
            raise UsageError(f"format must be csv or json, got {self.format!r}")


def _fmt(x: Any) -> str:
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, float):
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(x, int):
        return str(x)
    return json.dumps(x)


def to_json(obj: Any) -> str:
    """JSON with every float printed to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    return _fmt(obj)


def _csv_cell(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    if isinstance(x, (list, tuple, dict)):
        return to_json(x)
    return str(x)


def to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(rows[0]))
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row.values()])
    return buf.getvalue()


def _render(rows: Sequence[dict], fmt: str) -> str:
    if fmt == "csv":
        return to_csv(rows)
    body = to_json(rows[0]) if len(rows) == 1 else "[" + ",\n ".join(to_json(r) for r in rows) + "]"
    return body + "\n"


def _write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(run: RunConfig, text: str) -> None:
    if run.output is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        _write_atomic(run.output, text)


def _threads(value: Optional[int]) -> int:
    if value is None:
        env = os.environ.get("CC_THREADS")
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"CC_THREADS must be an integer, got {env!r}")
    if value < 0:
        raise UsageError("thread count must be non-negative")
    return value or (os.cpu_count() or 1)


def _run_config(args, default_format: str = "json") -> RunConfig:
    q = DEFAULT_QUADRATURE
    try:
        quad = QuadratureConfig(
            abs_tol=q.abs_tol if args.abs_tol is None else args.abs_tol,
            rel_tol=q.rel_tol if args.rel_tol is None else args.rel_tol,
            max_depth=q.max_depth if args.max_depth is None else args.max_depth,
        )
    except ValueError as exc:
        raise UsageError(str(exc))
    return RunConfig(_threads(args.threads), args.output, args.format or default_format, quad, args.seed)


# ---------------------------------------------------------------- commands


def cmd_rev(args) -> int:
    run = _run_config(args)
    if args.seed < 0:
        raise UsageError("seed must be non-negative")
    sources = sum([args.curve is not None, args.example11, args.r is not None])
    if sources != 1:
        raise UsageError("give exactly one of --lambda/--r, --curve or --example11")
    if args.n is None:
        raise UsageError("--n is required")
    m = args.n if args.m is None else args.m
    n, k = args.n, args.k
    try:
        if args.example11:
            d = Example11Curve(n)
        elif args.curve is not None:
            d = load_curve_csv(args.curve)
        else:
            if args.lam is None:
                raise UsageError("--r needs --lambda")
            d = TruncatedGPD(args.lam, args.r)
        if not 1 <= m <= n or k < 0:
            raise ValueError("need 1 <= m <= n and k >= 0")
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc))
    N = n + k
    row: dict[str, Any] = {"m": m, "n": n, "k": k}
    row["rev_vcg"] = rev_vcg(d, m, N, run.quadrature)
    row["rev_opt"] = rev_opt(d, m, n, run.quadrature)
    if args.s is not None:
        if not 1 <= args.s <= min(m, N - 1):
            raise UsageError("--s must lie in [1, min(m, n + k - 1)]")
        row["s"] = args.s
        row["rev_sl_vcg"] = rev_sl_vcg(d, args.s, N, run.quadrature)
    if args.mc_trials:
        mc = McConfig(args.mc_trials, args.seed, threads=run.threads)
        v = mc_rev_vcg(d, m, N, mc)
        o = mc_rev_opt(d, m, n, cfg=mc)
        row.update(mc_rev_vcg=v.mean, mc_rev_vcg_stderr=v.stderr,
                   mc_rev_opt=o.mean, mc_rev_opt_stderr=o.stderr, mc_trials=v.trials)
    _emit(run, _render([row], run.format))
    return EXIT_OK


def _query(args, lam: float, m: int, n: int) -> CCQuery:
    try:
        return CCQuery(lam, m, n, args.gamma, "SL-VCG" if args.sl else "VCG",
                       grid_points=args.grid, r_cap=args.rcap, budget=args.budget,
                       use_analytic=not args.no_analytic)
    except ValueError as exc:
        raise UsageError(str(exc))


def cmd_cc(args) -> int:
    run = _run_config(args)
    m = args.n if args.m is None else args.m
    q = _query(args, args.lam, m, args.n)
    try:
        res = cc_sl_exact(q) if args.sl else cc_exact(q)
    except CCCeilingError as exc:
        print(f"bkcc: {exc}", file=sys.stderr)
        return EXIT_CEILING
    row = {"lambda": q.lam, "m": q.m, "n": q.n, "gamma": q.gamma, "mechanism": q.mechanism,
           **res.as_dict()}
    _emit(run, _render([row], run.format))
    if not res.certified:
        print("bkcc: result is not certified", file=sys.stderr)
        return EXIT_UNCERTIFIED
    return EXIT_OK


def _table_row(n: int) -> tuple[int, int, bool]:
    res = cc_exact(CCQuery(0.0, n, n, 1.0))
    return n, res.k, res.certified


def cmd_table(args) -> int:
    run = _run_config(args, default_format="csv")
    if args.n_max < 1:
        raise UsageError("--n-max must be at least 1")
    if args.n_max > TABLE_DOCUMENTED_MAX:
        warnings.warn(f"n-max {args.n_max} exceeds {TABLE_DOCUMENTED_MAX}; runtime grows with n",
                      RuntimeWarning, stacklevel=1)
    ns = range(1, args.n_max + 1)
    try:
        if run.threads > 1 and len(ns) > 1:
            # largest rows first so the pool stays busy; output order is by n regardless
            with ProcessPoolExecutor(run.threads) as pool:
                got = dict((n, (k, ok)) for n, k, ok in pool.map(_table_row, sorted(ns, reverse=True)))
        else:
            got = {n: (k, ok) for n, k, ok in map(_table_row, ns)}
    except CCCeilingError as exc:
        print(f"bkcc: {exc}", file=sys.stderr)
        return EXIT_CEILING
    bad = [n for n in ns if not got[n][1]]
    if bad:
        print(f"bkcc: rows not certified: {bad}", file=sys.stderr)
        return EXIT_UNCERTIFIED
    if run.format == "csv":
        text = "n,t_n\n" + "".join(f"{n},{got[n][0]}\n" for n in ns)
    else:
        text = _render([{"n": n, "t_n": got[n][0]} for n in ns], "json")
    _emit(run, text)
    return EXIT_OK


def _frange(lo: float, hi: float, step: float) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)) or step <= 0 or hi < lo:
        raise UsageError("sweep needs finite --from <= --to and --step > 0")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    if count > 1_000_000:
        raise UsageError("sweep has more than a million points")
    return [lo + i * step for i in range(count)]


def cmd_asymptotic(args) -> int:
    run = _run_config(args, default_format="json" if args.sweep is None else "csv")
    f = cc_sl_asymptotic if args.sl else cc_asymptotic
    point = {"lambda": args.lam, "alpha": args.alpha, "gamma": args.gamma}
    try:
        if args.sweep is None:
            if None in point.values():
                raise UsageError("--lambda, --alpha and --gamma are required")
            row = {**point, "sl": args.sl, "cc_infty": f(args.lam, args.alpha, args.gamma)}
            _emit(run, _render([row], run.format))
            return EXIT_OK
        if None in (args.from_, args.to, args.step):
            raise UsageError("--sweep needs --from, --to and --step")
        fixed = {k: v for k, v in point.items() if k != args.sweep}
        if None in fixed.values():
            raise UsageError(f"sweeping {args.sweep} still needs the other two parameters")
        names = {"lambda": "lam", "alpha": "alpha", "gamma": "gamma"}
        kwargs = {names[k]: v for k, v in point.items()}
        rows = [{"x": x, "cc_infty": f(**{**kwargs, names[args.sweep]: x})}
                for x in _frange(args.from_, args.to, args.step)]
    except ValueError as exc:
        raise UsageError(str(exc))
    _emit(run, _render(rows, run.format))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_suite

    # without --format json the report is the per-criterion lines themselves
    run = _run_config(args, default_format="csv")
    echo = (lambda line: print(line, file=sys.stderr)) if run.format == "json" else print
    results = run_suite(args.suite, workers=run.threads, echo=echo, seed=args.seed)
    ok = all(r.passed for r in results)
    if run.format == "json":
        report = {"suite": args.suite, "passed": ok, "criteria": [r.as_dict() for r in results]}
        _emit(run, to_json(report) + "\n")
    else:
        print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return EXIT_OK if ok else EXIT_VERIFY


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker count, 0 = all cores (default: $CC_THREADS or 1)")
    common.add_argument("-o", "--output", type=Path, default=None, help="write to this file")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--abs-tol", type=float, default=None, help="quadrature absolute tolerance")
    common.add_argument("--rel-tol", type=float, default=None, help="quadrature relative tolerance")
    common.add_argument("--max-depth", type=int, default=None, help="quadrature bisection depth")
    common.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")

    p = argparse.ArgumentParser(prog="bkcc", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    rev = sub.add_parser("rev", parents=[common], help="expected revenue of VCG and the optimal auction")
    rev.add_argument("--lambda", dest="lam", type=float)
    rev.add_argument("--r", type=float, help="truncation point of TGPD(lambda, r)")
    rev.add_argument("--curve", type=Path, help="piecewise-linear revenue curve CSV (q,R)")
    rev.add_argument("--example11", action="store_true", help="regular lower-bound instance for n buyers")
    rev.add_argument("--m", type=int, help="units (default n)")
    rev.add_argument("--n", type=int)
    rev.add_argument("--k", type=int, default=0, help="extra buyers for VCG")
    rev.add_argument("--s", type=int, help="supply for supply-limited VCG")
    rev.add_argument("--mc-trials", type=int, default=0, help="also run the Monte Carlo oracle")
    rev.set_defaults(func=cmd_rev)

    c = sub.add_parser("cc", parents=[common], help="exact competition complexity")
    c.add_argument("--lambda", dest="lam", type=float, required=True)
    c.add_argument("--m", type=int, help="units (default n)")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--gamma", type=float, default=1.0)
    c.add_argument("--sl", action="store_true", help="supply-limited VCG")
    c.add_argument("--grid", type=int, default=172, help="initial grid points")
    c.add_argument("--rcap", type=float, default=1000.0, help="largest r searched when lambda = 1")
    c.add_argument("--budget", type=int, default=100_000, help="margin evaluations per k")
    c.add_argument("--no-analytic", action="store_true", help="search numerically at lambda = 1, gamma = 1")
    c.set_defaults(func=cmd_cc)

    t = sub.add_parser("table", parents=[common], help="balanced MHR competition complexity for n = 1..n-max")
    t.add_argument("--n-max", type=int, required=True)
    t.set_defaults(func=cmd_table)

    a = sub.add_parser("asymptotic", parents=[common], help="limit of CC / n with m = alpha n")
    a.add_argument("--lambda", dest="lam", type=float)
    a.add_argument("--alpha", type=float)
    a.add_argument("--gamma", type=float)
    a.add_argument("--sl", action="store_true")
    a.add_argument("--sweep", choices=("lambda", "alpha", "gamma"))
    a.add_argument("--from", dest="from_", type=float)
    a.add_argument("--to", type=float)
    a.add_argument("--step", type=float)
    a.set_defaults(func=cmd_asymptotic)

    v = sub.add_parser("verify", parents=[common], help="run the bundled acceptance suite")
    v.add_argument("--suite", choices=("fast", "full"), default="fast")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bkcc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QuadratureError as exc:
        print(f"bkcc: quadrature did not converge: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE


if __name__ == "__main__":
    sys.exit(main())
