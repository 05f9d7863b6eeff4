"""Command-line front end.

    robustreg run <config.yaml>
    robustreg demo {example21,indistinguishable,decomposition} [flags]
    robustreg plot <results.csv> <out.svg> [flags]

Global flags ``--threads N`` and ``--seed-override N`` are accepted before
or after the subcommand.  Exit codes: 0 success, 1 runtime failure,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import replace

from . import backend
from .config import ConfigError, load
from .evaluation import demo_decomposition, demo_example_2_1, demo_indistinguishable
from .runner import SchemaError, read_csv, result_rows, run_grid, summary_table, write_csv
from .svgplot import plot_csv_rows

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
DEMOS = ("example21", "indistinguishable", "decomposition")


def _err(msg):
    print(f"robustreg: {msg}", file=sys.stderr)


def _kv(report: dict) -> None:
    for key, value in report.items():
        if isinstance(value, (list, tuple, dict)):
            continue
        if isinstance(value, float):
            value = "%.17g" % value
        print(f"{key}={value}")


def cmd_run(args) -> int:
    try:
        config = load(args.config)
    except ConfigError as exc:
        _err(f"{args.config}: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _err(f"cannot read config: {exc}")
        return EXIT_USAGE
    if args.seed_override is not None:
        config = replace(config, base_seed=args.seed_override)
    out = config.output_path
    if not os.path.isabs(out):
        out = os.path.join(os.path.dirname(os.path.abspath(args.config)), out)
    try:
        t0 = time.perf_counter()
        cells, points = run_grid(config, args.threads)
        write_csv(out, result_rows(cells, points, config.record_wall_time))
    except Exception as exc:  # any failure inside the grid is a runtime error
        _err(f"run failed: {type(exc).__name__}: {exc}")
        return EXIT_RUNTIME
    print(summary_table(points))
    print(f"wrote {len(points)} rows to {out} in {time.perf_counter() - t0:.1f} s "
          f"(backend={backend.NAME})")
    return EXIT_OK


def _demo_example21(args):
    seed0 = args.seed_override if args.seed_override is not None else args.seed
    r = demo_example_2_1(args.C, args.alpha, args.T, range(seed0, seed0 + args.seeds))
    ok = r["l2_distance_to_biased_optimum"] <= 0.5 and r["huber_distance_to_w_star"] <= 0.1
    print(f"least squares mean estimate {r['l2_estimate_mean']:.4f} "
          f"(biased optimum w* + C/2 = {r['predicted_biased_optimum']:.4f})")
    print(f"centered Huber mean estimate {r['huber_estimate_mean']:.4f} (w* = {r['w_star']:.4f})")
    return r, ok


def _demo_indistinguishable(args):
    seed = args.seed_override if args.seed_override is not None else args.seed
    r = demo_indistinguishable(args.T, seed, args.alpha)
    ok = r["tv_distance_empirical"] <= 0.02
    print(f"label support {r['support']}; empirical TV distance between the two models "
          f"{r['tv_distance_empirical']:.5f} at T={args.T}")
    return r, ok


def _demo_decomposition(args):
    seed = args.seed_override if args.seed_override is not None else args.seed
    r = demo_decomposition(n_points=args.points, n_mc=args.n_mc, seed=seed)
    for i, row in enumerate(r["rows"]):
        print(f"point {i:2d}: residual {row['residual']:+.3e}  se {row['se']:.3e}  |z| {row['z']:.2f}")
    print(f"largest |z| {r['max_abs_z']:.2f} (tolerance 4 standard errors)")
    return r, bool(r["passed"])


def cmd_demo(args) -> int:
    handlers = {"example21": _demo_example21, "indistinguishable": _demo_indistinguishable,
                "decomposition": _demo_decomposition}
    if args.name not in handlers:
        _err(f"unknown demo {args.name!r}; choose from {', '.join(DEMOS)}")
        return EXIT_USAGE
    if args.alpha is None:
        args.alpha = 0.5
    if args.T is None:
        args.T = 100_000
    try:
        report, ok = handlers[args.name](args)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    _kv(report)
    print(f"passed={str(ok).lower()}")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_plot(args) -> int:
    try:
        rows = read_csv(args.csv)
    except SchemaError as exc:
        _err(f"{args.csv}: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _err(f"cannot read csv: {exc}")
        return EXIT_USAGE
    except ValueError as exc:
        _err(f"{args.csv}: malformed row: {exc}")
        return EXIT_USAGE
    if not rows:
        _err(f"{args.csv}: no data rows")
        return EXIT_USAGE
    if args.group_by not in rows[0]:
        _err(f"unknown group-by column {args.group_by!r}")
        return EXIT_USAGE
    vals = [r[args.y] for r in rows]
    if args.logy and not any(v > 0 and math.isfinite(v) for v in vals):
        _err(f"log scale needs positive {args.y} values")
        return EXIT_USAGE
    try:
        paths = plot_csv_rows(rows, args.out, args.y, args.logx, args.logy, args.group_by)
    except OSError as exc:
        _err(f"cannot write svg: {exc}")
        return EXIT_RUNTIME
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_positive_int, default=argparse.SUPPRESS,
                        help="worker processes for grid runs (default: CPU count)")
    common.add_argument("--seed-override", type=_seed, default=argparse.SUPPRESS,
                        help="replace the config base seed or the demo seed")

    parser = argparse.ArgumentParser(prog="robustreg", parents=[common],
                                     description="Robust linear regression with centered Huber SGD.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="execute an experiment grid from a YAML config")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)

    p_demo = sub.add_parser("demo", parents=[common], help="run a built-in demonstration")
    p_demo.add_argument("name", help=", ".join(DEMOS))
    p_demo.add_argument("--C", type=float, default=10.0, help="mean corruption (example21)")
    p_demo.add_argument("--alpha", type=float, default=None, help="corruption probability")
    p_demo.add_argument("--T", type=_positive_int, default=None, help="samples per run")
    p_demo.add_argument("--seeds", type=_positive_int, default=15, help="number of seeds (example21)")
    p_demo.add_argument("--seed", type=_seed, default=0, help="first seed")
    p_demo.add_argument("--n-mc", type=_positive_int, default=100_000, help="Monte-Carlo size (decomposition)")
    p_demo.add_argument("--points", type=_positive_int, default=20, help="test points (decomposition)")
    p_demo.set_defaults(func=cmd_demo)

    p_plot = sub.add_parser("plot", parents=[common], help="render results CSV to SVG")
    p_plot.add_argument("csv")
    p_plot.add_argument("out")
    p_plot.add_argument("--y", choices=("est_error", "excess_risk"), default="est_error")
    p_plot.add_argument("--logx", action=argparse.BooleanOptionalAction, default=True)
    p_plot.add_argument("--logy", action=argparse.BooleanOptionalAction, default=True)
    p_plot.add_argument("--group-by", default="algorithm")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.threads = getattr(args, "threads", None)
    args.seed_override = getattr(args, "seed_override", None)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
