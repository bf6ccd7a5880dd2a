"""Command-line interface.

Commands::

    circnet indicators --input net.json [--at T] [--json | --csv]
    circnet trajectory --input net.json [--start A --end B --steps N]
                       [--out traj.csv] [--detect-topology]
    circnet balance    verify|impose --input net.json [--m0 a,b,...]
                       [--steps N] [--tol X] [--out STEM] [--allow-negative]
    circnet stochastic --input net.json --samples N [--seed S] [--at T]
                       [--out report.json]
    circnet cycles     --input net.json [--at T]

Data goes to stdout (or the requested files), diagnostics to stderr.
Exit codes are a stable contract: 0 success (and a Consistent verify),
1 Violated verify, 2 file or parse errors, 3 cycle budget exceeded,
4 validation errors, 5 unwritable output, 6 negative integrated stocks
without --allow-negative.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import netfile
from .cycles import (
    CycleBudgetExceededError,
    build_digraph,
    enumerate_cycles,
)
from .dynamics import (
    TimeGrid,
    detect_topology_changes,
    impose_mass_balance,
    indicator_trajectory,
    verify_mass_balance,
)
from .indicators import NonPositiveFlowError, compute_report, cycle_means
from .model import (
    DEFAULT_EPS_FLOW,
    DEFAULT_MAX_CYCLES,
    ModelError,
    NetworkSpec,
    network_to_matrix,
)
from .netfile import NetworkFileError
from .stochastic import (
    TimeRequiredError,
    UnsupportedDistributionError,
    stochastic_indicators,
)

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_FILE = 2
EXIT_BUDGET = 3
EXIT_VALIDATION = 4
EXIT_OUTPUT = 5
EXIT_NEGATIVE_STOCK = 6


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", required=True, help="network JSON file")
    parser.add_argument(
        "--eps-flow",
        type=float,
        default=DEFAULT_EPS_FLOW,
        help="arc-existence threshold (default %(default)g)",
    )
    parser.add_argument(
        "--max-cycles",
        type=int,
        default=DEFAULT_MAX_CYCLES,
        help="abort if the digraph has more cycles than this (default %(default)d)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="circnet",
        description="Circularity and flow indicators of mass-flow networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("indicators", help="full indicator report at one instant")
    _common_flags(p)
    p.add_argument("--at", type=float, default=0.0, help="evaluation time (default 0)")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="JSON output (default)")
    fmt.add_argument("--csv", action="store_true", help="single-row CSV output")
    p.set_defaults(func=cmd_indicators)

    p = sub.add_parser("trajectory", help="indicator trajectory over a time grid")
    _common_flags(p)
    p.add_argument("--start", type=float, default=None)
    p.add_argument("--end", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.add_argument(
        "--detect-topology",
        action="store_true",
        help="also emit a JSON timeline of arc-set changes (requires --out)",
    )
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("balance", help="verify or impose the mass balance")
    p.add_argument("mode", choices=["verify", "impose"])
    _common_flags(p)
    p.add_argument("--start", type=float, default=None)
    p.add_argument("--end", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-6, help="verify tolerance (kg/s)")
    p.add_argument("--m0", default=None, help="comma-separated initial stocks (impose)")
    p.add_argument("--out", default=None, help="output stem for impose files")
    p.add_argument("--allow-negative", action="store_true")
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("stochastic", help="Monte Carlo indicator report")
    _common_flags(p)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--at", type=float, default=0.0)
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_stochastic)

    p = sub.add_parser("cycles", help="list cycles and the unshared/shared arc sets")
    _common_flags(p)
    p.add_argument("--at", type=float, default=0.0)
    p.set_defaults(func=cmd_cycles)

    return parser


def _load(args) -> NetworkSpec:
    return netfile.load_network(args.input)


def _grid_from(args, spec: NetworkSpec, default_steps: int | None = None) -> TimeGrid:
    window = spec.time_window
    start = args.start if args.start is not None else (window.start if window else None)
    end = args.end if args.end is not None else (window.end if window else None)
    steps = args.steps if args.steps is not None else (
        window.steps if window else default_steps
    )
    if start is None or end is None or steps is None:
        raise NetworkFileError(
            "no time grid: the file has no 'time' block, pass --start/--end/--steps"
        )
    return TimeGrid(start=start, end=end, n_steps=steps)


class _OutputWriteError(Exception):
    pass


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise _OutputWriteError(f"cannot write {path}: {exc}") from exc


def cmd_indicators(args) -> int:
    spec = _load(args)
    gamma = network_to_matrix(spec, args.at)
    report = compute_report(gamma, max_cycles=args.max_cycles, eps_flow=args.eps_flow)
    if args.csv:
        text = netfile.trajectory_csv([(args.at, report)], spec.n_v)
    else:
        obj = {"t": args.at, **netfile.report_to_obj(report)}
        text = netfile.dump_json(obj)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_trajectory(args) -> int:
    spec = _load(args)
    grid = _grid_from(args, spec)
    if args.detect_topology and args.out is None:
        raise NetworkFileError("--detect-topology needs --out for the CSV")
    samples = indicator_trajectory(
        spec, grid, max_cycles=args.max_cycles, eps_flow=args.eps_flow
    )
    csv_text = netfile.trajectory_csv(samples, spec.n_v)
    if args.out is None:
        sys.stdout.write(csv_text)
        return EXIT_OK
    _write_text(args.out, csv_text)
    print(f"wrote {len(samples)} rows to {args.out}", file=sys.stderr)
    if args.detect_topology:
        timeline = detect_topology_changes(spec, grid, eps_flow=args.eps_flow)
        obj = {
            "t_star": [c.t_star for c in timeline.changes],
            "changes": [
                {
                    "t_star": c.t_star,
                    "appeared": [list(a) for a in c.appeared],
                    "vanished": [list(a) for a in c.vanished],
                    "touching": c.touching,
                }
                for c in timeline.changes
            ],
            "intervals": [
                {
                    "start": iv.t_start,
                    "end": iv.t_end,
                    "arcs": [list(a) for a in iv.arcs],
                }
                for iv in timeline.intervals
            ],
        }
        sys.stdout.write(netfile.dump_json(obj))
    return EXIT_OK


def _parse_m0(text: str, n_v: int) -> np.ndarray:
    try:
        values = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise NetworkFileError(f"--m0: {exc}") from exc
    if len(values) != n_v:
        raise NetworkFileError(f"--m0 needs {n_v} comma-separated values")
    return np.asarray(values)


def cmd_balance(args) -> int:
    spec = _load(args)
    if args.mode == "verify":
        grid = _grid_from(args, spec, default_steps=201)
        verdict = verify_mass_balance(spec, grid, tol=args.tol, eps_flow=args.eps_flow)
        obj = {
            "consistent": verdict.consistent,
            "max_residual": verdict.max_residual,
            "worst_vertex": verdict.worst_vertex,
            "worst_time": verdict.worst_time,
            "tol": verdict.tol,
            "grid": {"start": grid.start, "end": grid.end, "steps": grid.n_steps},
        }
        sys.stdout.write(netfile.dump_json(obj))
        return EXIT_OK if verdict.consistent else EXIT_VIOLATED

    if args.m0 is None:
        raise NetworkFileError("impose needs --m0")
    if args.out is None:
        raise NetworkFileError("impose needs --out STEM for its two output files")
    grid = _grid_from(args, spec, default_steps=2001)
    result = impose_mass_balance(
        spec, _parse_m0(args.m0, spec.n_v), grid, eps_flow=args.eps_flow
    )
    if result.negative_stocks and not args.allow_negative:
        for ev in result.negative_stocks:
            print(
                f"stock {ev.vertex} turns negative at t={ev.t:g} ({ev.value:g} kg)",
                file=sys.stderr,
            )
        return EXIT_NEGATIVE_STOCK

    times = grid.times
    lines = [",".join(["t"] + [f"m_{k}" for k in range(1, spec.n_v + 1)])]
    for i, t in enumerate(times):
        fields = [netfile.format_value(float(t))]
        fields += [netfile.format_value(float(v)) for v in result.stocks[i]]
        lines.append(",".join(fields))
    stocks_path = f"{args.out}.stocks.csv"
    network_path = f"{args.out}.network.json"
    _write_text(stocks_path, "\n".join(lines) + "\n")
    _write_text(
        network_path, netfile.dump_json(netfile.network_to_obj(result.corrected, integrated=True))
    )
    summary = {
        "stocks_csv": stocks_path,
        "corrected_network": network_path,
        "negative_stocks": [
            {"vertex": ev.vertex, "t": ev.t, "value": ev.value}
            for ev in result.negative_stocks
        ],
        "total_mass_drift": float(np.abs(result.m_net - result.m_net[0]).max()),
    }
    sys.stdout.write(netfile.dump_json(summary))
    return EXIT_OK


def cmd_stochastic(args) -> int:
    spec = _load(args)
    report = stochastic_indicators(
        spec,
        n_s=args.samples,
        seed=args.seed,
        at_t=args.at,
        max_cycles=args.max_cycles,
        eps_flow=args.eps_flow,
    )
    obj = {
        "n_s": report.n_s,
        "seed": report.seed,
        "t": args.at,
        "mean_matrix": [[float(v) for v in row] for row in report.mean_matrix.values],
        "mean_report": netfile.report_to_obj(report.mean_report),
        "ensemble": {
            name: {
                "mean": stat.mean,
                "std": stat.std,
                "undefined_count": stat.undefined_count,
            }
            for name, stat in report.ensemble.items()
        },
    }
    text = netfile.dump_json(obj)
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write_text(args.out, text)
        print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_cycles(args) -> int:
    spec = _load(args)
    gamma = network_to_matrix(spec, args.at)
    digraph = build_digraph(gamma, eps_flow=args.eps_flow)
    analysis = enumerate_cycles(digraph, max_cycles=args.max_cycles)
    obj = {
        "t": args.at,
        "n_v": spec.n_v,
        "n_cycles": analysis.n_phi,
        "cycles": [
            {
                "vertices": list(c.vertices),
                "length": c.length,
                "weights": list(c.weights),
                "gm": cycle_means(c).gm,
                "hm": cycle_means(c).hm,
                "am": cycle_means(c).am,
            }
            for c in analysis.cycles
        ],
        "q_arcs": [
            {"from": a.tail, "to": a.head, "weight": a.weight} for a in analysis.q_arcs
        ],
        "s_arcs": [
            {"from": a.tail, "to": a.head, "weight": a.weight} for a in analysis.s_arcs
        ],
    }
    sys.stdout.write(netfile.dump_json(obj))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _OutputWriteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except NetworkFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE
    except CycleBudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (
        ModelError,
        NonPositiveFlowError,
        TimeRequiredError,
        UnsupportedDistributionError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
