"""Command-line interface: ``vbflow run | converge | verify | plot | inspect``.

The exit status is 0 only when every invariant asserted by the command held.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

__all__ = ["main", "build_parser"]


def _levels(text: str) -> list:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        value = float(item)
        out.append(int(value) if value == int(value) and "." not in item and "e" not in item.lower() else value)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vbflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a configuration and write ledger, snapshots, report and plots")
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, default=None, help="output directory (default: output.dir)")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("converge", help="convergence study along one axis")
    p.add_argument("config", type=Path)
    p.add_argument("--axis", required=True, choices=("dt", "l_b", "n_v", "N"))
    p.add_argument("--levels", required=True, type=_levels, help="comma-separated values, at least 3")

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--only", type=_levels, default=None, help="comma-separated criterion numbers")

    p = sub.add_parser("plot", help="render SVG plots from a ledger CSV")
    p.add_argument("ledger", type=Path)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("inspect", help="print a snapshot header and field statistics")
    p.add_argument("snapshot", type=Path)
    return parser


def _cmd_run(args) -> int:
    from .config import parse_config
    from .runner import run

    cfg = parse_config(args.config.read_text(encoding="utf-8"))
    result = run(cfg, out_dir=args.out, plots=not args.no_plots)
    rep = result.report
    print(f"status: {rep['status']} after {rep['steps']} steps (t = {rep['final_time']:.6g})")
    if rep["failure"]:
        print(f"failure at step {rep['failed_step']}: {rep['failure']}")
    print(f"max budget residual: {rep['budget']['max_residual']:.3e} (E_total(0) = {rep['budget']['initial_energy']:.6g})")
    for name, ok in rep["invariants"].items():
        print(f"  {name:32s} {'ok' if ok else 'VIOLATED'}")
    print(f"outputs in {result.out_dir}")
    return 0 if result.ok else 1


def _cmd_converge(args) -> int:
    from .config import parse_config
    from .runner import convergence_study

    cfg = parse_config(args.config.read_text(encoding="utf-8"))
    table = convergence_study(cfg, args.axis, args.levels)
    print(table.format())
    return 0 if table.ok else 1


def _cmd_verify(args) -> int:
    from .verification import run_all

    results = run_all(args.only, echo=print)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    return 0 if not failed else 1


def _cmd_plot(args) -> int:
    from .plotting import emit_plots

    for path in emit_plots(args.ledger, args.out):
        print(path)
    return 0


def _cmd_inspect(args) -> int:
    from .snapshot import read_snapshot

    state, header = read_snapshot(args.snapshot.read_bytes())
    for key, value in header.items():
        print(f"{key} = {value}")
    for name, comp in (("vx", state.v.x), ("vy", state.v.y), ("b", state.b)):
        vals = comp.values
        print(f"{name}: min {np.min(vals):.17g} max {np.max(vals):.17g} mean {np.mean(vals):.17g}")
    print(f"max |div v| = {state.v.max_divergence():.3e}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "converge": _cmd_converge, "verify": _cmd_verify,
                "plot": _cmd_plot, "inspect": _cmd_inspect}
    from .config import ConfigError
    from .plotting import LedgerFormatError
    from .snapshot import SnapshotError

    try:
        return handlers[args.command](args)
    except (ConfigError, SnapshotError, LedgerFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
