"""Harness entry point: `sasim-harness sweep` and `sasim-harness plot`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FAMILIES, plot
from .runner import MissingSimulatorError, sweep
from .sweep import SweepSpec, Workload


def _parse_grid(pairs: list[str]) -> dict:
    grid: dict[str, list] = {}
    for pair in pairs:
        if "=" not in pair:
            raise SystemExit(f"error: grid entries look like key=v1,v2 (got {pair!r})")
        key, values = pair.split("=", 1)
        parsed = []
        for v in values.split(","):
            if "x" in v and key == "array":
                rows, cols = v.split("x")
                parsed.append((int(rows), int(cols)))
            else:
                parsed.append(v if not v.isdigit() else int(v))
        grid[key] = parsed
    return grid


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sasim-harness")
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="run the simulator across a parameter grid")
    sw.add_argument("--config", required=True)
    sw.add_argument("--topology", action="append", required=True,
                    help="name=path, repeatable")
    sw.add_argument("--out", required=True)
    sw.add_argument("--grid", action="append", default=[],
                    help="key=v1,v2 (array takes RxC values)")
    sw.add_argument("--stages", default="compute")
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--jobs", type=int, default=2)

    pl = sub.add_parser("plot", help="regenerate a figure family from an index")
    pl.add_argument("--family", required=True, choices=sorted(FAMILIES) + ["all"])
    pl.add_argument("--index", required=True)
    pl.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    if args.command == "sweep":
        workloads = []
        for item in args.topology:
            name, _, path = item.partition("=")
            workloads.append(Workload(name=name, topology=Path(path or name)))
        spec = SweepSpec(base_config=Path(args.config), out_dir=Path(args.out),
                         workloads=workloads, grid=_parse_grid(args.grid),
                         stages=args.stages, seed=args.seed, jobs=args.jobs)
        try:
            index_path = sweep(spec)
        except MissingSimulatorError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(index_path)
        return 0

    families = sorted(FAMILIES) if args.family == "all" else [args.family]
    status = 0
    for family in families:
        result = plot(family, Path(args.index), Path(args.out))
        for warning in result.warnings:
            print(f"warning: {family}: {warning}", file=sys.stderr)
        if result.path is None:
            print(f"{family}: no figure (no data)", file=sys.stderr)
        else:
            print(result.path)
    return status


if __name__ == "__main__":
    sys.exit(main())
