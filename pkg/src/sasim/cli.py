"""Command-line entry point.

``sasim run`` drives the full pipeline for a config + topology and writes
the CSV reports; ``sasim analytical`` emits the multi-core partition sweep
for one GEMM.  Any stage failure removes partial outputs and exits
nonzero (2 for input problems, 1 for internal errors).
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .config import parse_config
from .errors import SasimError, ValidationError
from .memory import export_trace_csv, import_latencies, interleave_traces
from .multicore import sweep_partitions
from .pipeline import (STAGES, load_energy_table, parse_layout_file, run_layer)
from .reports import (BANDWIDTH_HEADER, COMPUTE_HEADER, ENERGY_HEADER,
                      LAYOUT_HEADER, SPARSE_HEADER, STALL_HEADER, RunManifest,
                      bandwidth_report_rows, compute_report_rows,
                      energy_report_rows, layout_report_rows,
                      stall_report_rows, write_csv, write_sweep_csv,
                      write_trace_csv)
from .sparsity import emit_sparse_report
from .systolic import generate_demand_trace
from .topology import GemmOp, LayerKind, parse_topology


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sasim")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a topology and emit reports")
    run_p.add_argument("--config", required=True, help="config file path")
    run_p.add_argument("--topology", required=True, help="topology CSV path")
    run_p.add_argument("--topology-kind", choices=["conv", "gemm", "auto"],
                       default="auto")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--stages", default="compute",
                       help=f"comma list from {','.join(STAGES)}")
    run_p.add_argument("--dump-traces", action="store_true",
                       help="write per-operand demand traces and memory traces")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for layer simulation")
    run_p.add_argument("--latency-dir",
                       help="directory of '<layer>_latency.csv' files to use "
                            "instead of the internal DRAM model")

    an_p = sub.add_parser("analytical",
                          help="partition sweep for one GEMM (no simulation)")
    an_p.add_argument("--m", type=int, required=True)
    an_p.add_argument("--n", type=int, required=True)
    an_p.add_argument("--k", type=int, required=True)
    an_p.add_argument("--array-rows", type=int, default=8)
    an_p.add_argument("--array-cols", type=int, default=8)
    an_p.add_argument("--cores", type=int, required=True)
    an_p.add_argument("--dataflow", choices=["is", "ws", "os"], default="ws")
    an_p.add_argument("--out", required=True, help="output CSV path")
    return parser


def _detect_kind(path: Path) -> LayerKind:
    with path.open() as fh:
        header = fh.readline()
    return LayerKind.CONV if len([c for c in header.split(",") if c.strip()]) >= 8 \
        else LayerKind.GEMM


_WORKER_STATE: dict = {}


def _worker_init(cfg, stages, seed, overrides, table):
    _WORKER_STATE.update(cfg=cfg, stages=stages, seed=seed,
                         overrides=overrides, table=table)


def _worker_run(item):
    index, layer, latencies = item
    s = _WORKER_STATE
    return run_layer(index, layer, s["cfg"], s["stages"], s["seed"],
                     s["overrides"], s["table"], latencies)


def _cmd_run(args) -> int:
    cfg_path = Path(args.config)
    topo_path = Path(args.topology)
    for path, what in ((cfg_path, "config"), (topo_path, "topology")):
        if not path.is_file():
            print(f"error: {what} file not found: {path}", file=sys.stderr)
            return 2

    stages = {s.strip() for s in args.stages.split(",") if s.strip()}
    unknown = stages - set(STAGES)
    if unknown:
        print(f"error: unknown stages {sorted(unknown)}", file=sys.stderr)
        return 2
    stages.add("compute")

    cfg = parse_config(cfg_path.read_text())
    kind = _detect_kind(topo_path) if args.topology_kind == "auto" \
        else LayerKind(args.topology_kind)
    layers = parse_topology(topo_path.read_text(), kind)

    overrides = None
    if cfg.layout.layout_file:
        overrides = parse_layout_file(Path(cfg.layout.layout_file).read_text())
    table = load_energy_table(cfg) if "energy" in stages else None

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    start = time.time()

    def emit(name: str, writer) -> None:
        path = out_dir / name
        writer(path)
        written.append(path)

    try:
        work = []
        for index, layer in enumerate(layers):
            latencies = None
            if "memory" in stages and args.latency_dir:
                lat_path = Path(args.latency_dir) / f"{layer.name}_latency.csv"
                if not lat_path.is_file():
                    raise ValidationError(f"latency file not found: {lat_path}")
                trace = generate_demand_trace(
                    run_dims(layer, cfg, args.seed, index), cfg)
                reqs = interleave_traces(trace, word_bytes=cfg.word_bytes)
                latencies = import_latencies(lat_path.read_text(), len(reqs))
            work.append((index, layer, latencies))

        if args.jobs > 1:
            with ProcessPoolExecutor(
                    max_workers=args.jobs, initializer=_worker_init,
                    initargs=(cfg, stages, args.seed, overrides, table)) as pool:
                results = list(pool.map(_worker_run, work))
        else:
            _worker_init(cfg, stages, args.seed, overrides, table)
            results = [_worker_run(item) for item in work]
        results.sort(key=lambda r: r.index)

        emit("COMPUTE_REPORT.csv", lambda p: write_csv(
            p, COMPUTE_HEADER, compute_report_rows(
                [(r.name, (r.gemm.m, r.gemm.n, r.gemm.k),
                  cfg.dataflow.value, r.compute) for r in results])))
        emit("BANDWIDTH_REPORT.csv", lambda p: write_csv(
            p, BANDWIDTH_HEADER, bandwidth_report_rows(
                [(r.name, r.compute) for r in results])))
        if "memory" in stages:
            emit("STALL_REPORT.csv", lambda p: write_csv(
                p, STALL_HEADER, stall_report_rows(
                    [(r.name, r.stall) for r in results])))
        if "sparsity" in stages and cfg.sparsity.enabled:
            rows = emit_sparse_report([r.sparse_entry for r in results
                                       if r.sparse_entry is not None])
            emit("SPARSE_REPORT.csv", lambda p: write_csv(
                p, SPARSE_HEADER, ([row[h] for h in SPARSE_HEADER] for row in rows)))
        if "layout" in stages:
            emit("LAYOUT_REPORT.csv", lambda p: write_csv(
                p, LAYOUT_HEADER, layout_report_rows(
                    [(r.name, cfg.dataflow.value, cfg.layout.num_banks,
                      cfg.layout.bandwidth_per_bank, r.layout) for r in results])))
        if "energy" in stages:
            emit("ENERGY_REPORT.csv", lambda p: write_csv(
                p, ENERGY_HEADER, energy_report_rows(
                    [(r.name, r.action_counts, r.energy) for r in results], table)))
            from .energy import export_action_counts
            for r in results:
                emit(f"ACTION_COUNTS_{r.name}.yaml", lambda p, r=r: p.write_text(
                    export_action_counts(r.action_counts)))

        if args.dump_traces:
            for r in results:
                trace = generate_demand_trace(r.dims, cfg)
                for operand in ("ifmap", "filter", "ofmap"):
                    emit(f"TRACE_{r.name}_{operand}.csv",
                         lambda p, t=trace, o=operand: write_trace_csv(p, t, o))
                if "memory" in stages:
                    reqs = interleave_traces(trace, word_bytes=cfg.word_bytes)
                    emit(f"MEM_TRACE_{r.name}.csv",
                         lambda p, q=reqs: p.write_text(export_trace_csv(q)))

        manifest = RunManifest(
            config_path=str(cfg_path), topology_path=str(topo_path),
            output_dir=str(out_dir), stages=sorted(stages), seed=args.seed,
            tool_version=__version__, wall_clock_s=time.time() - start)
        for path in written:
            manifest.record(path)
        manifest.write(out_dir / "manifest.json")
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return 0


def run_dims(layer, cfg, seed, index):
    from .pipeline import mapped_dims_for_layer
    from .sparsity import derive_layer_seed
    _, dims, _ = mapped_dims_for_layer(layer, cfg, derive_layer_seed(seed, index))
    return dims


def _cmd_analytical(args) -> int:
    if args.cores < 1:
        print("error: --cores must be >= 1", file=sys.stderr)
        return 2
    from .config import Dataflow
    op = GemmOp(m=args.m, n=args.n, k=args.k, source_layer="cli")
    result = sweep_partitions(op, args.array_rows, args.array_cols, args.cores,
                              Dataflow(args.dataflow))
    write_sweep_csv(Path(args.out), result)
    best = result.compute_optimal
    print(f"compute optimal: {best.scheme.value} Pr={best.pr} Pc={best.pc} "
          f"cycles={best.cycles}")
    best = result.footprint_optimal
    print(f"footprint optimal: {best.scheme.value} Pr={best.pr} Pc={best.pc} "
          f"l2_words={best.footprint_words}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_analytical(args)
    except SasimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
