"""CSV report writers and the run manifest.

Formatting rules: integers are written bare, ratios/fractions with six
decimals, so that identical runs produce byte-identical reports.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .energy import ActionCounts, EnergyReport
from .layout import LayoutReport
from .memory import StallReport
from .multicore import SweepResult
from .systolic import BUBBLE, ComputeReport, DemandTrace


def fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def compute_report_rows(entries: list[tuple[str, tuple[int, int, int], str, ComputeReport]]):
    for name, (m, n, k), dataflow, rep in entries:
        yield (name, m, n, k, dataflow, rep.total_compute_cycles, rep.utilization,
               rep.ifmap_sram_reads, rep.filter_sram_reads, rep.ofmap_sram_writes)


COMPUTE_HEADER = ["Layer", "M", "N", "K", "Dataflow", "ComputeCycles", "Utilization",
                  "IfmapSramReads", "FilterSramReads", "OfmapSramWrites"]

BANDWIDTH_HEADER = ["Layer", "AvgIfmapBw", "MaxIfmapBw", "AvgFilterBw",
                    "MaxFilterBw", "AvgOfmapBw", "MaxOfmapBw"]


def bandwidth_report_rows(entries: list[tuple[str, ComputeReport]]):
    for name, rep in entries:
        yield (name,
               rep.avg_bandwidth["ifmap"], rep.max_bandwidth["ifmap"],
               rep.avg_bandwidth["filter"], rep.max_bandwidth["filter"],
               rep.avg_bandwidth["ofmap"], rep.max_bandwidth["ofmap"])


STALL_HEADER = ["Layer", "ComputeCycles", "StallCycles", "TotalCycles", "StallFraction"]


def stall_report_rows(entries: list[tuple[str, StallReport]]):
    for name, rep in entries:
        yield (name, rep.compute_cycles, rep.stall_cycles, rep.total_cycles,
               rep.stall_fraction)


SPARSE_HEADER = ["Layer", "Representation", "OriginalStorageBytes",
                 "CompressedValueBytes", "MetadataBytes", "NewStorageBytes"]


LAYOUT_HEADER = ["Layer", "Dataflow", "Banks", "BandwidthPerBank", "Slowdown"]


def layout_report_rows(entries: list[tuple[str, str, int, int, LayoutReport]]):
    for name, dataflow, banks, bw, rep in entries:
        yield (name, dataflow, banks, bw, rep.slowdown)


ENERGY_HEADER = ["Layer", "Component", "Action", "Count", "Energy_pJ"]


def energy_report_rows(entries: list[tuple[str, ActionCounts, EnergyReport]], table):
    """Per-(component, action) rows plus a totals row per layer."""
    for name, counts, report in entries:
        for component, action, count in counts.items():
            yield (name, component, action, count,
                   count * table.energy_of(component, action))
        yield (name, "total", "all", 0, report.total_pj)


SWEEP_HEADER = ["scheme", "Pr", "Pc", "cycles", "l2_input_words", "l2_weight_words"]


def write_sweep_csv(path: Path, result: SweepResult) -> None:
    lines = [
        f"# compute_optimal = {result.compute_optimal.scheme.value},"
        f"{result.compute_optimal.pr},{result.compute_optimal.pc}",
        f"# footprint_optimal = {result.footprint_optimal.scheme.value},"
        f"{result.footprint_optimal.pr},{result.footprint_optimal.pc}",
        ",".join(SWEEP_HEADER),
    ]
    for row in result.rows:
        lines.append(
            f"{row.scheme.value},{row.pr},{row.pc},{row.cycles},"
            f"{row.footprint.input_l2_words},{row.footprint.weight_l2_words}"
        )
    path.write_text("\n".join(lines) + "\n")


def write_trace_csv(path: Path, trace: DemandTrace, operand: str) -> None:
    width = trace.widths[operand]
    lines = ["cycle," + ",".join(f"addr_{i}" for i in range(width))]
    for block in trace.blocks():
        mat = block.operand(operand)
        for offset, row in enumerate(mat):
            cells = ["" if v == BUBBLE else str(int(v)) for v in row]
            lines.append(f"{block.start_cycle + offset}," + ",".join(cells))
    path.write_text("\n".join(lines) + "\n")


@dataclass
class RunManifest:
    config_path: str
    topology_path: str
    output_dir: str
    stages: list[str]
    seed: int
    tool_version: str
    wall_clock_s: float
    files: dict[str, str] = field(default_factory=dict)  # name -> sha256

    def record(self, path: Path) -> None:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.files[path.name] = digest

    def write(self, path: Path) -> None:
        payload = {
            "config": self.config_path,
            "topology": self.topology_path,
            "output_dir": self.output_dir,
            "stages": self.stages,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "wall_clock_s": round(self.wall_clock_s, 3),
            "files": dict(sorted(self.files.items())),
        }
        path.write_text(json.dumps(payload, indent=2) + "\n")
