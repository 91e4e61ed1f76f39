"""Figure families regenerated from sweep CSVs.

Every family is a pure function of the CSV reports referenced by the
index: it extracts its data series, draws one vector graphic, and
returns the series so callers (and tests) can verify that re-running on
unchanged CSVs reproduces identical data.  Failed runs or missing
reports become warnings and leave gaps rather than aborting the figure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


@dataclass
class FigureResult:
    family: str
    series: dict
    path: Optional[Path]
    warnings: list[str] = field(default_factory=list)


def _read_csv(path: Path) -> list[dict]:
    with path.open() as fh:
        return [row for row in csv.DictReader(fh)
                if not row.get("Layer", "").startswith("#")]


def _report(index_path: Path, entry, name: str) -> Optional[Path]:
    for rel in entry.report_paths:
        if Path(rel).name == name:
            return index_path.parent / rel
    return None


def _ok_entries(entries, warnings):
    good = []
    for e in entries:
        if e.ok:
            good.append(e)
        else:
            warnings.append(f"run {e.run_id} failed; leaving a gap")
    return good


# --- families ---------------------------------------------------------------

def tradeoff(index_path: Path, entries) -> tuple[dict, list[str], Callable]:
    """Partition sweep scatter: compute cycles versus L2 footprint."""
    warnings: list[str] = []
    series: dict[str, list] = {}
    for e in _ok_entries(entries, warnings):
        path = _report(index_path, e, "sweep.csv")
        if path is None:
            warnings.append(f"run {e.run_id} lacks sweep.csv")
            continue
        for row in csv.DictReader(
                line for line in path.read_text().splitlines()
                if not line.startswith("#")):
            footprint = int(row["l2_input_words"]) + int(row["l2_weight_words"])
            series.setdefault(row["scheme"], []).append(
                (footprint, int(row["cycles"])))
    for points in series.values():
        points.sort()

    def draw(ax):
        for scheme, points in sorted(series.items()):
            xs, ys = zip(*points)
            ax.scatter(xs, ys, label=scheme, s=18)
        ax.set_xlabel("shared-L2 footprint (words)")
        ax.set_ylabel("compute cycles")
        ax.set_yscale("log")
        ax.legend()
    return series, warnings, draw


def sparsity_cycles(index_path: Path, entries) -> tuple[dict, list[str], Callable]:
    """Stall-inclusive total cycles versus on-chip memory per N:M ratio."""
    warnings: list[str] = []
    series: dict[str, list] = {}
    for e in _ok_entries(entries, warnings):
        path = _report(index_path, e, "STALL_REPORT.csv")
        if path is None:
            warnings.append(f"run {e.run_id} lacks STALL_REPORT.csv")
            continue
        total = sum(int(r["TotalCycles"]) for r in _read_csv(path))
        ratio = e.param("sparsity", "dense")
        series.setdefault(ratio, []).append((int(e.param("sram_kb", "0")), total))
    for points in series.values():
        points.sort()

    def draw(ax):
        for ratio, points in sorted(series.items()):
            xs, ys = zip(*points)
            ax.plot(xs, ys, marker="o", label=ratio)
        ax.set_xlabel("on-chip SRAM per operand (KiB)")
        ax.set_ylabel("total cycles (incl. stalls)")
        ax.legend()
    return series, warnings, draw


def storage(index_path: Path, entries) -> tuple[dict, list[str], Callable]:
    """Stacked compressed-values + metadata bytes per layer and ratio."""
    warnings: list[str] = []
    series: dict[str, dict] = {}
    for e in _ok_entries(entries, warnings):
        path = _report(index_path, e, "SPARSE_REPORT.csv")
        if path is None:
            warnings.append(f"run {e.run_id} lacks SPARSE_REPORT.csv")
            continue
        rows = _read_csv(path)
        ratio = e.param("sparsity", "dense")
        series[ratio] = {
            "layers": [r["Layer"] for r in rows],
            "values": [int(r["CompressedValueBytes"]) for r in rows],
            "metadata": [int(r["MetadataBytes"]) for r in rows],
        }
        series.setdefault("dense", {
            "layers": [r["Layer"] for r in rows],
            "values": [int(r["OriginalStorageBytes"]) for r in rows],
            "metadata": [0 for _ in rows],
        })

    def draw(ax):
        ratios = sorted(series)
        if not ratios:
            return
        layers = series[ratios[0]]["layers"]
        width = 0.8 / len(ratios)
        for pos, ratio in enumerate(ratios):
            xs = [i + pos * width for i in range(len(layers))]
            vals = series[ratio]["values"]
            meta = series[ratio]["metadata"]
            ax.bar(xs, vals, width, label=f"{ratio} values")
            ax.bar(xs, meta, width, bottom=vals, label=f"{ratio} metadata")
        ax.set_xticks(range(len(layers)), layers, rotation=90, fontsize=6)
        ax.set_ylabel("filter storage (bytes)")
        ax.legend(fontsize=6)
    return series, warnings, draw


def blocksize(index_path: Path, entries) -> tuple[dict, list[str], Callable]:
    """Compute cycles versus N:M density for array/block-size variants."""
    warnings: list[str] = []
    series: dict[str, list] = {}
    for e in _ok_entries(entries, warnings):
        path = _report(index_path, e, "COMPUTE_REPORT.csv")
        if path is None:
            warnings.append(f"run {e.run_id} lacks COMPUTE_REPORT.csv")
            continue
        total = sum(int(r["ComputeCycles"]) for r in _read_csv(path))
        n, m = e.param("sparsity", "1:1").split(":")
        density = int(n) / int(m)
        label = f"array {e.param('array')} M={m}"
        series.setdefault(label, []).append((density, total))
    for points in series.values():
        points.sort()

    def draw(ax):
        for label, points in sorted(series.items()):
            xs, ys = zip(*points)
            ax.scatter(xs, ys, label=label, s=20)
        ax.set_xlabel("density N/M")
        ax.set_ylabel("compute cycles")
        ax.legend(fontsize=7)
    return series, warnings, draw


def channels(index_path: Path, entries) -> tuple[dict, list[str], Callable]:
    """Per-layer memory traffic rate versus DRAM channel count."""
    warnings: list[str] = []
    series: dict[str, list] = {}
    for e in _ok_entries(entries, warnings):
        comp = _report(index_path, e, "COMPUTE_REPORT.csv")
        stall = _report(index_path, e, "STALL_REPORT.csv")
        if comp is None or stall is None:
            warnings.append(f"run {e.run_id} lacks memory reports")
            continue
        touches = {r["Layer"]: int(r["IfmapSramReads"]) + int(r["FilterSramReads"])
                   + int(r["OfmapSramWrites"]) for r in _read_csv(comp)}
        ch = int(e.param("channels", "1"))
        for row in _read_csv(stall):
            rate = touches[row["Layer"]] / int(row["TotalCycles"])
            series.setdefault(row["Layer"], []).append((ch, rate))
    for points in series.values():
        points.sort()

    def draw(ax):
        for layer, points in sorted(series.items()):
            xs, ys = zip(*points)
            ax.plot(xs, ys, marker="s", label=layer)
        ax.set_xlabel("DRAM channels")
        ax.set_ylabel("delivered words per cycle")
        ax.set_xscale("log", base=2)
        ax.legend(fontsize=7)
    return series, warnings, draw


def stalls(index_path: Path, entries) -> tuple[dict, list[str], Callable]:
    """Grouped stall-fraction bars per workload, one bar per queue size."""
    warnings: list[str] = []
    series: dict[str, dict] = {}
    for e in _ok_entries(entries, warnings):
        path = _report(index_path, e, "STALL_REPORT.csv")
        if path is None:
            warnings.append(f"run {e.run_id} lacks STALL_REPORT.csv")
            continue
        rows = _read_csv(path)
        stall = sum(int(r["StallCycles"]) for r in rows)
        total = sum(int(r["TotalCycles"]) for r in rows)
        queue = e.param("queue", "?")
        series.setdefault(e.param("workload"), {})[queue] = \
            stall / total if total else 0.0

    def draw(ax):
        workloads = sorted(series)
        queues = sorted({q for d in series.values() for q in d}, key=int)
        width = 0.8 / max(1, len(queues))
        for pos, queue in enumerate(queues):
            xs = [i + pos * width for i in range(len(workloads))]
            ys = [series[w].get(queue, 0.0) for w in workloads]
            ax.bar(xs, ys, width, label=f"queue {queue}")
        ax.set_xticks(range(len(workloads)), workloads, rotation=30, fontsize=7)
        ax.set_ylabel("stall fraction of total cycles")
        ax.legend()
    return series, warnings, draw


def layout(index_path: Path, entries) -> tuple[dict, list[str], Callable]:
    """Layer-averaged slowdown per (bandwidth, banks), one series per dataflow."""
    warnings: list[str] = []
    series: dict[str, dict] = {}
    for e in _ok_entries(entries, warnings):
        path = _report(index_path, e, "LAYOUT_REPORT.csv")
        if path is None:
            warnings.append(f"run {e.run_id} lacks LAYOUT_REPORT.csv")
            continue
        rows = _read_csv(path)
        mean = sum(float(r["Slowdown"]) for r in rows) / len(rows) if rows else 0.0
        group = f"bw{e.param('bandwidth_per_bank', '?')}-banks{e.param('banks', '?')}"
        series.setdefault(e.param("dataflow", "?"), {})[group] = mean

    def draw(ax):
        flows = sorted(series)
        groups = sorted({g for d in series.values() for g in d})
        width = 0.8 / max(1, len(flows))
        for pos, flow in enumerate(flows):
            xs = [i + pos * width for i in range(len(groups))]
            ys = [series[flow].get(g, 0.0) for g in groups]
            ax.bar(xs, ys, width, label=flow)
        ax.set_xticks(range(len(groups)), groups, rotation=30, fontsize=7)
        ax.set_ylabel("slowdown vs ideal bandwidth")
        ax.legend()
    return series, warnings, draw


def energy(index_path: Path, entries) -> tuple[dict, list[str], Callable]:
    """Total energy per workload across array sizes and dataflows."""
    warnings: list[str] = []
    series: dict[str, dict] = {}
    for e in _ok_entries(entries, warnings):
        path = _report(index_path, e, "ENERGY_REPORT.csv")
        if path is None:
            warnings.append(f"run {e.run_id} lacks ENERGY_REPORT.csv")
            continue
        total = sum(float(r["Energy_pJ"]) for r in _read_csv(path)
                    if r["Component"] == "total")
        label = f"{e.param('workload')}@{e.param('array')}"
        series.setdefault(e.param("dataflow", "?"), {})[label] = total

    def draw(ax):
        flows = sorted(series)
        groups = sorted({g for d in series.values() for g in d})
        width = 0.8 / max(1, len(flows))
        for pos, flow in enumerate(flows):
            xs = [i + pos * width for i in range(len(groups))]
            ys = [series[flow].get(g, 0.0) for g in groups]
            ax.bar(xs, ys, width, label=flow)
        ax.set_xticks(range(len(groups)), groups, rotation=30, fontsize=7)
        ax.set_ylabel("total energy (pJ)")
        ax.legend()
    return series, warnings, draw


FAMILIES: dict[str, Callable] = {
    "tradeoff": tradeoff,
    "sparsity-cycles": sparsity_cycles,
    "storage": storage,
    "blocksize": blocksize,
    "channels": channels,
    "stalls": stalls,
    "layout": layout,
    "energy": energy,
}


def plot(family: str, index_path: Path, out_dir: Path) -> FigureResult:
    """Extract a family's series from the index and render one SVG."""
    if family not in FAMILIES:
        raise ValueError(f"unknown figure family {family!r}; "
                         f"choose from {sorted(FAMILIES)}")
    from .index import read_index
    entries = read_index(index_path)
    if not entries:
        return FigureResult(family=family, series={}, path=None,
                            warnings=["index is empty; nothing to plot"])
    # merged indices tag runs with their family; untagged runs pass through
    entries = [e for e in entries if e.param("family", "") in ("", family)]
    series, warnings, draw = FAMILIES[family](index_path, entries)
    if not series:
        return FigureResult(family=family, series={}, path=None,
                            warnings=warnings + ["no data series extracted"])
    out_dir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    draw(ax)
    ax.set_title(family)
    fig.tight_layout()
    path = out_dir / f"{family}.svg"
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return FigureResult(family=family, series=series, path=path,
                        warnings=warnings)
