"""Sweep specification: a base config, a parameter grid and workloads.

The harness treats the simulator as a black box: every run is one CLI
invocation on a patched copy of the base config (and, for sparsity
ratios, a patched topology), and all results flow back as the CSV
reports. Parameter names map onto config keys:

===================  =============================================
grid key             effect
===================  =============================================
array                (rows, cols) -> ArrayHeight / ArrayWidth
dataflow             Dataflow
channels             [memory] Channels
queue                [memory] Read/WriteQueueEntries
banks                [layout] NumBanks
bandwidth_per_bank   [layout] BandwidthPerBank
sram_kb              all three *SramSzkB knobs
sparsity             "N:M" written into the topology column
block_size           [sparsity] BlockSize
===================  =============================================
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

_SECTION_OF = {
    "Dataflow": "architecture",
    "ArrayHeight": "architecture",
    "ArrayWidth": "architecture",
    "IfmapSramSzkB": "architecture",
    "FilterSramSzkB": "architecture",
    "OfmapSramSzkB": "architecture",
    "Channels": "memory",
    "ReadQueueEntries": "memory",
    "WriteQueueEntries": "memory",
    "ClockRatio": "memory",
    "NumBanks": "layout",
    "BandwidthPerBank": "layout",
    "SparsitySupport": "sparsity",
    "OptimizedMapping": "sparsity",
    "BlockSize": "sparsity",
}


@dataclass(frozen=True)
class Workload:
    name: str
    topology: Path


@dataclass
class SweepSpec:
    base_config: Path
    out_dir: Path
    workloads: list[Workload]
    grid: dict[str, list] = field(default_factory=dict)
    stages: str = "compute"
    seed: int = 0
    jobs: int = 2
    tag: str = ""  # stamped into every tuple as 'family' for merged indices
    analytical: Optional[dict] = None  # {"m","n","k","cores","array"} for sweep-less runs

    def tuples(self) -> list[dict]:
        """Expand the grid into one parameter dict per run."""
        if not self.workloads:
            raise ValueError("sweep needs at least one workload")
        keys = sorted(self.grid)
        values = [self.grid[k] for k in keys]
        combos = [dict(zip(keys, combo)) for combo in itertools.product(*values)]
        if not combos:
            combos = [{}]
        out = []
        for workload in self.workloads:
            for combo in combos:
                params = dict(combo)
                params["workload"] = workload.name
                if self.tag:
                    params["family"] = self.tag
                out.append(params)
        return out


def config_overrides(params: dict) -> dict[tuple[str, str], str]:
    """Map a parameter tuple onto (section, key) -> value config patches."""
    patches: dict[tuple[str, str], str] = {}

    def put(key, value):
        patches[(_SECTION_OF[key], key)] = str(value)

    for name, value in params.items():
        if name == "array":
            rows, cols = value
            put("ArrayHeight", rows)
            put("ArrayWidth", cols)
        elif name == "dataflow":
            put("Dataflow", value)
        elif name == "channels":
            put("Channels", value)
        elif name == "queue":
            put("ReadQueueEntries", value)
            put("WriteQueueEntries", value)
        elif name == "banks":
            put("NumBanks", value)
        elif name == "bandwidth_per_bank":
            put("BandwidthPerBank", value)
        elif name == "sram_kb":
            put("IfmapSramSzkB", value)
            put("FilterSramSzkB", value)
            put("OfmapSramSzkB", value)
        elif name == "block_size":
            put("SparsitySupport", "true")
            put("BlockSize", value)
        elif name == "row_wise" and value:
            put("SparsitySupport", "true")
            put("OptimizedMapping", "true")
        elif name in ("sparsity", "workload", "row_wise", "family", "cores"):
            pass  # handled elsewhere
        else:
            raise ValueError(f"unknown sweep parameter {name!r}")
    if "sparsity" in params:
        patches[("sparsity", "SparsitySupport")] = "true"
    return patches


def patch_config(text: str, patches: dict[tuple[str, str], str]) -> str:
    """Override key = value lines section by section, appending as needed."""
    lines = text.splitlines()
    remaining = dict(patches)
    out = []
    current = None
    section_end: dict[str, int] = {}
    for line in lines:
        stripped = line.split("#", 1)[0].strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].lower()
        elif "=" in stripped and current is not None:
            key = stripped.split("=", 1)[0].strip()
            if (current, key) in remaining:
                line = f"{key} = {remaining.pop((current, key))}"
        out.append(line)
        if current is not None:
            section_end[current] = len(out)
    # keys whose section exists but lacked the line
    for (section, key), value in sorted(remaining.items(), reverse=True):
        if section in section_end:
            out.insert(section_end[section], f"{key} = {value}")
            remaining.pop((section, key))
            for s, pos in section_end.items():
                if pos >= section_end[section] and s != section:
                    section_end[s] = pos + 1
    # brand-new sections
    pending: dict[str, list[str]] = {}
    for (section, key), value in sorted(remaining.items()):
        pending.setdefault(section, []).append(f"{key} = {value}")
    for section, entries in sorted(pending.items()):
        out += ["", f"[{section}]"] + entries
    return "\n".join(out) + "\n"


def patch_topology_sparsity(text: str, ratio: str) -> str:
    """Force every GEMM row's sparsity column to the given N:M ratio."""
    lines = text.splitlines()
    out = [lines[0]]
    for line in lines[1:]:
        parts = [p.strip() for p in line.split(",")]
        while parts and not parts[-1]:
            parts.pop()
        if not parts:
            continue
        if len(parts) >= 4:
            parts = parts[:4] + [ratio]
        out.append(", ".join(parts) + ",")
    return "\n".join(out) + "\n"


def run_id_of(index: int, params: dict) -> str:
    parts = [f"{k}-{_slug(v)}" for k, v in sorted(params.items())]
    return f"run{index:04d}__" + "__".join(parts)


def _slug(value) -> str:
    text = "x".join(str(v) for v in value) if isinstance(value, (tuple, list)) \
        else str(value)
    return "".join(ch if ch.isalnum() else "-" for ch in text)
