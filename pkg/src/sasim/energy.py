"""Action-count energy accounting against a reference table.

Per-component action tallies are extracted from a finished run: MAC units
split PE-cycles into random/constant/gated work by utilization, each SRAM
classifies accesses as random or repeated via an LRU window of open rows
('row size' elements per row, 'bank size' rows held open), and the three
per-PE scratchpads follow fixed dataflow rules.  A plain-text energy
reference table (CSV: component,action,energy_pJ, with 'leakage' rows
charged per cycle) turns the counts into energy, average power and EdP.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .config import Dataflow
from .errors import SimulationError, ValidationError
from .systolic import BUBBLE, ComputeReport, DemandTrace

MAC_ACTIONS = ("random", "constant", "gated")
SRAM_ACTIONS = ("idle", "read_random", "read_repeat", "write_random", "write_repeat")
SPAD_ACTIONS = ("read", "write")

SRAM_COMPONENTS = ("ifmap_sram", "filter_sram", "ofmap_sram")
SPAD_COMPONENTS = ("ifmap_spad", "weight_spad", "psum_spad")
COMPONENTS = ("mac",) + SRAM_COMPONENTS + SPAD_COMPONENTS

# wire-switch flags per action for the action-count export:
# (address_delta, data_delta)
ACTION_DELTAS = {
    "idle": (0, 0),
    "read_random": (1, 1),
    "read_repeat": (0, 1),
    "write_random": (1, 1),
    "write_repeat": (0, 1),
    "random": (1, 1),
    "constant": (0, 0),
    "gated": (0, 0),
    "read": (1, 1),
    "write": (1, 1),
}


@dataclass
class ActionCounts:
    """component -> action -> count."""

    counts: dict[str, dict[str, int]] = field(default_factory=dict)

    def add(self, component: str, action: str, amount: int) -> None:
        comp = self.counts.setdefault(component, {})
        comp[action] = comp.get(action, 0) + int(amount)

    def get(self, component: str, action: str) -> int:
        return self.counts.get(component, {}).get(action, 0)

    def items(self):
        for component, actions in self.counts.items():
            for action, count in actions.items():
                yield component, action, count


def count_mac_actions(pes: int, cycles: int, utilization: float,
                      gating: bool) -> dict[str, int]:
    """Split PE-cycles into active work and constant/gated idling."""
    if not 0.0 <= utilization <= 1.0:
        raise ValidationError(f"utilization must be in [0, 1], got {utilization}")
    total = pes * cycles
    random = round(total * utilization)
    rest = total - random
    return {
        "random": random,
        "constant": 0 if gating else rest,
        "gated": rest if gating else 0,
    }


def classify_repeats(addresses: Iterable[int], row_size_elems: int,
                     bank_size_rows: int) -> tuple[int, int]:
    """(random, repeat) counts under an LRU window of open rows."""
    if row_size_elems < 1:
        raise ValidationError("row size must be >= 1 element")
    if bank_size_rows < 1:
        raise ValidationError("bank size must hold >= 1 row")
    open_rows: OrderedDict[int, None] = OrderedDict()
    random = repeat = 0
    for addr in addresses:
        row = int(addr) // row_size_elems
        if row in open_rows:
            repeat += 1
            open_rows.move_to_end(row)
        else:
            random += 1
            open_rows[row] = None
            if len(open_rows) > bank_size_rows:
                open_rows.popitem(last=False)
    return random, repeat


@dataclass(frozen=True)
class SramCounts:
    idle: int
    read_random: int
    read_repeat: int
    write_random: int
    write_repeat: int


def count_sram_actions(trace: DemandTrace, row_size_elems: int,
                       bank_size_rows: int) -> dict[str, SramCounts]:
    """Classify every operand access in trace order; idle fills the rest.

    The idle budget of an SRAM is cycles times the operand-facing edge of
    the array: the row count for the ifmap and filter ports, the column
    count for the ofmap port.
    """
    edge = {"ifmap": trace.rows, "filter": trace.rows, "ofmap": trace.cols}
    out = {}
    cycles = trace.num_cycles
    for op, component in zip(("ifmap", "filter", "ofmap"), SRAM_COMPONENTS):
        stream = []
        for block in trace.blocks():
            mat = block.operand(op)
            rows, slots = np.nonzero(mat != BUBBLE)
            order = np.lexsort((slots, rows))
            stream.append(mat[rows[order], slots[order]])
        addresses = np.concatenate(stream) if stream else np.empty(0, dtype=np.int64)
        random, repeat = classify_repeats(addresses, row_size_elems, bank_size_rows)
        total = random + repeat
        idle = cycles * edge[op] - total
        if op == "ofmap":
            out[component] = SramCounts(idle, 0, 0, random, repeat)
        else:
            out[component] = SramCounts(idle, random, repeat, 0, 0)
    return out


def count_spad_actions(dataflow: Dataflow, ifmap_sram_reads: int,
                       filter_sram_reads: int, macs: int) -> dict[str, dict[str, int]]:
    """Per-PE scratchpad traffic: writes mirror SRAM fills, reads mirror MACs."""
    del dataflow  # the rules are dataflow-independent; counts differ via inputs
    return {
        "ifmap_spad": {"write": ifmap_sram_reads, "read": macs},
        "weight_spad": {"write": filter_sram_reads, "read": macs},
        "psum_spad": {"write": macs, "read": macs},
    }


def collect_action_counts(trace: DemandTrace, report: ComputeReport,
                          row_size_elems: int, bank_size_rows: int,
                          gating: bool = True) -> ActionCounts:
    """All component tallies for one simulated layer."""
    counts = ActionCounts()
    pes = trace.rows * trace.cols
    for action, value in count_mac_actions(
            pes, report.total_compute_cycles, report.utilization, gating).items():
        counts.add("mac", action, value)
    for component, sram in count_sram_actions(
            trace, row_size_elems, bank_size_rows).items():
        for action in SRAM_ACTIONS:
            counts.add(component, action, getattr(sram, action))
    spads = count_spad_actions(trace.dims.dataflow, report.ifmap_sram_reads,
                               report.filter_sram_reads, report.macs)
    for component, actions in spads.items():
        for action, value in actions.items():
            counts.add(component, action, value)
    return counts


@dataclass(frozen=True)
class EnergyTable:
    entries: dict[tuple[str, str], float]
    leakage_pj_per_cycle: dict[str, float]

    def energy_of(self, component: str, action: str) -> float:
        key = (component, action)
        if key not in self.entries:
            raise SimulationError(
                f"energy table has no entry for ({component}, {action})"
            )
        return self.entries[key]


def parse_energy_table(text: str) -> EnergyTable:
    """Load a 'component,action,energy_pJ' table; 'leakage' rows are per cycle."""
    entries: dict[tuple[str, str], float] = {}
    leakage: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ValidationError(
                f"line {lineno}: expected 'component,action,energy_pJ'"
            )
        component, action, raw = parts
        if not entries and not leakage and raw.lower().endswith("pj"):
            continue  # header row
        try:
            value = float(raw)
        except ValueError:
            raise ValidationError(f"line {lineno}: non-numeric energy {raw!r}") from None
        if action == "leakage":
            leakage[component] = value
        else:
            entries[(component, action)] = value
    return EnergyTable(entries=entries, leakage_pj_per_cycle=leakage)


@dataclass(frozen=True)
class EnergyReport:
    per_component_pj: dict[str, float]
    leakage_pj: float
    total_pj: float
    avg_power_mw: float
    edp_cycles_mj: float


def compute_energy(counts: ActionCounts, table: EnergyTable, cycles: int,
                   clock_mhz: int) -> EnergyReport:
    """Dot-product of counts with the table, plus per-cycle leakage."""
    per_component: dict[str, float] = {}
    for component, action, count in counts.items():
        if count == 0:
            continue
        pj = count * table.energy_of(component, action)
        per_component[component] = per_component.get(component, 0.0) + pj
    leakage = cycles * sum(table.leakage_pj_per_cycle.values())
    total = sum(per_component.values()) + leakage
    seconds = cycles / (clock_mhz * 1e6) if clock_mhz else 0.0
    power_mw = (total * 1e-12 / seconds) * 1e3 if seconds > 0 else 0.0
    return EnergyReport(
        per_component_pj=per_component,
        leakage_pj=leakage,
        total_pj=total,
        avg_power_mw=power_mw,
        edp_cycles_mj=cycles * total * 1e-9,
    )


def export_action_counts(counts: ActionCounts) -> str:
    """Render the action-count file consumed by external energy tools.

    Every component lists each action with its count and the wire-switch
    arguments: repeated accesses keep address_delta 0, random accesses
    toggle it to 1.
    """
    lines = ["action_counts:"]
    known_actions = {"mac": MAC_ACTIONS}
    known_actions.update({c: SRAM_ACTIONS for c in SRAM_COMPONENTS})
    known_actions.update({c: SPAD_ACTIONS for c in SPAD_COMPONENTS})
    for component in COMPONENTS:
        lines.append(f"  - name: {component}")
        lines.append("    actions:")
        for action in known_actions[component]:
            addr_d, data_d = ACTION_DELTAS[action]
            lines.append(f"      - name: {action}")
            lines.append(f"        counts: {counts.get(component, action)}")
            lines.append("        arguments:")
            lines.append(f"          address_delta: {addr_d}")
            lines.append(f"          data_delta: {data_d}")
    return "\n".join(lines) + "\n"
