"""On-chip data layout over a multi-bank SRAM and bank-conflict slowdown.

A (C, H, W) tensor is organized into memory lines by nested-loop step
sizes: the intra-line order packs (x mod step) offsets into a line whose
capacity is the product of the steps, and the inter-line order arranges
the step-sized tiles across lines.  A line spans all banks; the columns of
bank b are [b*bandwidth_per_bank, (b+1)*bandwidth_per_bank).  When one
cycle asks a bank for more distinct lines than it has ports, the access
serializes; the slowest bank sets that cycle's cost.

GEMM operands reuse the machinery as (C=1, H=rows, W=cols) tensors with
the flat word address a = h*W + w.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from .errors import ValidationError
from .systolic import BUBBLE, DemandTrace

_DIMS = ("c", "h", "w")


@dataclass(frozen=True)
class LayoutSpec:
    dims: tuple[int, int, int]          # (C, H, W) extents
    steps: tuple[int, int, int]         # (c1_step, h1_step, w1_step)
    num_banks: int
    bandwidth_per_bank: int
    ports_per_bank: int = 1
    inter_order: tuple[str, str, str] = ("c", "h", "w")
    intra_order: tuple[str, str, str] = ("w", "h", "c")

    def __post_init__(self):
        for name, extent, step in zip(_DIMS, self.dims, self.steps):
            if extent < 1:
                raise ValidationError(f"dimension {name} must be >= 1")
            if not 1 <= step <= extent:
                raise ValidationError(
                    f"step for {name} must be in [1, {extent}], got {step}"
                )
        if self.bandwidth_per_bank < 1 or self.num_banks < 1 or self.ports_per_bank < 1:
            raise ValidationError("bank parameters must be >= 1")
        if sorted(self.inter_order) != list(_DIMS) or sorted(self.intra_order) != list(_DIMS):
            raise ValidationError("dimension orders must be permutations of (c, h, w)")
        if self.line_width > self.num_banks * self.bandwidth_per_bank:
            raise ValidationError(
                f"intra-line capacity {self.line_width} exceeds the total line "
                f"width {self.num_banks}*{self.bandwidth_per_bank}"
            )

    @property
    def line_width(self) -> int:
        s = dict(zip(_DIMS, self.steps))
        return s["c"] * s["h"] * s["w"]


@dataclass(frozen=True)
class Placement:
    line_id: int
    col_id: int
    bank_id: int


def _locate_arrays(c, h, w, spec: LayoutSpec):
    """Vectorized (line, col, bank) for coordinate arrays."""
    ext = dict(zip(_DIMS, spec.dims))
    stp = dict(zip(_DIMS, spec.steps))
    coord = {"c": c, "h": h, "w": w}

    line = 0
    for pos, name in enumerate(spec.inter_order):
        term = coord[name] // stp[name]
        for inner in spec.inter_order[pos + 1:]:
            term = term * (-(-ext[inner] // stp[inner]))
        line = line + term

    col = 0
    for pos, name in enumerate(spec.intra_order):
        term = coord[name] % stp[name]
        for inner in spec.intra_order[pos + 1:]:
            term = term * stp[inner]
        col = col + term

    bank = col // spec.bandwidth_per_bank
    return line, col, bank


def locate(c: int, h: int, w: int, spec: LayoutSpec) -> Placement:
    """Placement of element (c, h, w)."""
    for name, coord, extent in zip(_DIMS, (c, h, w), spec.dims):
        if not 0 <= coord < extent:
            raise ValidationError(
                f"coordinate {name}={coord} outside [0, {extent})"
            )
    line, col, bank = _locate_arrays(np.int64(c), np.int64(h), np.int64(w), spec)
    return Placement(int(line), int(col), int(bank))


def cycle_conflicts(requests: Iterable[tuple[int, int, int]], spec: LayoutSpec) -> int:
    """Cycles needed to serve one compute cycle's request set.

    Per bank the cost is ceil(distinct requested lines / ports); the
    slowest bank wins.  Empty banks contribute nothing.
    """
    reqs = list(requests)
    if not reqs:
        raise ValidationError("cycle_conflicts needs a nonempty request set")
    arr = np.asarray(reqs, dtype=np.int64)
    line, _, bank = _locate_arrays(arr[:, 0], arr[:, 1], arr[:, 2], spec)
    pairs = np.unique(np.stack([bank, line], axis=1), axis=0)
    _, rows_per_bank = np.unique(pairs[:, 0], return_counts=True)
    return int(np.max(-(-rows_per_bank // spec.ports_per_bank)))


def _slowdown_for_addresses(cycles: np.ndarray, addrs: np.ndarray,
                            spec: LayoutSpec) -> tuple[np.ndarray, np.ndarray]:
    """Per-cycle service cost for flat, nonempty (cycle, address) pairs."""
    hw = spec.dims[1] * spec.dims[2]
    if int(addrs.max()) >= spec.dims[0] * hw:
        raise ValidationError("trace address outside the layout tensor extent")
    c = addrs // hw
    rem = addrs % hw
    h = rem // spec.dims[2]
    w = rem % spec.dims[2]
    line, _, bank = _locate_arrays(c, h, w, spec)
    # distinct (cycle, bank, line) triples, then line counts per (cycle, bank)
    stride = int(line.max()) + 1
    uniq = np.unique((cycles * spec.num_banks + bank) * stride + line)
    cb_ids, counts = np.unique(uniq // stride, return_counts=True)
    cost = -(-counts // spec.ports_per_bank)
    out_cycles = cb_ids // spec.num_banks
    # cb_ids are sorted, so out_cycles is non-decreasing: reduce per cycle
    boundaries = np.flatnonzero(np.diff(out_cycles)) + 1
    starts = np.concatenate([[0], boundaries])
    return out_cycles[starts], np.maximum.reduceat(cost, starts)


@dataclass(frozen=True)
class LayoutReport:
    total_cycles: int
    baseline_cycles: int

    @property
    def slowdown(self) -> float:
        return self.total_cycles / self.baseline_cycles if self.baseline_cycles else 0.0


def evaluate_layout(trace: DemandTrace, specs: Mapping[str, LayoutSpec],
                    baseline_cycles: Optional[int] = None) -> LayoutReport:
    """Total stall-inclusive cycles of a trace under per-operand layouts.

    Each operand named in ``specs`` is charged its per-cycle bank-conflict
    cost; operands live in separate SRAMs, so a cycle costs the max over
    operands (and at least the one ideal cycle).
    """
    if not specs:
        raise ValidationError("evaluate_layout needs at least one operand spec")
    baseline = trace.num_cycles if baseline_cycles is None else baseline_cycles
    total = 0
    for block in trace.blocks():
        block_cost = np.ones(block.cycles, dtype=np.int64)
        for op, spec in specs.items():
            mat = block.operand(op)
            rows, slots = np.nonzero(mat != BUBBLE)
            if not len(rows):
                continue
            addrs = mat[rows, slots] - getattr(trace.bases, op)
            cyc_ids, cost = _slowdown_for_addresses(rows.astype(np.int64), addrs, spec)
            np.maximum.at(block_cost, cyc_ids, cost)
        total += int(block_cost.sum())
    return LayoutReport(total_cycles=total, baseline_cycles=baseline)


def default_gemm_spec(rows: int, cols: int, num_banks: int,
                      bandwidth_per_bank: int, ports_per_bank: int = 1,
                      steps: Optional[tuple[int, int, int]] = None) -> LayoutSpec:
    """Layout for a GEMM operand: (1, rows, cols) with a line filled along w.

    Default steps pack one full line of total bandwidth: w fills first,
    then h, keeping the line width at num_banks * bandwidth_per_bank.
    """
    if steps is None:
        total = num_banks * bandwidth_per_bank
        w1 = min(cols, total)
        h1 = min(rows, max(1, total // w1))
        steps = (1, h1, w1)
    steps = (min(steps[0], 1), min(steps[1], rows), min(steps[2], cols))
    return LayoutSpec(dims=(1, rows, cols), steps=steps, num_banks=num_banks,
                      bandwidth_per_bank=bandwidth_per_bank,
                      ports_per_bank=ports_per_bank)
