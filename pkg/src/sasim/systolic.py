"""Single-array mapping, demand-trace generation and compute simulation.

A GEMM is mapped onto the R x C array as (Sr, Sc, T): the two spatial
extents tile onto array rows/columns and T streams temporally.  The array
processes one R x C tile of the spatial plane per *fold*; every fold pays
the full pipeline of 2R + C + T - 2 cycles (stationary load, skewed
streaming, and output drain; folds do not overlap).

Within a fold the cycle schedule is:

* WS/IS - the stationary operand (filter under WS, ifmap under IS) is
  loaded one tile row per cycle during cycles 0..R-1; the streaming input
  enters array row r at cycles R+r .. R+r+T-1 (diagonal skew); the output
  for column c, step t leaves at cycle 2R-1+c+t.
* OS - both inputs stream from cycle 0 (ifmap on rows, filter on columns,
  each skewed); accumulated outputs drain through the column bottoms, the
  element of row r, column c leaving at cycle R+c+T-1 + (R-1-r).

Operand addresses live in one flat word-address space with disjoint
per-operand base offsets.  BUBBLE marks trace slots with no demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .config import Dataflow, SimConfig
from .errors import SimulationError, ValidationError
from .topology import GemmOp

BUBBLE = np.iinfo(np.int64).max

OPERANDS = ("ifmap", "filter", "ofmap")


@dataclass(frozen=True)
class MappedDims:
    """Spatial/temporal extents of a GEMM under a dataflow."""

    sr: int
    sc: int
    t: int
    dataflow: Dataflow

    @property
    def macs(self) -> int:
        return self.sr * self.sc * self.t


def map_gemm(op: GemmOp, dataflow: Dataflow) -> MappedDims:
    """Assign (M, N, K) to (Sr, Sc, T) for the dataflow."""
    if dataflow is Dataflow.IS:
        return MappedDims(op.k, op.n, op.m, dataflow)
    if dataflow is Dataflow.WS:
        return MappedDims(op.k, op.m, op.n, dataflow)
    return MappedDims(op.m, op.n, op.k, dataflow)


def fold_latency(rows: int, cols: int, t: int) -> int:
    """Pipeline length of one fold: 2R + C + T - 2."""
    return 2 * rows + cols + t - 2


def analytical_cycles(dims: MappedDims, rows: int, cols: int) -> int:
    """Single-core runtime: (2R + C + T - 2) * ceil(Sr/R) * ceil(Sc/C)."""
    if rows < 1 or cols < 1:
        raise ValidationError("array dimensions must be >= 1")
    folds = -(-dims.sr // rows) * -(-dims.sc // cols)
    return fold_latency(rows, cols, dims.t) * folds


@dataclass(frozen=True)
class FoldTile:
    """One R x C tile of the Sr x Sc plane (nr, nc are the valid extents)."""

    sr0: int
    nr: int
    sc0: int
    nc: int


@dataclass
class FoldBlock:
    """Materialized per-cycle address rows for one fold."""

    start_cycle: int
    cycles: int
    ifmap: np.ndarray
    filter: np.ndarray
    ofmap: np.ndarray

    def operand(self, name: str) -> np.ndarray:
        return getattr(self, name)


@dataclass(frozen=True)
class AddressBases:
    ifmap: int
    filter: int
    ofmap: int


class DemandTrace:
    """Per-cycle operand demand addresses, generated fold by fold.

    Blocks are regenerated on demand so multi-million-cycle traces never
    need to be resident in memory at once.  ``matrix(op)`` concatenates all
    folds for small traces and tests.
    """

    def __init__(self, dims: MappedDims, rows: int, cols: int, bases: AddressBases):
        self.dims = dims
        self.rows = rows
        self.cols = cols
        self.bases = bases
        self.fold_len = fold_latency(rows, cols, dims.t)
        self.tiles = [
            FoldTile(i * rows, min(rows, dims.sr - i * rows),
                     j * cols, min(cols, dims.sc - j * cols))
            for i in range(-(-dims.sr // rows))
            for j in range(-(-dims.sc // cols))
        ]
        self.fold_boundaries = [f * self.fold_len for f in range(1, len(self.tiles))]
        # Streaming inputs ride array rows; stationary loads and outputs ride
        # columns.  Under IS the filter is the row-streaming operand.
        if dims.dataflow is Dataflow.IS:
            self.widths = {"ifmap": cols, "filter": rows, "ofmap": cols}
        else:
            self.widths = {"ifmap": rows, "filter": cols, "ofmap": cols}

    @property
    def num_folds(self) -> int:
        return len(self.tiles)

    @property
    def num_cycles(self) -> int:
        return self.fold_len * len(self.tiles)

    def _stationary_block(self, tile: FoldTile, base: int, out: np.ndarray) -> None:
        # tile row j loads at cycle j across the valid columns
        rows = np.arange(tile.nr)[:, None]
        cols = np.arange(tile.nc)[None, :]
        out[:tile.nr, :tile.nc] = base + (tile.sr0 + rows) * self.dims.sc \
            + (tile.sc0 + cols)

    def _row_stream_block(self, tile: FoldTile, base: int, out: np.ndarray,
                          start: int) -> None:
        # element (r, t) enters row r at cycle start + r + t
        r = np.arange(tile.nr)[:, None]
        t = np.arange(self.dims.t)[None, :]
        out[start + r + t, r] = base + (tile.sr0 + r) * self.dims.t + t

    def _col_stream_block(self, tile: FoldTile, base: int, out: np.ndarray,
                          start: int) -> None:
        c = np.arange(tile.nc)[:, None]
        t = np.arange(self.dims.t)[None, :]
        out[start + c + t, c] = base + (tile.sc0 + c) * self.dims.t + t

    def _drain_block_ws(self, tile: FoldTile, base: int, out: np.ndarray) -> None:
        # output (c, t) leaves column c at cycle 2R - 1 + c + t
        c = np.arange(tile.nc)[:, None]
        t = np.arange(self.dims.t)[None, :]
        out[2 * self.rows - 1 + c + t, c] = base + (tile.sc0 + c) * self.dims.t + t

    def _drain_block_os(self, tile: FoldTile, base: int, out: np.ndarray) -> None:
        # element (r, c) leaves at cycle R + c + T - 1 + (R - 1 - r)
        r = np.arange(tile.nr)[:, None]
        c = np.arange(tile.nc)[None, :]
        first = self.rows + self.dims.t - 1 + (self.rows - 1 - r)
        out[first + c, c] = base + (tile.sr0 + r) * self.dims.sc + (tile.sc0 + c)

    def _make_block(self, index: int) -> FoldBlock:
        tile = self.tiles[index]
        L = self.fold_len
        mats = {op: np.full((L, self.widths[op]), BUBBLE, dtype=np.int64)
                for op in OPERANDS}
        flow = self.dims.dataflow
        if flow is Dataflow.WS:
            self._stationary_block(tile, self.bases.filter, mats["filter"])
            self._row_stream_block(tile, self.bases.ifmap, mats["ifmap"], self.rows)
            self._drain_block_ws(tile, self.bases.ofmap, mats["ofmap"])
        elif flow is Dataflow.IS:
            self._stationary_block(tile, self.bases.ifmap, mats["ifmap"])
            self._row_stream_block(tile, self.bases.filter, mats["filter"], self.rows)
            self._drain_block_ws(tile, self.bases.ofmap, mats["ofmap"])
        else:
            self._row_stream_block(tile, self.bases.ifmap, mats["ifmap"], 0)
            self._col_stream_block(tile, self.bases.filter, mats["filter"], 0)
            self._drain_block_os(tile, self.bases.ofmap, mats["ofmap"])
        return FoldBlock(start_cycle=index * L, cycles=L,
                         ifmap=mats["ifmap"], filter=mats["filter"], ofmap=mats["ofmap"])

    def blocks(self) -> Iterator[FoldBlock]:
        for i in range(len(self.tiles)):
            yield self._make_block(i)

    def matrix(self, operand: str) -> np.ndarray:
        """Full (num_cycles, width) address matrix for one operand."""
        return np.concatenate([b.operand(operand) for b in self.blocks()], axis=0)


def _operand_extent(dims: MappedDims, operand: str) -> int:
    """Flat word extent of an operand under the trace addressing scheme."""
    flow = dims.dataflow
    if operand == "ifmap":
        return dims.sr * dims.sc if flow is Dataflow.IS else dims.sr * dims.t
    if operand == "filter":
        if flow is Dataflow.WS:
            return dims.sr * dims.sc
        if flow is Dataflow.IS:
            return dims.sr * dims.t
        return dims.sc * dims.t
    # ofmap
    return dims.sr * dims.sc if flow is Dataflow.OS else dims.sc * dims.t


def generate_demand_trace(dims: MappedDims, cfg: SimConfig) -> DemandTrace:
    """Build the fold-structured demand trace for one array."""
    bases = AddressBases(cfg.ifmap_base, cfg.filter_base, cfg.ofmap_base)
    ordered = sorted(OPERANDS, key=lambda op: getattr(bases, op))
    for idx, op in enumerate(ordered):
        base = getattr(bases, op)
        end = base + _operand_extent(dims, op)
        limit = getattr(bases, ordered[idx + 1]) if idx + 1 < len(ordered) else BUBBLE
        if end > limit:
            raise SimulationError(
                f"{op} operand spans [{base}, {end}) and overflows into the "
                f"next address region at {limit}; raise the base offsets"
            )
    return DemandTrace(dims, cfg.array_rows, cfg.array_cols, bases)


@dataclass(frozen=True)
class ComputeReport:
    """Cycle and SRAM-traffic summary of one layer on one array."""

    total_compute_cycles: int
    utilization: float
    ifmap_sram_reads: int
    filter_sram_reads: int
    ofmap_sram_writes: int
    avg_bandwidth: dict[str, float]
    max_bandwidth: dict[str, int]
    macs: int


def simulate_compute(trace: DemandTrace, cfg: SimConfig) -> ComputeReport:
    """Walk the trace fold by fold, counting cycles and operand touches."""
    cycles = 0
    touches = {op: 0 for op in OPERANDS}
    peak = {op: 0 for op in OPERANDS}
    for block in trace.blocks():
        cycles += block.cycles
        for op in OPERANDS:
            per_cycle = (block.operand(op) != BUBBLE).sum(axis=1)
            touches[op] += int(per_cycle.sum())
            m = int(per_cycle.max()) if per_cycle.size else 0
            if m > peak[op]:
                peak[op] = m
    pes = trace.rows * trace.cols
    macs = trace.dims.macs
    utilization = macs / (pes * cycles) if cycles else 0.0
    return ComputeReport(
        total_compute_cycles=cycles,
        utilization=utilization,
        ifmap_sram_reads=touches["ifmap"],
        filter_sram_reads=touches["filter"],
        ofmap_sram_writes=touches["ofmap"],
        avg_bandwidth={op: touches[op] / cycles if cycles else 0.0 for op in OPERANDS},
        max_bandwidth=peak,
        macs=macs,
    )
