"""Multi-core partitioning: runtime formulas, shard planning, shared-L2
footprints and the partition design-space sweep.

Three schemes split a mapped GEMM over a Pr x Pc core grid:

* spatial - Sr over Pr, Sc over Pc
* st1     - Sr over Pr, T over Pc (Sc stays whole per core)
* st2     - Sc over Pc, T over Pr (Sr stays whole per core)

Aggregate latency is the max over cores (layer-end barrier); there is no
inter-core pipelining.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .config import CoreProfile, Dataflow, PartitionScheme, SimConfig, with_array
from .errors import SimulationError, ValidationError
from .systolic import (ComputeReport, MappedDims, fold_latency, map_gemm,
                       generate_demand_trace, simulate_compute)
from .topology import GemmOp


def _ceil(a: int, b: int) -> int:
    return -(-a // b)


def analytical_partition_cycles(dims: MappedDims, rows: int, cols: int,
                                pr: int, pc: int,
                                scheme: PartitionScheme) -> int:
    """Per-scheme runtime formula for a Pr x Pc grid of R x C arrays."""
    if pr < 1 or pc < 1:
        raise ValidationError("partition grid extents must be >= 1")
    if scheme is PartitionScheme.SPATIAL:
        return (fold_latency(rows, cols, dims.t)
                * _ceil(dims.sr, pr * rows) * _ceil(dims.sc, pc * cols))
    if scheme is PartitionScheme.ST1:
        return (fold_latency(rows, cols, _ceil(dims.t, pc))
                * _ceil(dims.sr, pr * rows) * _ceil(dims.sc, cols))
    return (fold_latency(rows, cols, _ceil(dims.t, pr))
            * _ceil(dims.sr, rows) * _ceil(dims.sc, pc * cols))


def split_even(extent: int, parts: int) -> list[int]:
    """Balanced split: the first (extent mod parts) shards get the ceiling."""
    base, extra = divmod(extent, parts)
    return [base + 1 if i < extra else base for i in range(parts)]


def split_weighted(extent: int, weights: Sequence[float]) -> list[int]:
    """Largest-remainder rounding of fractional shares; sums to extent."""
    total = sum(weights)
    if total <= 0:
        raise ValidationError("shard weights must sum to a positive value")
    shares = [extent * w / total for w in weights]
    sizes = [int(s) for s in shares]
    remainders = sorted(range(len(weights)), key=lambda i: (shares[i] - sizes[i], -i),
                        reverse=True)
    for i in remainders[: extent - sum(sizes)]:
        sizes[i] += 1
    return sizes


@dataclass(frozen=True)
class Shard:
    """One core's slice of the parent GEMM plus its mapped extents."""

    grid_row: int
    grid_col: int
    op: GemmOp
    dims: MappedDims
    idle: bool = False  # grid position beyond the dimension extent


@dataclass(frozen=True)
class PartitionPlan:
    scheme: PartitionScheme
    pr: int
    pc: int
    dataflow: Dataflow
    parent: GemmOp
    shards: tuple[Shard, ...]
    shard_weights: Optional[tuple[float, ...]] = None


# Which mapped extent each GEMM dim feeds, per dataflow (inverse of map_gemm).
_DIM_OF = {
    Dataflow.IS: {"sr": "k", "sc": "n", "t": "m"},
    Dataflow.WS: {"sr": "k", "sc": "m", "t": "n"},
    Dataflow.OS: {"sr": "m", "sc": "n", "t": "k"},
}


def _axis_split(extent: int, parts: int,
                weights: Optional[Sequence[float]]) -> list[int]:
    if weights is not None:
        return split_weighted(extent, weights)
    if parts > extent:
        # more cores than work along this axis: unit shards plus idle cores
        return [1] * extent + [0] * (parts - extent)
    return split_even(extent, parts)


def partition_workload(op: GemmOp, cfg: SimConfig,
                       shard_weights: Optional[Sequence[float]] = None) -> PartitionPlan:
    """Cut the GEMM into per-core shards for the configured grid/scheme."""
    scheme, pr, pc = cfg.partition, cfg.grid_rows, cfg.grid_cols
    dims = map_gemm(op, cfg.dataflow)
    names = _DIM_OF[cfg.dataflow]

    weights = tuple(shard_weights) if shard_weights is not None else None

    if scheme is PartitionScheme.SPATIAL:
        row_dim, col_dim = "sr", "sc"
        row_extent, col_extent = dims.sr, dims.sc
    elif scheme is PartitionScheme.ST1:
        row_dim, col_dim = "sr", "t"
        row_extent, col_extent = dims.sr, dims.t
    else:
        row_dim, col_dim = "t", "sc"
        row_extent, col_extent = dims.t, dims.sc

    row_weights = col_weights = None
    if weights is not None:
        if pr == 1:
            col_weights = weights
        elif pc == 1:
            row_weights = weights
        else:
            raise ValidationError(
                "non-uniform shard weights require a 1-D partition grid (Pr=1 or Pc=1)"
            )
        if len(weights) != pr * pc:
            raise ValidationError(
                f"{len(weights)} shard weights given for {pr * pc} cores"
            )

    row_sizes = _axis_split(row_extent, pr, row_weights)
    col_sizes = _axis_split(col_extent, pc, col_weights)

    shards = []
    for i in range(pr):
        for j in range(pc):
            extents = {"sr": dims.sr, "sc": dims.sc, "t": dims.t}
            extents[row_dim] = row_sizes[i]
            extents[col_dim] = col_sizes[j]
            idle = extents[row_dim] == 0 or extents[col_dim] == 0
            sizes = {k: max(1, v) for k, v in extents.items()}
            gdims = {names["sr"]: sizes["sr"], names["sc"]: sizes["sc"],
                     names["t"]: sizes["t"]}
            shard_op = GemmOp(m=gdims["m"], n=gdims["n"], k=gdims["k"],
                              source_layer=op.source_layer)
            shards.append(Shard(
                grid_row=i, grid_col=j, op=shard_op,
                dims=MappedDims(sizes["sr"], sizes["sc"], sizes["t"], cfg.dataflow),
                idle=idle,
            ))
    return PartitionPlan(scheme=scheme, pr=pr, pc=pc, dataflow=cfg.dataflow,
                         parent=op, shards=tuple(shards), shard_weights=weights)


@dataclass(frozen=True)
class L2Footprint:
    input_l2_words: int
    weight_l2_words: int
    duplication_avoided_words: int


def l2_footprint(plan: PartitionPlan, dims: MappedDims, word_bytes: int = 1) -> L2Footprint:
    """Shared-L2 operand words versus per-core L1-only duplication.

    Cores in a grid row consume the same input shard (Sr-slice x T) and
    cores in a grid column the same weight shard (Sc-slice x T); a shared
    L2 stores each such shard once.  Under st1/st2 the temporally split
    operand is disjoint per core, so one side has nothing to deduplicate.
    """
    del word_bytes  # footprints are reported in words
    input_l2 = dims.sr * dims.t
    weight_l2 = dims.sc * dims.t
    if plan.scheme is PartitionScheme.SPATIAL:
        dup = (plan.pc - 1) * input_l2 + (plan.pr - 1) * weight_l2
    elif plan.scheme is PartitionScheme.ST1:
        dup = (plan.pr - 1) * weight_l2
    else:
        dup = (plan.pc - 1) * input_l2
    return L2Footprint(input_l2_words=input_l2, weight_l2_words=weight_l2,
                       duplication_avoided_words=dup)


@dataclass(frozen=True)
class CoreResult:
    shard: Shard
    report: ComputeReport
    epilogue_cycles: int
    nop_delay_cycles: int

    @property
    def makespan(self) -> int:
        return (self.report.total_compute_cycles + self.epilogue_cycles
                + self.nop_delay_cycles)


@dataclass(frozen=True)
class MulticoreReport:
    aggregate_cycles: int
    cores: tuple[CoreResult, ...]


def simulate_multicore(plan: PartitionPlan, cfg: SimConfig) -> MulticoreReport:
    """Simulate every shard on its core; aggregate latency is the max."""
    if not plan.shards:
        raise SimulationError("partition plan has no shards")
    profiles = cfg.core_profiles or tuple(
        CoreProfile(cfg.array_rows, cfg.array_cols) for _ in plan.shards
    )
    if len(profiles) != len(plan.shards):
        raise ValidationError(
            f"{len(profiles)} core profiles for {len(plan.shards)} shards"
        )
    results = []
    for shard, profile in zip(plan.shards, profiles):
        core_cfg = with_array(cfg, profile.array_rows, profile.array_cols)
        trace = generate_demand_trace(shard.dims, core_cfg)
        report = simulate_compute(trace, core_cfg)
        results.append(CoreResult(
            shard=shard,
            report=report,
            epilogue_cycles=profile.simd_latency_cycles,
            nop_delay_cycles=profile.nop_hops * cfg.nop_hop_latency_cycles,
        ))
    return MulticoreReport(
        aggregate_cycles=max(r.makespan for r in results),
        cores=tuple(results),
    )


@dataclass(frozen=True)
class SweepRow:
    scheme: PartitionScheme
    pr: int
    pc: int
    cycles: int
    footprint: L2Footprint

    @property
    def footprint_words(self) -> int:
        return self.footprint.input_l2_words + self.footprint.weight_l2_words


_SCHEME_ORDER = {PartitionScheme.SPATIAL: 0, PartitionScheme.ST1: 1,
                 PartitionScheme.ST2: 2}


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    compute_optimal: SweepRow
    footprint_optimal: SweepRow


def sweep_partitions(op: GemmOp, rows: int, cols: int, num_cores: int,
                     dataflow: Dataflow = Dataflow.WS) -> SweepResult:
    """Score every (scheme, Pr, Pc) with Pr*Pc = num_cores."""
    if num_cores < 1:
        raise ValidationError("num_cores must be >= 1")
    dims = map_gemm(op, dataflow)
    grids = [(pr, num_cores // pr) for pr in range(1, num_cores + 1)
             if num_cores % pr == 0]
    out = []
    for scheme in (PartitionScheme.SPATIAL, PartitionScheme.ST1, PartitionScheme.ST2):
        for pr, pc in grids:
            cycles = analytical_partition_cycles(dims, rows, cols, pr, pc, scheme)
            plan = PartitionPlan(scheme=scheme, pr=pr, pc=pc, dataflow=dataflow,
                                 parent=op, shards=())
            out.append(SweepRow(scheme, pr, pc, cycles,
                                l2_footprint(plan, dims)))
    by_compute = min(out, key=lambda r: (r.cycles, r.footprint_words,
                                         _SCHEME_ORDER[r.scheme], r.pr))
    by_footprint = min(out, key=lambda r: (r.footprint_words, r.cycles,
                                           _SCHEME_ORDER[r.scheme], r.pr))
    return SweepResult(rows=tuple(out), compute_optimal=by_compute,
                       footprint_optimal=by_footprint)
