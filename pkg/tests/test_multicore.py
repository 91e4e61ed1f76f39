"""Partition formulas, shard planning, L2 footprints, multi-core simulation."""

import numpy as np
import pytest

from sasim.config import (CoreProfile, Dataflow, PartitionScheme, parse_config)
from sasim.multicore import (analytical_partition_cycles, l2_footprint,
                             partition_workload, simulate_multicore, split_even,
                             split_weighted, sweep_partitions)
from sasim.systolic import MappedDims, analytical_cycles, map_gemm
from sasim.topology import GemmOp

ALL_SCHEMES = (PartitionScheme.SPATIAL, PartitionScheme.ST1, PartitionScheme.ST2)


def make_cfg(rows, cols, flow="ws", extra=""):
    return parse_config(
        f"[architecture]\nArrayHeight = {rows}\nArrayWidth = {cols}\n"
        f"Dataflow = {flow}\n{extra}")


def test_degenerate_grid_equals_single_core():
    dims = MappedDims(37, 23, 11, Dataflow.WS)
    single = analytical_cycles(dims, 4, 4)
    for scheme in ALL_SCHEMES:
        assert analytical_partition_cycles(dims, 4, 4, 1, 1, scheme) == single


def test_formula_substitution_examples():
    dims = MappedDims(1000, 1000, 1000, Dataflow.WS)
    assert analytical_partition_cycles(dims, 8, 8, 4, 4, PartitionScheme.SPATIAL) \
        == 1022 * 32 * 32  # 1046528
    assert analytical_partition_cycles(dims, 8, 8, 4, 4, PartitionScheme.ST1) \
        == 272 * 32 * 125  # 1088000


def test_split_even_oracle():
    assert split_even(10, 4) == [3, 3, 2, 2]
    assert split_even(4, 2) == [2, 2]
    # enumeration oracle: sizes sum to extent, differ by at most one
    rng = np.random.default_rng(5)
    for _ in range(50):
        extent = int(rng.integers(1, 200))
        parts = int(rng.integers(1, 12))
        sizes = split_even(extent, parts)
        assert sum(sizes) == extent
        assert max(sizes) - min(sizes) <= 1


def test_split_weighted_oracle():
    assert split_weighted(8, [0.5, 0.25, 0.25]) == [4, 2, 2]
    rng = np.random.default_rng(6)
    for _ in range(50):
        extent = int(rng.integers(1, 300))
        weights = rng.random(int(rng.integers(1, 6))) + 0.05
        sizes = split_weighted(extent, list(weights))
        assert sum(sizes) == extent
        # largest-remainder: every size within 1 of its exact share
        shares = [extent * w / weights.sum() for w in weights]
        assert all(abs(s - sh) < 1 for s, sh in zip(sizes, shares))


def test_partition_even_shards():
    cfg = make_cfg(2, 2, "os", "[multicore]\nNumCores = 2\nPr = 2\nPc = 1\n")
    plan = partition_workload(GemmOp(4, 4, 4), cfg)
    # OS: Sr = M split over Pr
    assert [s.op.m for s in plan.shards] == [2, 2]


def test_partition_temporal_shards_st1():
    cfg = make_cfg(2, 2, "ws",
                   "[multicore]\nNumCores = 4\nPr = 1\nPc = 4\nPartition = st1\n")
    plan = partition_workload(GemmOp(4, 10, 4), cfg)  # WS: T = N = 10 over Pc
    assert [s.dims.t for s in plan.shards] == [3, 3, 2, 2]


def test_partition_non_uniform():
    cfg = make_cfg(2, 2, "os", "[multicore]\nNumCores = 3\nPr = 3\nPc = 1\n")
    plan = partition_workload(GemmOp(8, 4, 4), cfg, shard_weights=(0.5, 0.25, 0.25))
    assert [s.op.m for s in plan.shards] == [4, 2, 2]


def test_partition_grid_larger_than_dim_flags_idle():
    cfg = make_cfg(2, 2, "os", "[multicore]\nNumCores = 6\nPr = 6\nPc = 1\n")
    plan = partition_workload(GemmOp(4, 4, 4), cfg)
    assert sum(1 for s in plan.shards if s.idle) == 2
    assert all(s.op.m == 1 for s in plan.shards if not s.idle)


def test_shards_tile_parent_exactly():
    rng = np.random.default_rng(11)
    for _ in range(30):
        m, n, k = (int(v) for v in rng.integers(1, 40, 3))
        pr, pc = (int(v) for v in rng.integers(1, 4, 2))
        scheme = rng.choice(["spatial", "st1", "st2"])
        cfg = make_cfg(2, 2, "ws",
                       f"[multicore]\nNumCores = {pr * pc}\nPr = {pr}\nPc = {pc}\n"
                       f"Partition = {scheme}\n")
        plan = partition_workload(GemmOp(m, n, k), cfg)
        dims = map_gemm(GemmOp(m, n, k), Dataflow.WS)
        # split-axis extents cover the parent exactly when every core has work
        if scheme == "spatial" and pr <= dims.sr and pc <= dims.sc:
            rows = {(s.grid_row, s.dims.sr) for s in plan.shards}
            cols = {(s.grid_col, s.dims.sc) for s in plan.shards}
            assert sum(v for _, v in rows) == dims.sr
            assert sum(v for _, v in cols) == dims.sc
            # grid structure: sum of shard MACs collapses to the parent MACs
            assert sum(s.dims.macs for s in plan.shards) == dims.macs


def test_l2_footprint_degenerate():
    cfg = make_cfg(2, 2, "ws", "[multicore]\nNumCores = 1\nPr = 1\nPc = 1\n")
    plan = partition_workload(GemmOp(4, 4, 4), cfg)
    dims = map_gemm(GemmOp(4, 4, 4), Dataflow.WS)
    assert l2_footprint(plan, dims).duplication_avoided_words == 0


def test_l2_footprint_counting_example():
    # Pr=Pc=2, input shard 100 words each grid row -> shared 200, L1-only 400
    cfg = make_cfg(2, 2, "ws", "[multicore]\nNumCores = 4\nPr = 2\nPc = 2\n")
    op = GemmOp(4, 10, 20)  # WS: input = Sr x T = 20x10 = 200 words, shard 100
    plan = partition_workload(op, cfg)
    dims = map_gemm(op, Dataflow.WS)
    fp = l2_footprint(plan, dims)
    assert fp.input_l2_words == 200
    # avoided on input side: (Pc-1) * 200 = 200, plus weight side (Pr-1)*Sc*T
    assert fp.duplication_avoided_words == 200 + (2 - 1) * 4 * 10


def test_l2_footprint_weight_sharing():
    # weight shard 50 words/col over Pr=4: avoided (Pr-1) * Sc * T on weights
    cfg = make_cfg(2, 2, "ws",
                   "[multicore]\nNumCores = 8\nPr = 4\nPc = 2\nPartition = st1\n")
    op = GemmOp(10, 8, 6)  # WS: weight = Sc x T = M x N = 10*8 words
    plan = partition_workload(op, cfg)
    dims = map_gemm(op, Dataflow.WS)
    fp = l2_footprint(plan, dims)
    assert fp.weight_l2_words == 80
    assert fp.duplication_avoided_words == 3 * 80  # st1 shares nothing on input


def test_simulate_multicore_symmetric():
    cfg = make_cfg(4, 4, "os", "[multicore]\nNumCores = 4\nPr = 2\nPc = 2\n")
    plan = partition_workload(GemmOp(8, 8, 8), cfg)
    report = simulate_multicore(plan, cfg)
    assert report.aggregate_cycles == report.cores[0].report.total_compute_cycles
    assert all(c.report.total_compute_cycles == report.aggregate_cycles
               for c in report.cores)


def test_simulate_multicore_heterogeneous():
    cfg = make_cfg(8, 8, "os",
                   "[multicore]\nNumCores = 2\nPr = 2\nPc = 1\n"
                   "CoreProfiles = 8,8,0,0,0 ; 16,16,0,0,0\n")
    plan = partition_workload(GemmOp(32, 32, 32), cfg)
    report = simulate_multicore(plan, cfg)
    slower = max(c.report.total_compute_cycles for c in report.cores)
    assert report.aggregate_cycles == slower
    assert report.cores[0].report.total_compute_cycles \
        != report.cores[1].report.total_compute_cycles


def test_simulate_multicore_nop_delay():
    cfg = make_cfg(4, 4, "os",
                   "[multicore]\nNumCores = 2\nPr = 2\nPc = 1\n"
                   "NopHopLatencyCycles = 10\n"
                   "CoreProfiles = 4,4,0,0,0 ; 4,4,0,0,3\n")
    plan = partition_workload(GemmOp(8, 8, 8), cfg)
    report = simulate_multicore(plan, cfg)
    base = report.cores[0].report.total_compute_cycles
    assert report.cores[1].makespan == base + 30
    assert report.aggregate_cycles == base + 30


def test_simulate_multicore_simd_epilogue():
    cfg = make_cfg(4, 4, "os",
                   "[multicore]\nNumCores = 1\nPr = 1\nPc = 1\n"
                   "CoreProfiles = 4,4,32,7,0\n")
    plan = partition_workload(GemmOp(4, 4, 4), cfg)
    report = simulate_multicore(plan, cfg)
    assert report.aggregate_cycles == report.cores[0].report.total_compute_cycles + 7


def test_simulated_shards_match_formula_when_divisible():
    # dims divisible by Pr*R and Pc*C: per-core max equals the scheme formula
    cfg = make_cfg(4, 4, "ws", "[multicore]\nNumCores = 4\nPr = 2\nPc = 2\n")
    op = GemmOp(16, 12, 24)  # WS: Sr=24 /(2*4)=3 folds, Sc=16 /(2*4)=2
    plan = partition_workload(op, cfg)
    report = simulate_multicore(plan, cfg)
    dims = map_gemm(op, Dataflow.WS)
    assert report.aggregate_cycles == analytical_partition_cycles(
        dims, 4, 4, 2, 2, PartitionScheme.SPATIAL)


def test_every_shard_matches_eq1_on_its_own_dims():
    cfg = make_cfg(4, 4, "ws",
                   "[multicore]\nNumCores = 4\nPr = 2\nPc = 2\nPartition = st1\n")
    plan = partition_workload(GemmOp(13, 9, 21), cfg)
    report = simulate_multicore(plan, cfg)
    for core in report.cores:
        assert core.report.total_compute_cycles == analytical_cycles(
            core.shard.dims, 4, 4)


def test_monotonic_in_grid():
    dims = MappedDims(500, 400, 300, Dataflow.WS)
    for scheme in ALL_SCHEMES:
        prev = None
        for pr in (1, 2, 4, 8):
            cyc = analytical_partition_cycles(dims, 8, 8, pr, 2, scheme)
            if prev is not None:
                assert cyc <= prev
            prev = cyc
        prev = None
        for pc in (1, 2, 4, 8):
            cyc = analytical_partition_cycles(dims, 8, 8, 2, pc, scheme)
            if prev is not None:
                assert cyc <= prev
            prev = cyc


def test_sweep_enumeration():
    result = sweep_partitions(GemmOp(64, 64, 64), 8, 8, 4)
    # grids {(1,4),(2,2),(4,1)} x 3 schemes
    assert len(result.rows) == 9
    result16 = sweep_partitions(GemmOp(1000, 1000, 1000), 8, 8, 16)
    assert len(result16.rows) == 15
    best = min(r.cycles for r in result16.rows)
    assert result16.compute_optimal.cycles == best


def test_sweep_degenerate_tie_break():
    result = sweep_partitions(GemmOp(1, 1, 1), 8, 8, 4)
    assert result.compute_optimal.scheme is PartitionScheme.SPATIAL
    assert result.compute_optimal.pr == 1
    assert result.footprint_optimal.scheme is PartitionScheme.SPATIAL


def test_empty_plan_rejected():
    from sasim.errors import SimulationError
    from sasim.multicore import PartitionPlan
    cfg = make_cfg(2, 2)
    plan = PartitionPlan(scheme=PartitionScheme.SPATIAL, pr=1, pc=1,
                         dataflow=Dataflow.WS, parent=GemmOp(1, 1, 1), shards=())
    with pytest.raises(SimulationError):
        simulate_multicore(plan, cfg)
