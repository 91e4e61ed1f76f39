"""Per-layer simulation pipeline shared by the CLI and the test suites.

A layer flows through: GEMM lowering -> (optional) sparse mapping ->
demand-trace generation -> compute simulation -> optional memory replay,
layout evaluation and energy accounting.  Sparse *mapping* is a property
of the configuration (SparsitySupport); the sparsity stage flag only
controls whether SPARSE_REPORT.csv is emitted, so toggling report stages
never changes another stage's numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .config import Dataflow, SimConfig
from .energy import (ActionCounts, EnergyReport, EnergyTable,
                     collect_action_counts, compute_energy, parse_energy_table)
from .errors import ValidationError
from .layout import LayoutReport, LayoutSpec, default_gemm_spec, evaluate_layout
from .memory import (StallReport, dram_simulate, interleave_traces,
                     replay_with_stalls)
from .sparsity import (SparseLayerEntry, SparsityPattern, derive_layer_seed,
                       materialize_pattern, sparse_mapped_dims, storage_report)
from .systolic import (ComputeReport, MappedDims, generate_demand_trace,
                       map_gemm, simulate_compute)
from .topology import GemmOp, LayerSpec, layer_to_gemm

STAGES = ("compute", "memory", "layout", "energy", "sparsity")


def operand_shape(dims: MappedDims, operand: str) -> tuple[int, int]:
    """2-D logical extent of an operand in the flat trace address space."""
    flow = dims.dataflow
    if operand == "ifmap":
        return (dims.sr, dims.sc) if flow is Dataflow.IS else (dims.sr, dims.t)
    if operand == "filter":
        if flow is Dataflow.WS:
            return (dims.sr, dims.sc)
        if flow is Dataflow.IS:
            return (dims.sr, dims.t)
        return (dims.sc, dims.t)
    return (dims.sr, dims.sc) if flow is Dataflow.OS else (dims.sc, dims.t)


def load_energy_table(cfg: SimConfig) -> EnergyTable:
    if cfg.energy.table_path:
        text = Path(cfg.energy.table_path).read_text()
    else:
        text = resources.files("sasim.data").joinpath("default_ert.csv").read_text()
    return parse_energy_table(text)


def parse_layout_file(text: str) -> dict[str, dict]:
    """Per-operand layout rows: 'operand,dim_order,c1_step,h1_step,w1_step'."""
    out: dict[str, dict] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",") if p.strip()]
        if parts[0].lower() == "operand":
            continue  # header
        if len(parts) != 5:
            raise ValidationError(
                f"line {lineno}: layout rows need 'operand,dim_order,c1,h1,w1'"
            )
        operand, order, c1, h1, w1 = parts
        if operand not in ("ifmap", "filter", "ofmap"):
            raise ValidationError(f"line {lineno}: unknown operand {operand!r}")
        if sorted(order) != ["c", "h", "w"]:
            raise ValidationError(f"line {lineno}: dim_order must permute 'chw'")
        try:
            steps = (int(c1), int(h1), int(w1))
        except ValueError:
            raise ValidationError(f"line {lineno}: non-numeric layout step") from None
        out[operand] = {"inter_order": tuple(order), "steps": steps}
    return out


@dataclass
class LayerResult:
    index: int
    name: str
    gemm: GemmOp
    dims: MappedDims
    compute: ComputeReport
    pattern: Optional[SparsityPattern] = None
    sparse_entry: Optional[SparseLayerEntry] = None
    stall: Optional[StallReport] = None
    layout: Optional[LayoutReport] = None
    action_counts: Optional[ActionCounts] = None
    energy: Optional[EnergyReport] = None


def build_layout_specs(dims: MappedDims, cfg: SimConfig,
                       overrides: Optional[dict[str, dict]] = None) -> dict[str, LayoutSpec]:
    specs = {}
    lay = cfg.layout
    for operand in ("ifmap", "filter", "ofmap"):
        rows, cols = operand_shape(dims, operand)
        ov = (overrides or {}).get(operand, {})
        steps = ov.get("steps")
        if steps is not None:
            steps = (min(max(1, steps[0]), 1), min(max(1, steps[1]), rows),
                     min(max(1, steps[2]), cols))
        spec = default_gemm_spec(rows, cols, lay.num_banks, lay.bandwidth_per_bank,
                                 lay.ports_per_bank, steps)
        if "inter_order" in ov:
            spec = LayoutSpec(dims=spec.dims, steps=spec.steps,
                              num_banks=spec.num_banks,
                              bandwidth_per_bank=spec.bandwidth_per_bank,
                              ports_per_bank=spec.ports_per_bank,
                              inter_order=ov["inter_order"],
                              intra_order=spec.intra_order)
        specs[operand] = spec
    return specs


def mapped_dims_for_layer(layer: LayerSpec, cfg: SimConfig,
                          seed: int) -> tuple[GemmOp, MappedDims, Optional[SparsityPattern]]:
    gemm = layer_to_gemm(layer)
    dims = map_gemm(gemm, cfg.dataflow)
    pattern = None
    if cfg.sparsity.enabled:
        pattern = materialize_pattern(layer, cfg, seed)
        dims = sparse_mapped_dims(dims, pattern)
    return gemm, dims, pattern


def run_layer(index: int, layer: LayerSpec, cfg: SimConfig, stages: set[str],
              global_seed: int = 0,
              layout_overrides: Optional[dict[str, dict]] = None,
              energy_table: Optional[EnergyTable] = None,
              imported_latencies: Optional[np.ndarray] = None) -> LayerResult:
    seed = derive_layer_seed(global_seed, index)
    gemm, dims, pattern = mapped_dims_for_layer(layer, cfg, seed)
    trace = generate_demand_trace(dims, cfg)
    compute = simulate_compute(trace, cfg)
    result = LayerResult(index=index, name=layer.name, gemm=gemm, dims=dims,
                         compute=compute, pattern=pattern)

    if "sparsity" in stages and cfg.sparsity.enabled:
        rep = storage_report(gemm.k, gemm.n, pattern, cfg.sparsity.rep,
                             cfg.word_bytes * 8)
        result.sparse_entry = SparseLayerEntry(layer=layer.name, report=rep,
                                               pattern=pattern)

    if "memory" in stages:
        reqs = interleave_traces(
            trace,
            row_coalesce_bytes=cfg.dram.row_size_bytes if cfg.dram.row_coalescing else 0,
            word_bytes=cfg.word_bytes)
        if imported_latencies is not None:
            latencies = imported_latencies
            if len(latencies) != len(reqs):
                raise ValidationError(
                    f"layer {layer.name}: {len(latencies)} imported latencies "
                    f"for {len(reqs)} requests")
        else:
            latencies, _ = dram_simulate(reqs, cfg.dram, cfg.word_bytes)
        result.stall = replay_with_stalls(reqs, latencies, cfg.queues,
                                          compute.total_compute_cycles)

    if "layout" in stages:
        specs = build_layout_specs(dims, cfg, layout_overrides)
        result.layout = evaluate_layout(trace, specs)

    if "energy" in stages:
        counts = collect_action_counts(trace, compute, cfg.energy.row_size_elems,
                                       cfg.energy.bank_size_rows,
                                       cfg.energy.clock_gating)
        table = energy_table or load_energy_table(cfg)
        result.action_counts = counts
        result.energy = compute_energy(counts, table, compute.total_compute_cycles,
                                       cfg.energy.clock_mhz)
    return result
