"""N:M weight sparsity: pattern materialization, compressed-storage
accounting (CSR / CSC / blocked ELLPACK) and the WS mapping shortcut.

The filter's spatial-row extent (Sr = K under weight-stationary) is tiled
into blocks of M consecutive rows.  In each block the first N rows hold
nonzero weights and the rest are zero; zero rows are skipped at mapping
time, shrinking Sr to the per-block sum of N.  Layer-wise sparsity uses
one N for every block (from the topology's N:M column); row-wise sparsity
draws N per block uniformly from 1..M/2 with a recorded seed.

Storage accounting is element-granular over the physical K x N filter
matrix: blocked ELLPACK keeps each nonzero value plus a log2(M)-bit
intra-block index; CSR/CSC keep minimal ceil-log2 index widths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .config import Dataflow, SimConfig, SparseRep
from .errors import SimulationError, ValidationError
from .systolic import MappedDims
from .topology import LayerSpec, layer_to_gemm


class SparsityMode(Enum):
    LAYER_WISE = "layer_wise"
    ROW_WISE = "row_wise"


@dataclass(frozen=True)
class SparsityPattern:
    mode: SparsityMode
    block_m: int
    block_n: tuple[int, ...]  # nonzero rows per Sr block
    total_rows: int           # Sr extent the blocks tile
    seed: int

    @property
    def per_row_n(self) -> tuple[int, ...]:
        """N of the containing block, expanded to one entry per filter row."""
        out = []
        for b, n in enumerate(self.block_n):
            out.extend([n] * min(self.block_m, self.total_rows - b * self.block_m))
        return tuple(out)

    def row_mask(self) -> np.ndarray:
        """Boolean mask over Sr rows; True rows carry nonzero weights."""
        mask = np.zeros(self.total_rows, dtype=bool)
        for b, n in enumerate(self.block_n):
            start = b * self.block_m
            width = min(self.block_m, self.total_rows - start)
            mask[start:start + min(n, width)] = True
        return mask

    @property
    def effective_rows(self) -> int:
        return int(self.row_mask().sum())


def derive_layer_seed(global_seed: int, layer_index: int) -> int:
    """Stable per-layer seed so layers can materialize in parallel."""
    return int(np.random.SeedSequence([global_seed, layer_index]).generate_state(1)[0])


def materialize_pattern(layer: LayerSpec, cfg: SimConfig, seed: int = 0) -> SparsityPattern:
    """Fix the per-block nonzero counts for one layer."""
    if not cfg.sparsity.enabled:
        raise SimulationError("sparsity is not enabled in the configuration")
    k = layer_to_gemm(layer).k
    if cfg.sparsity.optimized_mapping:
        m = cfg.sparsity.block_size
        if m // 2 < 1:
            raise ValidationError(
                f"row-wise sparsity needs BlockSize >= 2 so that N <= M/2 is "
                f"satisfiable, got {m}"
            )
        rng = np.random.default_rng(seed)
        blocks = -(-k // m)
        block_n = tuple(int(v) for v in rng.integers(1, m // 2 + 1, size=blocks))
        return SparsityPattern(SparsityMode.ROW_WISE, m, block_n, k, seed)
    if layer.sparsity_ratio is None:
        ratio = (cfg.sparsity.block_size, cfg.sparsity.block_size)  # dense fallback
    else:
        ratio = layer.sparsity_ratio
    n, m = ratio
    if n > m:
        raise ValidationError(f"layer {layer.name}: N={n} exceeds block size M={m}")
    blocks = -(-k // m)
    return SparsityPattern(SparsityMode.LAYER_WISE, m, (n,) * blocks, k, seed)


def sparse_mapped_dims(dims: MappedDims, pattern: SparsityPattern) -> MappedDims:
    """Shrink Sr to the surviving nonzero rows; WS only."""
    if dims.dataflow is not Dataflow.WS:
        raise SimulationError(
            "sparsity runs require the weight-stationary dataflow"
        )
    if pattern.total_rows != dims.sr:
        raise ValidationError(
            f"pattern covers {pattern.total_rows} rows but Sr = {dims.sr}"
        )
    return MappedDims(pattern.effective_rows, dims.sc, dims.t, dims.dataflow)


@dataclass(frozen=True)
class SparseStorageReport:
    rep: SparseRep
    rows: int
    cols: int
    word_bits: int
    nnz: int
    metadata_bits: int

    @property
    def original_words(self) -> int:
        return self.rows * self.cols

    @property
    def original_bits(self) -> int:
        return self.original_words * self.word_bits

    @property
    def nnz_words(self) -> int:
        return self.nnz

    @property
    def value_bits(self) -> int:
        return self.nnz * self.word_bits

    @property
    def new_storage_bits(self) -> int:
        return self.value_bits + self.metadata_bits

    # byte views round each packed section up independently, matching a
    # bit-packing encoder that emits values and metadata as separate streams
    @property
    def original_bytes(self) -> int:
        return -(-self.original_bits // 8)

    @property
    def value_bytes(self) -> int:
        return -(-self.value_bits // 8)

    @property
    def metadata_bytes(self) -> int:
        return -(-self.metadata_bits // 8)

    @property
    def new_storage_bytes(self) -> int:
        return self.value_bytes + self.metadata_bytes


def _index_bits(extent: int) -> int:
    return max(1, math.ceil(math.log2(extent))) if extent > 1 else 1


def storage_from_mask(mask: np.ndarray, block_m: int, rep: SparseRep,
                      word_bits: int) -> SparseStorageReport:
    """Compressed-storage accounting for an arbitrary element mask."""
    if mask.ndim != 2:
        raise ValidationError("filter mask must be 2-D")
    rows, cols = mask.shape
    nnz = int(mask.sum())
    if rep is SparseRep.ELLPACK_BLOCK:
        if block_m < 2 or block_m & (block_m - 1):
            raise ValidationError("blocked ELLPACK needs a power-of-two block size >= 2")
        metadata = nnz * int(math.log2(block_m))
    elif rep is SparseRep.CSR:
        metadata = nnz * _index_bits(cols) + (rows + 1) * _index_bits(nnz + 1)
    elif rep is SparseRep.CSC:
        metadata = nnz * _index_bits(rows) + (cols + 1) * _index_bits(nnz + 1)
    else:
        raise ValidationError(f"unsupported sparse representation {rep}")
    return SparseStorageReport(rep=rep, rows=rows, cols=cols, word_bits=word_bits,
                               nnz=nnz, metadata_bits=metadata)


def pattern_mask(pattern: SparsityPattern, cols: int) -> np.ndarray:
    """Element mask of the K x cols filter implied by a row pattern."""
    return np.repeat(pattern.row_mask()[:, None], cols, axis=1)


def storage_report(rows: int, cols: int, pattern: SparsityPattern,
                   rep: SparseRep, word_bits: int) -> SparseStorageReport:
    if pattern.total_rows != rows:
        raise ValidationError(
            f"pattern covers {pattern.total_rows} rows but the filter has {rows}"
        )
    return storage_from_mask(pattern_mask(pattern, cols), pattern.block_m,
                             rep, word_bits)


@dataclass(frozen=True)
class SparseLayerEntry:
    layer: str
    report: SparseStorageReport
    pattern: Optional[SparsityPattern] = None

    @property
    def achieved_ratio(self) -> str:
        if self.pattern is None or not self.pattern.block_n:
            m = 1
            n = 1
        else:
            m = self.pattern.block_m
            n = round(self.report.nnz / max(1, self.report.original_words) * m)
        return f"{n}:{m}"


def emit_sparse_report(entries: Iterable[SparseLayerEntry]) -> list[dict]:
    """Rows for SPARSE_REPORT.csv, in layer order."""
    rows = []
    for e in entries:
        rows.append({
            "Layer": e.layer,
            "Representation": e.report.rep.value,
            "OriginalStorageBytes": e.report.original_bytes,
            "CompressedValueBytes": e.report.value_bytes,
            "MetadataBytes": e.report.metadata_bytes,
            "NewStorageBytes": e.report.new_storage_bytes,
        })
    return rows
