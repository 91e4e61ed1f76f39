"""Workload topology parsing and convolution-to-GEMM lowering.

Two CSV layouts are accepted, one layer per row, trailing commas tolerated:

GEMM::

    Layer Name, M, N, K, Sparsity,
    GEMM_1, 3, 5, 16, 3:4,

Conv::

    Layer name, IFMAP Height, IFMAP Width, Filter Height, Filter Width,
    Channels, Num Filter, Strides,

The Sparsity column holds per-layer N:M ratios and may be absent, in which
case the layer is treated as dense.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import TopologyParseError, ValidationError


class LayerKind(Enum):
    CONV = "conv"
    GEMM = "gemm"


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: LayerKind
    # Conv fields
    ifmap_h: int = 0
    ifmap_w: int = 0
    filt_h: int = 0
    filt_w: int = 0
    channels: int = 0
    num_filters: int = 0
    stride: int = 1
    # Gemm fields
    gemm_m: int = 0
    gemm_n: int = 0
    gemm_k: int = 0
    # (N, M) of an N:M ratio, None when dense
    sparsity_ratio: Optional[tuple[int, int]] = None


@dataclass(frozen=True)
class GemmOp:
    """A GEMM workload: output M x N with inner dimension K."""

    m: int
    n: int
    k: int
    source_layer: str = ""

    def __post_init__(self):
        if min(self.m, self.n, self.k) < 1:
            raise ValidationError(
                f"GEMM dimensions must be >= 1, got ({self.m}, {self.n}, {self.k})"
            )

    @property
    def macs(self) -> int:
        return self.m * self.n * self.k


def _parse_ratio(token: str, lineno: int) -> Optional[tuple[int, int]]:
    token = token.strip()
    if not token:
        return None
    parts = token.split(":")
    if len(parts) != 2:
        raise TopologyParseError(f"line {lineno}: malformed N:M sparsity token {token!r}")
    try:
        n, m = int(parts[0]), int(parts[1])
    except ValueError:
        raise TopologyParseError(f"line {lineno}: non-numeric N:M sparsity token {token!r}") from None
    if n < 1 or m < 1 or n > m:
        raise ValidationError(f"line {lineno}: sparsity ratio must satisfy 1 <= N <= M, got {n}:{m}")
    return (n, m)


def _fields(line: str) -> list[str]:
    parts = [p.strip() for p in line.split(",")]
    while parts and not parts[-1]:
        parts.pop()
    return parts


def _int_field(value: str, what: str, lineno: int) -> int:
    try:
        num = int(value)
    except ValueError:
        raise TopologyParseError(f"line {lineno}: {what} must be an integer, got {value!r}") from None
    if num < 1:
        raise ValidationError(f"line {lineno}: {what} must be >= 1, got {num}")
    return num


def parse_topology(text: str, kind: LayerKind) -> list[LayerSpec]:
    """Parse topology CSV text into an ordered list of LayerSpec."""
    lines = [ln for ln in text.splitlines()]
    body = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not body:
        raise TopologyParseError("topology file is empty")
    body = body[1:]  # drop header row

    layers: list[LayerSpec] = []
    for lineno, line in body:
        parts = _fields(line)
        if not parts:
            continue
        name = parts[0]
        if kind is LayerKind.GEMM:
            if len(parts) not in (4, 5):
                raise TopologyParseError(
                    f"line {lineno}: GEMM rows need 4 or 5 columns, got {len(parts)}"
                )
            m = _int_field(parts[1], "M", lineno)
            n = _int_field(parts[2], "N", lineno)
            k = _int_field(parts[3], "K", lineno)
            ratio = _parse_ratio(parts[4], lineno) if len(parts) == 5 else None
            layers.append(LayerSpec(name=name, kind=kind, gemm_m=m, gemm_n=n,
                                    gemm_k=k, sparsity_ratio=ratio))
        else:
            if len(parts) not in (8, 9):
                raise TopologyParseError(
                    f"line {lineno}: conv rows need 8 or 9 columns, got {len(parts)}"
                )
            vals = [_int_field(v, f"column {i + 2}", lineno) for i, v in enumerate(parts[1:8])]
            ratio = _parse_ratio(parts[8], lineno) if len(parts) == 9 else None
            layers.append(LayerSpec(
                name=name, kind=kind,
                ifmap_h=vals[0], ifmap_w=vals[1], filt_h=vals[2], filt_w=vals[3],
                channels=vals[4], num_filters=vals[5], stride=vals[6],
                sparsity_ratio=ratio,
            ))
    return layers


def lower_conv_to_gemm(layer: LayerSpec) -> GemmOp:
    """im2col lowering: one output pixel per GEMM row, one filter per column."""
    if layer.kind is not LayerKind.CONV:
        raise ValidationError(f"layer {layer.name} is not a convolution")
    if layer.filt_h > layer.ifmap_h or layer.filt_w > layer.ifmap_w:
        raise ValidationError(
            f"layer {layer.name}: filter {layer.filt_h}x{layer.filt_w} larger than "
            f"ifmap {layer.ifmap_h}x{layer.ifmap_w}"
        )
    out_h = (layer.ifmap_h - layer.filt_h) // layer.stride + 1
    out_w = (layer.ifmap_w - layer.filt_w) // layer.stride + 1
    return GemmOp(
        m=out_h * out_w,
        n=layer.num_filters,
        k=layer.filt_h * layer.filt_w * layer.channels,
        source_layer=layer.name,
    )


def layer_to_gemm(layer: LayerSpec) -> GemmOp:
    if layer.kind is LayerKind.GEMM:
        return GemmOp(m=layer.gemm_m, n=layer.gemm_n, k=layer.gemm_k,
                      source_layer=layer.name)
    return lower_conv_to_gemm(layer)
