"""Run configuration: data model, INI-style parser and serializer.

A config file is a sectioned key=value document::

    [architecture]
    ArrayHeight = 8          # PE rows
    ArrayWidth  = 8          # PE columns
    Dataflow    = ws

    [sparsity]
    SparsitySupport  = true
    SparseRep        = ellpack_block
    OptimizedMapping = false
    BlockSize        = 4

Unknown keys are rejected so typos do not silently fall back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .errors import ConfigParseError, ValidationError


class Dataflow(Enum):
    IS = "is"
    WS = "ws"
    OS = "os"


class PartitionScheme(Enum):
    SPATIAL = "spatial"
    ST1 = "st1"
    ST2 = "st2"


class SparseRep(Enum):
    CSR = "csr"
    CSC = "csc"
    ELLPACK_BLOCK = "ellpack_block"


class AddressMap(Enum):
    RO_BA_CH_CO = "robachco"
    CH_RO_BA_CO = "chrobaco"


@dataclass(frozen=True)
class CoreProfile:
    """Shape and fixed-latency properties of one tensor core."""

    array_rows: int
    array_cols: int
    simd_len: int = 0
    simd_latency_cycles: int = 0
    nop_hops: int = 0


@dataclass(frozen=True)
class SparsityConfig:
    enabled: bool = False
    rep: SparseRep = SparseRep.ELLPACK_BLOCK
    optimized_mapping: bool = False  # row-wise N:M when true, layer-wise otherwise
    block_size: int = 4


@dataclass(frozen=True)
class DramConfig:
    channels: int = 1
    banks_per_channel: int = 8
    row_size_bytes: int = 1024
    capacity_per_channel_mb: int = 512  # 4 Gb per channel
    freq_mhz: int = 2400
    t_rcd: int = 16
    t_rp: int = 16
    t_cl: int = 16
    t_burst: int = 4
    address_map: AddressMap = AddressMap.RO_BA_CH_CO
    clock_ratio: float = 1.0  # DRAM cycles per accelerator cycle
    row_coalescing: bool = False


@dataclass(frozen=True)
class QueueConfig:
    read_entries: int = 128
    write_entries: int = 128


@dataclass(frozen=True)
class LayoutConfig:
    num_banks: int = 8
    bandwidth_per_bank: int = 16
    ports_per_bank: int = 1
    layout_file: str = ""


@dataclass(frozen=True)
class EnergyConfig:
    table_path: str = ""  # empty -> bundled placeholder table
    row_size_elems: int = 64
    bank_size_rows: int = 4
    clock_gating: bool = True
    clock_mhz: int = 1000


@dataclass(frozen=True)
class SimConfig:
    array_rows: int
    array_cols: int
    dataflow: Dataflow
    ifmap_sram_kb: int = 256
    filter_sram_kb: int = 256
    ofmap_sram_kb: int = 256
    word_bytes: int = 2
    ifmap_base: int = 0
    filter_base: int = 10_000_000
    ofmap_base: int = 20_000_000
    num_cores: int = 1
    partition: PartitionScheme = PartitionScheme.SPATIAL
    grid_rows: int = 1  # Pr
    grid_cols: int = 1  # Pc
    nop_hop_latency_cycles: int = 0
    core_profiles: tuple[CoreProfile, ...] = ()
    sparsity: SparsityConfig = field(default_factory=SparsityConfig)
    dram: DramConfig = field(default_factory=DramConfig)
    queues: QueueConfig = field(default_factory=QueueConfig)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)

    def validate(self) -> "SimConfig":
        if self.array_rows < 1 or self.array_cols < 1:
            raise ValidationError("array dimensions must be >= 1")
        if min(self.ifmap_sram_kb, self.filter_sram_kb, self.ofmap_sram_kb) < 1:
            raise ValidationError("SRAM sizes must be at least 1 KiB")
        if self.num_cores < 1:
            raise ValidationError("NumCores must be >= 1")
        if self.grid_rows * self.grid_cols != self.num_cores:
            raise ValidationError(
                f"partition grid Pr*Pc = {self.grid_rows}*{self.grid_cols} "
                f"does not equal NumCores = {self.num_cores}"
            )
        if self.core_profiles and len(self.core_profiles) != self.num_cores:
            raise ValidationError(
                f"{len(self.core_profiles)} core profiles given for "
                f"{self.num_cores} cores"
            )
        if self.sparsity.enabled:
            bs = self.sparsity.block_size
            if bs < 2 or bs & (bs - 1):
                raise ValidationError("BlockSize must be a power of two >= 2")
        if self.queues.read_entries < 1 or self.queues.write_entries < 1:
            raise ValidationError("request queue entries must be >= 1")
        d = self.dram
        if min(d.t_rcd, d.t_rp, d.t_cl, d.t_burst) < 1:
            raise ValidationError("DRAM timings must be >= 1")
        cap = d.capacity_per_channel_mb
        if cap < 1 or cap & (cap - 1):
            raise ValidationError("DRAM channel capacity must be a power of two (MB)")
        return self


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_MANDATORY = ("ArrayHeight", "ArrayWidth", "Dataflow")

_BOOL_WORDS = {"true": True, "false": False, "on": True, "off": False,
               "yes": True, "no": False, "1": True, "0": False,
               "enable": True, "disable": False}


def _strip_comment(line: str) -> str:
    pos = line.find("#")
    return line if pos < 0 else line[:pos]


def _scan(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    """Scan sections into {section: {key: (raw_value, line_no)}}."""
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigParseError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigParseError(f"line {lineno}: key outside of any [section]")
        key, value = line.split("=", 1)
        sections[current][key.strip()] = (value.strip(), lineno)
    return sections


class _Section:
    def __init__(self, name: str, entries: dict[str, tuple[str, int]]):
        self.name = name
        self.entries = dict(entries)

    def take(self, key: str, default=None):
        return self.entries.pop(key, (default, None))

    def take_int(self, key: str, default: Optional[int]) -> Optional[int]:
        raw, lineno = self.take(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigParseError(
                f"line {lineno}: value for {key} must be an integer, got {raw!r}"
            ) from None

    def take_float(self, key: str, default: float) -> float:
        raw, lineno = self.take(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigParseError(
                f"line {lineno}: value for {key} must be numeric, got {raw!r}"
            ) from None

    def take_bool(self, key: str, default: bool) -> bool:
        raw, lineno = self.take(key)
        if raw is None:
            return default
        word = raw.lower()
        if word not in _BOOL_WORDS:
            raise ConfigParseError(f"line {lineno}: value for {key} must be true/false, got {raw!r}")
        return _BOOL_WORDS[word]

    def take_str(self, key: str, default: str) -> str:
        raw, _ = self.take(key)
        return default if raw is None else raw

    def take_enum(self, key: str, enum_cls, default):
        raw, lineno = self.take(key)
        if raw is None:
            return default
        word = raw.lower().replace("-", "").replace("_", "") \
            if enum_cls is AddressMap else raw.lower()
        try:
            return enum_cls(word)
        except ValueError:
            options = ", ".join(e.value for e in enum_cls)
            raise ConfigParseError(
                f"line {lineno}: value for {key} must be one of [{options}], got {raw!r}"
            ) from None

    def reject_unknown(self) -> None:
        if self.entries:
            key, (_, lineno) = next(iter(self.entries.items()))
            raise ConfigParseError(f"line {lineno}: unknown key {key!r} in section [{self.name}]")


def _parse_core_profiles(raw: str, lineno) -> tuple[CoreProfile, ...]:
    """Profiles are ';'-separated 'R,C[,simd_len,simd_latency,nop_hops]' tuples."""
    profiles = []
    for part in raw.split(";"):
        part = part.strip()
        if not part:
            continue
        fields = [f.strip() for f in part.split(",")]
        if len(fields) not in (2, 5):
            raise ConfigParseError(
                f"line {lineno}: core profile {part!r} needs 2 or 5 comma-separated fields"
            )
        try:
            nums = [int(f) for f in fields]
        except ValueError:
            raise ConfigParseError(f"line {lineno}: non-numeric core profile field in {part!r}") from None
        if len(nums) == 2:
            nums += [0, 0, 0]
        profiles.append(CoreProfile(*nums))
    return tuple(profiles)


def parse_config(text: str) -> SimConfig:
    """Parse a config document into a validated SimConfig."""
    sections = _scan(text)
    known = {"architecture", "multicore", "sparsity", "memory", "layout", "energy"}
    for name in sections:
        if name not in known:
            raise ConfigParseError(f"unknown section [{name}]")

    arch = _Section("architecture", sections.get("architecture", {}))
    for key in _MANDATORY:
        if key not in arch.entries:
            raise ConfigParseError(f"missing mandatory key {key} in [architecture]")

    rows = arch.take_int("ArrayHeight", None)
    cols = arch.take_int("ArrayWidth", None)
    dataflow = arch.take_enum("Dataflow", Dataflow, None)
    ifmap_kb = arch.take_int("IfmapSramSzkB", 256)
    filter_kb = arch.take_int("FilterSramSzkB", 256)
    ofmap_kb = arch.take_int("OfmapSramSzkB", 256)
    word_bytes = arch.take_int("WordBytes", 2)
    ifmap_base = arch.take_int("IfmapBase", 0)
    filter_base = arch.take_int("FilterBase", 10_000_000)
    ofmap_base = arch.take_int("OfmapBase", 20_000_000)
    arch.reject_unknown()

    mc = _Section("multicore", sections.get("multicore", {}))
    num_cores = mc.take_int("NumCores", 1)
    scheme = mc.take_enum("Partition", PartitionScheme, PartitionScheme.SPATIAL)
    grid_rows = mc.take_int("Pr", 1)
    grid_cols = mc.take_int("Pc", 1)
    hop_latency = mc.take_int("NopHopLatencyCycles", 0)
    raw_profiles, profiles_line = mc.take("CoreProfiles")
    profiles = _parse_core_profiles(raw_profiles, profiles_line) if raw_profiles else ()
    mc.reject_unknown()

    sp = _Section("sparsity", sections.get("sparsity", {}))
    sparsity = SparsityConfig(
        enabled=sp.take_bool("SparsitySupport", False),
        rep=sp.take_enum("SparseRep", SparseRep, SparseRep.ELLPACK_BLOCK),
        optimized_mapping=sp.take_bool("OptimizedMapping", False),
        block_size=sp.take_int("BlockSize", 4),
    )
    sp.reject_unknown()

    mem = _Section("memory", sections.get("memory", {}))
    dram = DramConfig(
        channels=mem.take_int("Channels", 1),
        banks_per_channel=mem.take_int("BanksPerChannel", 8),
        row_size_bytes=mem.take_int("RowSizeBytes", 1024),
        capacity_per_channel_mb=mem.take_int("CapacityPerChannelMB", 512),
        freq_mhz=mem.take_int("FreqMHz", 2400),
        t_rcd=mem.take_int("tRCD", 16),
        t_rp=mem.take_int("tRP", 16),
        t_cl=mem.take_int("tCL", 16),
        t_burst=mem.take_int("tBurst", 4),
        address_map=mem.take_enum("AddressMap", AddressMap, AddressMap.RO_BA_CH_CO),
        clock_ratio=mem.take_float("ClockRatio", 1.0),
        row_coalescing=mem.take_bool("RowCoalescing", False),
    )
    queues = QueueConfig(
        read_entries=mem.take_int("ReadQueueEntries", 128),
        write_entries=mem.take_int("WriteQueueEntries", 128),
    )
    mem.reject_unknown()

    lay = _Section("layout", sections.get("layout", {}))
    layout = LayoutConfig(
        num_banks=lay.take_int("NumBanks", 8),
        bandwidth_per_bank=lay.take_int("BandwidthPerBank", 16),
        ports_per_bank=lay.take_int("PortsPerBank", 1),
        layout_file=lay.take_str("LayoutFile", ""),
    )
    lay.reject_unknown()

    en = _Section("energy", sections.get("energy", {}))
    energy = EnergyConfig(
        table_path=en.take_str("EnergyTablePath", ""),
        row_size_elems=en.take_int("RowSizeElems", 64),
        bank_size_rows=en.take_int("BankSizeRows", 4),
        clock_gating=en.take_bool("ClockGating", True),
        clock_mhz=en.take_int("ClockMhz", 1000),
    )
    en.reject_unknown()

    cfg = SimConfig(
        array_rows=rows, array_cols=cols, dataflow=dataflow,
        ifmap_sram_kb=ifmap_kb, filter_sram_kb=filter_kb, ofmap_sram_kb=ofmap_kb,
        word_bytes=word_bytes,
        ifmap_base=ifmap_base, filter_base=filter_base, ofmap_base=ofmap_base,
        num_cores=num_cores, partition=scheme,
        grid_rows=grid_rows, grid_cols=grid_cols,
        nop_hop_latency_cycles=hop_latency, core_profiles=profiles,
        sparsity=sparsity, dram=dram, queues=queues, layout=layout, energy=energy,
    )
    return cfg.validate()


def serialize_config(cfg: SimConfig) -> str:
    """Render a SimConfig back to config-file text (parse round-trips)."""
    lines = [
        "[architecture]",
        f"ArrayHeight = {cfg.array_rows}",
        f"ArrayWidth = {cfg.array_cols}",
        f"Dataflow = {cfg.dataflow.value}",
        f"IfmapSramSzkB = {cfg.ifmap_sram_kb}",
        f"FilterSramSzkB = {cfg.filter_sram_kb}",
        f"OfmapSramSzkB = {cfg.ofmap_sram_kb}",
        f"WordBytes = {cfg.word_bytes}",
        f"IfmapBase = {cfg.ifmap_base}",
        f"FilterBase = {cfg.filter_base}",
        f"OfmapBase = {cfg.ofmap_base}",
        "",
        "[multicore]",
        f"NumCores = {cfg.num_cores}",
        f"Partition = {cfg.partition.value}",
        f"Pr = {cfg.grid_rows}",
        f"Pc = {cfg.grid_cols}",
        f"NopHopLatencyCycles = {cfg.nop_hop_latency_cycles}",
    ]
    if cfg.core_profiles:
        rendered = "; ".join(
            f"{p.array_rows},{p.array_cols},{p.simd_len},{p.simd_latency_cycles},{p.nop_hops}"
            for p in cfg.core_profiles
        )
        lines.append(f"CoreProfiles = {rendered}")
    lines += [
        "",
        "[sparsity]",
        f"SparsitySupport = {str(cfg.sparsity.enabled).lower()}",
        f"SparseRep = {cfg.sparsity.rep.value}",
        f"OptimizedMapping = {str(cfg.sparsity.optimized_mapping).lower()}",
        f"BlockSize = {cfg.sparsity.block_size}",
        "",
        "[memory]",
        f"Channels = {cfg.dram.channels}",
        f"BanksPerChannel = {cfg.dram.banks_per_channel}",
        f"RowSizeBytes = {cfg.dram.row_size_bytes}",
        f"CapacityPerChannelMB = {cfg.dram.capacity_per_channel_mb}",
        f"FreqMHz = {cfg.dram.freq_mhz}",
        f"tRCD = {cfg.dram.t_rcd}",
        f"tRP = {cfg.dram.t_rp}",
        f"tCL = {cfg.dram.t_cl}",
        f"tBurst = {cfg.dram.t_burst}",
        f"AddressMap = {cfg.dram.address_map.value}",
        f"ClockRatio = {cfg.dram.clock_ratio}",
        f"RowCoalescing = {str(cfg.dram.row_coalescing).lower()}",
        f"ReadQueueEntries = {cfg.queues.read_entries}",
        f"WriteQueueEntries = {cfg.queues.write_entries}",
        "",
        "[layout]",
        f"NumBanks = {cfg.layout.num_banks}",
        f"BandwidthPerBank = {cfg.layout.bandwidth_per_bank}",
        f"PortsPerBank = {cfg.layout.ports_per_bank}",
    ]
    if cfg.layout.layout_file:
        lines.append(f"LayoutFile = {cfg.layout.layout_file}")
    lines += [
        "",
        "[energy]",
        f"RowSizeElems = {cfg.energy.row_size_elems}",
        f"BankSizeRows = {cfg.energy.bank_size_rows}",
        f"ClockGating = {str(cfg.energy.clock_gating).lower()}",
        f"ClockMhz = {cfg.energy.clock_mhz}",
    ]
    if cfg.energy.table_path:
        lines.append(f"EnergyTablePath = {cfg.energy.table_path}")
    return "\n".join(lines) + "\n"


def with_array(cfg: SimConfig, rows: int, cols: int) -> SimConfig:
    """Copy of cfg with a different array shape (used for per-core shapes)."""
    return replace(cfg, array_rows=rows, array_cols=cols)
