"""Main-memory integration: demand-trace interleaving, a banked open-row
DRAM timing model (or imported per-request latencies), and compute replay
against finite read/write request queues.

The workflow is three steps: (1) flatten the per-operand demand traces
into one timestamped read/write request stream, (2) obtain a round-trip
latency for every request, either from the internal DRAM model or from an
external simulator's CSV, (3) replay the compute timeline, issuing
requests in order through bounded queues and counting the stall cycles in
which the array waits for data or queue room.

The internal DRAM model is an open-page policy with one in-flight
transaction per bank: a row hit costs tCL+tBurst, a miss on an open bank
adds tRP+tRCD, a cold bank skips the precharge.  Channels are fully
independent.  It is deliberately simpler than a full DDR controller; the
latency import path exists for when exact behavior matters.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .config import AddressMap, DramConfig, QueueConfig
from .errors import SimulationError, ValidationError
from .systolic import BUBBLE, OPERANDS, DemandTrace


class TransactionKind(Enum):
    READ = "R"
    WRITE = "W"


@dataclass
class MemoryRequest:
    """One timestamped transaction (record view of the bulk arrays)."""

    request_cycle: int
    address: int
    kind: TransactionKind
    completion_cycle: Optional[int] = None


@dataclass(frozen=True)
class RequestTrace:
    """Column-wise request stream, ordered by (cycle, ifmap<filter<ofmap)."""

    cycles: np.ndarray   # int64, non-decreasing
    addresses: np.ndarray  # int64 word addresses
    is_write: np.ndarray   # bool

    def __len__(self) -> int:
        return len(self.cycles)

    def to_records(self) -> list[MemoryRequest]:
        return [
            MemoryRequest(int(c), int(a),
                          TransactionKind.WRITE if w else TransactionKind.READ)
            for c, a, w in zip(self.cycles, self.addresses, self.is_write)
        ]


def interleave_traces(trace: DemandTrace, row_coalesce_bytes: int = 0,
                      word_bytes: int = 2) -> RequestTrace:
    """Merge the three operand streams into one memory trace.

    Ofmap entries become writes, the others reads.  Per-cycle duplicate
    addresses collapse to one request; with ``row_coalesce_bytes`` > 0,
    same-cycle same-kind requests to one memory row also collapse.
    """
    cyc_parts, addr_parts, kind_parts = [], [], []
    # fold blocks cover disjoint, increasing cycle ranges, so ordering and
    # per-cycle dedup are local to a block; no global sort is needed
    for block in trace.blocks():
        cycs, addrs, writes = [], [], []
        for rank, op in enumerate(OPERANDS):
            mat = block.operand(op)
            rows, slots = np.nonzero(mat != BUBBLE)
            if not len(rows):
                continue
            cycs.append(rows)
            addrs.append(mat[rows, slots])
            writes.append(np.full(len(rows), rank == 2, dtype=bool))
            # np.nonzero yields row-major order, so ties are already broken
            # by slot; ranks interleave below via the stable sort
        if not cycs:
            continue
        cyc = np.concatenate(cycs)
        addr = np.concatenate(addrs)
        write = np.concatenate(writes)
        seq = np.arange(len(cyc))
        order = np.lexsort((seq, cyc))  # cycle, then operand rank, then slot
        cyc, addr, write = cyc[order], addr[order], write[order]
        key = cyc * (addr.max() + 1) + addr
        if row_coalesce_bytes > 0:
            row = (addr * word_bytes) // row_coalesce_bytes
            key = (cyc * 2 + write) * (row.max() + 1) + row
        _, first = np.unique(key, return_index=True)
        keep = np.sort(first)
        cyc_parts.append(block.start_cycle + cyc[keep])
        addr_parts.append(addr[keep])
        kind_parts.append(write[keep])
    if not cyc_parts:
        empty = np.empty(0, dtype=np.int64)
        return RequestTrace(empty, empty.copy(), np.empty(0, dtype=bool))
    return RequestTrace(np.concatenate(cyc_parts).astype(np.int64),
                        np.concatenate(addr_parts).astype(np.int64),
                        np.concatenate(kind_parts))


@dataclass(frozen=True)
class ChannelStats:
    requests: int
    row_hits: int
    row_misses: int


@dataclass(frozen=True)
class DramStats:
    total_reads: int
    total_writes: int
    row_hits: int
    row_misses: int
    avg_latency_cycles: float
    throughput_mbps: float
    per_channel: tuple[ChannelStats, ...]


def _decompose(addr_bytes: np.ndarray, cfg: DramConfig):
    """Split byte addresses into (channel, bank, row) per the address map."""
    chunk = addr_bytes // cfg.row_size_bytes
    if cfg.address_map is AddressMap.RO_BA_CH_CO:
        ch = chunk % cfg.channels
        rest = chunk // cfg.channels
        ba = rest % cfg.banks_per_channel
        ro = rest // cfg.banks_per_channel
    else:
        ba = chunk % cfg.banks_per_channel
        rest = chunk // cfg.banks_per_channel
        rows_per_bank = (cfg.capacity_per_channel_mb * (1 << 20)) // (
            cfg.banks_per_channel * cfg.row_size_bytes)
        ro = rest % rows_per_bank
        ch = rest // rows_per_bank
    return ch, ba, ro


def dram_simulate(reqs: RequestTrace, cfg: DramConfig,
                  word_bytes: int = 2) -> tuple[np.ndarray, DramStats]:
    """Round-trip latency (accelerator cycles) for every request, plus stats."""
    n = len(reqs)
    if n == 0:
        return np.empty(0, dtype=np.int64), DramStats(0, 0, 0, 0, 0.0, 0.0, ())
    if np.any(np.diff(reqs.cycles) < 0):
        raise ValidationError("requests must be sorted by request cycle")
    addr_bytes = reqs.addresses * word_bytes
    capacity = cfg.channels * cfg.capacity_per_channel_mb * (1 << 20)
    top = int(addr_bytes.max())
    if top >= capacity:
        raise SimulationError(
            f"address {top} bytes exceeds DRAM capacity {capacity} bytes"
        )
    ch, ba, ro = _decompose(addr_bytes, cfg)
    ratio = cfg.clock_ratio
    arrival = np.ceil(reqs.cycles * ratio).astype(np.int64)

    hit_cost = cfg.t_cl + cfg.t_burst
    cold_cost = cfg.t_rcd + hit_cost
    miss_cost = cfg.t_rp + cold_cost

    completion = np.zeros(n, dtype=np.int64)
    hits = np.zeros(n, dtype=bool)
    group = ch * cfg.banks_per_channel + ba
    order = np.argsort(group, kind="stable")  # within a bank: arrival order
    cuts = np.flatnonzero(np.diff(group[order])) + 1
    for idx in np.split(order, cuts):
        rows = ro[idx]
        same = np.empty(len(idx), dtype=bool)
        same[0] = False
        same[1:] = rows[1:] == rows[:-1]
        service = np.where(same, hit_cost, miss_cost)
        service[0] = cold_cost
        s = np.cumsum(service)
        completion[idx] = s + np.maximum.accumulate(arrival[idx] - (s - service))
        hits[idx] = same

    lat_dram = completion - arrival
    latencies = np.ceil(lat_dram / ratio).astype(np.int64)

    per_channel = []
    for c in range(cfg.channels):
        mask = ch == c
        per_channel.append(ChannelStats(
            requests=int(mask.sum()),
            row_hits=int(hits[mask].sum()),
            row_misses=int((~hits[mask]).sum()),
        ))
    seconds = completion.max() / (cfg.freq_mhz * 1e6)
    bytes_moved = n * word_bytes
    stats = DramStats(
        total_reads=int((~reqs.is_write).sum()),
        total_writes=int(reqs.is_write.sum()),
        row_hits=int(hits.sum()),
        row_misses=int((~hits).sum()),
        avg_latency_cycles=float(latencies.mean()),
        throughput_mbps=bytes_moved / 1e6 / seconds if seconds > 0 else 0.0,
        per_channel=tuple(per_channel),
    )
    return latencies, stats


def export_trace_csv(reqs: RequestTrace) -> str:
    """Handoff format for external memory simulators."""
    lines = ["request_cycle,address,kind"]
    kinds = np.where(reqs.is_write, "W", "R")
    lines += [f"{c},{a},{k}" for c, a, k in zip(reqs.cycles, reqs.addresses, kinds)]
    return "\n".join(lines) + "\n"


def import_latencies(text: str, expected_count: int) -> np.ndarray:
    """Parse a 'request_index,latency_cycles' CSV from an external simulator."""
    latencies = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if lineno == 1 and not parts[0].lstrip("-").isdigit():
            continue  # header
        if len(parts) < 2:
            raise ValidationError(f"line {lineno}: expected 'request_index,latency_cycles'")
        try:
            idx, lat = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValidationError(f"line {lineno}: non-numeric latency row {line!r}") from None
        if idx != len(latencies):
            raise ValidationError(
                f"line {lineno}: request_index {idx} out of order (expected {len(latencies)})"
            )
        latencies.append(lat)
    if len(latencies) != expected_count:
        raise ValidationError(
            f"latency file has {len(latencies)} rows but the trace has "
            f"{expected_count} requests"
        )
    return np.asarray(latencies, dtype=np.int64)


@dataclass(frozen=True)
class StallReport:
    compute_cycles: int
    stall_cycles: int

    @property
    def total_cycles(self) -> int:
        return self.compute_cycles + self.stall_cycles

    @property
    def stall_fraction(self) -> float:
        total = self.total_cycles
        return self.stall_cycles / total if total else 0.0


def replay_with_stalls(reqs: RequestTrace, latencies: np.ndarray,
                       queues: QueueConfig, compute_cycles: int) -> StallReport:
    """Replay the compute timeline against bounded request queues.

    Requests issue strictly in trace order whenever their queue has room;
    a read occupies its slot until the data returns (issue + latency), a
    write clears one cycle after being logged.  Compute cycle k fires only
    once every one of its requests has been issued and all of its reads
    have completed; every other wall cycle is a stall.
    """
    n = len(reqs)
    if len(latencies) != n:
        raise ValidationError(
            f"{len(latencies)} latencies for {n} requests"
        )
    if n and reqs.cycles[-1] >= compute_cycles:
        raise ValidationError("request cycle beyond the compute-cycle range")

    cyc = reqs.cycles
    is_write = reqs.is_write
    lat = latencies
    read_cap, write_cap = queues.read_entries, queues.write_entries

    read_q: list[int] = []   # completion-time heap
    write_q: list[int] = []
    cycle_read_done: dict[int, int] = {}  # cycle -> max read completion
    p = 0
    wall = 0

    def issue(wall: int) -> int:
        """Enqueue pending requests in order while their queue has room."""
        nonlocal p
        while p < n:
            if is_write[p]:
                while write_q and write_q[0] <= wall:
                    heapq.heappop(write_q)
                if len(write_q) >= write_cap:
                    return p
                # posted write: logged by the controller in one cycle; an
                # idealized zero-latency memory logs it instantly
                heapq.heappush(write_q, wall + min(int(lat[p]), 1))
            else:
                while read_q and read_q[0] <= wall:
                    heapq.heappop(read_q)
                if len(read_q) >= read_cap:
                    return p
                done = wall + int(lat[p])
                heapq.heappush(read_q, done)
                c = int(cyc[p])
                if done > cycle_read_done.get(c, -1):
                    cycle_read_done[c] = done
            p += 1
        return p

    for k in range(compute_cycles):
        # an issued read leaves the heap only once complete, so empty heaps
        # with nothing left to issue mean the rest of the run is stall-free
        if p == n and not read_q and not write_q:
            wall += compute_cycles - k
            break
        end_k = p
        while end_k < n and cyc[end_k] == k:
            end_k += 1
        while True:
            while read_q and read_q[0] <= wall:
                heapq.heappop(read_q)
            while write_q and write_q[0] <= wall:
                heapq.heappop(write_q)
            issue(wall)
            # everything before end_k belongs to cycles <= k and must be in
            # flight before k fires; k's own reads must also have returned
            if p >= end_k and cycle_read_done.get(k, -1) <= wall:
                cycle_read_done.pop(k, None)
                wall += 1
                break
            # both heaps were drained through `wall`, so every remaining
            # completion lies strictly in the future and the jump is real
            pending = [q[0] for q in (read_q, write_q) if q]
            if not pending:
                raise SimulationError("replay deadlock: stalled with empty queues")
            wall = min(pending)
    return StallReport(compute_cycles=compute_cycles,
                       stall_cycles=wall - compute_cycles)


def channel_sweep(reqs: RequestTrace, cfg: DramConfig,
                  channel_counts: Iterable[int],
                  word_bytes: int = 2) -> list[tuple[int, float]]:
    """Memory throughput (MB/s) for each DRAM channel count."""
    out = []
    for channels in channel_counts:
        _, stats = dram_simulate(reqs, replace(cfg, channels=channels), word_bytes)
        out.append((channels, stats.throughput_mbps))
    return out
