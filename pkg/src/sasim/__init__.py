"""sasim: a cycle-accurate systolic-array accelerator simulator."""

__version__ = "0.1.0"

from .config import (AddressMap, CoreProfile, Dataflow, DramConfig, EnergyConfig,
                     LayoutConfig, PartitionScheme, QueueConfig, SimConfig,
                     SparseRep, SparsityConfig, parse_config, serialize_config)
from .topology import (GemmOp, LayerKind, LayerSpec, layer_to_gemm,
                       lower_conv_to_gemm, parse_topology)
from .systolic import (BUBBLE, ComputeReport, DemandTrace, MappedDims,
                       analytical_cycles, fold_latency, generate_demand_trace,
                       map_gemm, simulate_compute)
from .multicore import (L2Footprint, PartitionPlan, analytical_partition_cycles,
                        l2_footprint, partition_workload, simulate_multicore,
                        split_even, split_weighted, sweep_partitions)
from .sparsity import (SparsityMode, SparsityPattern, SparseStorageReport,
                       materialize_pattern, sparse_mapped_dims, storage_from_mask,
                       storage_report)
from .memory import (DramStats, MemoryRequest, RequestTrace, StallReport,
                     TransactionKind, channel_sweep, dram_simulate,
                     export_trace_csv, import_latencies, interleave_traces,
                     replay_with_stalls)
from .layout import (LayoutReport, LayoutSpec, Placement, cycle_conflicts,
                     default_gemm_spec, evaluate_layout, locate)
from .energy import (ActionCounts, EnergyReport, EnergyTable, classify_repeats,
                     collect_action_counts, compute_energy, count_mac_actions,
                     count_spad_actions, count_sram_actions, export_action_counts,
                     parse_energy_table)
