#!/usr/bin/env python3
"""Regenerate the bundled sweep shipped with the harness.

Runs a tiny workload through the simulator CLI once per figure family and
merges everything into one index at src/sasim_harness/data/bundled/.
Needs `sasim` on PATH.
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sasim_harness.index import read_index, write_index  # noqa: E402
from sasim_harness.runner import sweep  # noqa: E402
from sasim_harness.sweep import SweepSpec, Workload  # noqa: E402

BUNDLE = Path(__file__).resolve().parents[1] / "src/sasim_harness/data/bundled"

BASE_CFG = """\
[architecture]
ArrayHeight = 4
ArrayWidth = 4
Dataflow = ws
[sparsity]
SparsitySupport = false
SparseRep = ellpack_block
BlockSize = 4
[memory]
Channels = 1
ReadQueueEntries = 64
WriteQueueEntries = 64
[layout]
NumBanks = 4
BandwidthPerBank = 4
"""

TOPOLOGY = """\
Layer Name, M, N, K, Sparsity,
L0, 8, 8, 16,,
L1, 4, 12, 8,,
"""


def main() -> int:
    if BUNDLE.exists():
        shutil.rmtree(BUNDLE)
    BUNDLE.mkdir(parents=True)
    cfg = BUNDLE / "base.cfg"
    cfg.write_text(BASE_CFG)
    topo = BUNDLE / "tiny_gemm.csv"
    topo.write_text(TOPOLOGY)
    workload = Workload(name="tiny", topology=topo)

    def spec(tag, **kwargs):
        defaults = dict(base_config=cfg, out_dir=BUNDLE / tag,
                        workloads=[workload], seed=0, jobs=2, tag=tag)
        defaults.update(kwargs)
        return SweepSpec(**defaults)

    sweeps = [
        spec("tradeoff", analytical={"m": 256, "n": 256, "k": 256, "cores": 4,
                                     "array": (4, 4)},
             grid={"cores": [4, 8]}),
        spec("sparsity-cycles", stages="compute,memory",
             grid={"sparsity": ["1:4", "2:4", "4:4"], "sram_kb": [32, 64]}),
        spec("storage", stages="compute,sparsity",
             grid={"sparsity": ["1:4", "2:4", "3:4"]}),
        spec("blocksize",
             grid={"array": [(4, 4), (8, 8)],
                   "sparsity": ["1:4", "2:4", "4:4", "1:8", "4:8", "8:8"]}),
        spec("channels", stages="compute,memory", grid={"channels": [1, 2, 4]}),
        spec("stalls", stages="compute,memory", grid={"queue": [32, 128, 512]}),
        spec("layout", stages="compute,layout",
             grid={"banks": [1, 2, 4], "dataflow": ["ws"]}),
        spec("energy", stages="compute,energy",
             grid={"dataflow": ["ws", "os"], "array": [(4, 4), (8, 8)]}),
    ]

    merged = []
    for s in sweeps:
        index_path = sweep(s)
        for entry in read_index(index_path):
            entry.report_paths = [f"{s.tag}/{rel}" for rel in entry.report_paths]
            merged.append(entry)
        index_path.unlink()
    write_index(BUNDLE / "index.csv", merged)
    failed = [e.run_id for e in merged if not e.ok]
    print(f"bundled {len(merged)} runs at {BUNDLE}")
    if failed:
        print("FAILED runs:", failed)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
