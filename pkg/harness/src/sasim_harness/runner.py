"""Run the simulator CLI once per grid tuple and build the sweep index.

Failures of individual tuples are recorded as ``failed`` rows and the
sweep continues; only a missing simulator binary aborts.
"""

from __future__ import annotations

import shutil
import subprocess
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .index import IndexEntry, write_index
from .sweep import (SweepSpec, config_overrides, patch_config,
                    patch_topology_sparsity, run_id_of)

SASIM = "sasim"


class MissingSimulatorError(RuntimeError):
    pass


def _run_one(spec: SweepSpec, index: int, params: dict) -> IndexEntry:
    run_id = run_id_of(index, params)
    run_dir = spec.out_dir / run_id
    run_dir.mkdir(parents=True, exist_ok=True)

    workload = next(w for w in spec.workloads if w.name == params["workload"])
    topo_text = workload.topology.read_text()
    if "sparsity" in params:
        topo_text = patch_topology_sparsity(topo_text, params["sparsity"])
    topo_path = run_dir / "topology.csv"
    topo_path.write_text(topo_text)

    cfg_text = patch_config(spec.base_config.read_text(), config_overrides(params))
    cfg_path = run_dir / "config.cfg"
    cfg_path.write_text(cfg_text)

    out_dir = run_dir / "reports"
    cmd = [SASIM, "run", "--config", str(cfg_path), "--topology", str(topo_path),
           "--out", str(out_dir), "--stages", spec.stages,
           "--seed", str(spec.seed)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        (run_dir / "error.log").write_text(proc.stderr)
        return IndexEntry(run_id=run_id, params=params, report_paths=[],
                          status="failed")
    reports = sorted(p.relative_to(spec.out_dir).as_posix()
                     for p in out_dir.glob("*.csv"))
    return IndexEntry(run_id=run_id, params=params, report_paths=reports,
                      status="ok")


def _run_analytical(spec: SweepSpec, index: int, params: dict) -> IndexEntry:
    run_id = run_id_of(index, params)
    run_dir = spec.out_dir / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    an = dict(spec.analytical)
    for key in ("m", "n", "k", "cores"):
        if key in params:
            an[key] = params[key]
    rows, cols = an.get("array", (8, 8))
    out_csv = run_dir / "sweep.csv"
    cmd = [SASIM, "analytical", "--m", str(an["m"]), "--n", str(an["n"]),
           "--k", str(an["k"]), "--cores", str(an["cores"]),
           "--array-rows", str(rows), "--array-cols", str(cols),
           "--out", str(out_csv)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        (run_dir / "error.log").write_text(proc.stderr)
        return IndexEntry(run_id=run_id, params=params, report_paths=[],
                          status="failed")
    return IndexEntry(run_id=run_id, params=params,
                      report_paths=[out_csv.relative_to(spec.out_dir).as_posix()],
                      status="ok")


def sweep(spec: SweepSpec) -> Path:
    """Execute every tuple; returns the path of the written index CSV."""
    if shutil.which(SASIM) is None:
        raise MissingSimulatorError(
            f"simulator binary {SASIM!r} not found on PATH; install the "
            f"primary package first")
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    tuples = spec.tuples()
    runner = _run_analytical if spec.analytical else _run_one
    with ThreadPoolExecutor(max_workers=max(1, spec.jobs)) as pool:
        entries = list(pool.map(
            lambda pair: runner(spec, *pair), enumerate(tuples)))
    index_path = spec.out_dir / "index.csv"
    write_index(index_path, entries)
    return index_path
