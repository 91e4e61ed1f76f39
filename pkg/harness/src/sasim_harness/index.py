"""The sweep index: one row per run, the contract between sweep and plot.

CSV columns: ``run_id,param_tuple,report_paths,status``.  The parameter
tuple is a ';'-joined ``key=value`` list, report paths are ';'-joined and
relative to the index file's directory, status is ``ok`` or ``failed``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

HEADER = ["run_id", "param_tuple", "report_paths", "status"]


@dataclass
class IndexEntry:
    run_id: str
    params: dict[str, str]
    report_paths: list[str]
    status: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def param(self, key: str, default: str = "") -> str:
        return self.params.get(key, default)


def format_params(params: dict) -> str:
    def render(value):
        if isinstance(value, (tuple, list)):
            return "x".join(str(v) for v in value)
        return str(value)

    return ";".join(f"{k}={render(v)}" for k, v in sorted(params.items()))


def parse_params(text: str) -> dict[str, str]:
    out = {}
    for part in text.split(";"):
        if "=" in part:
            key, value = part.split("=", 1)
            out[key] = value
    return out


def write_index(path: Path, entries: list[IndexEntry]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(HEADER)
    for e in entries:
        writer.writerow([e.run_id, format_params(e.params),
                         ";".join(e.report_paths), e.status])
    path.write_text(buf.getvalue())


def read_index(path: Path) -> list[IndexEntry]:
    entries = []
    with path.open() as fh:
        for row in csv.DictReader(fh):
            entries.append(IndexEntry(
                run_id=row["run_id"],
                params=parse_params(row["param_tuple"]),
                report_paths=[p for p in row["report_paths"].split(";") if p],
                status=row["status"],
            ))
    return entries


def report_path(index_path: Path, entry: IndexEntry, name: str) -> Path:
    """Absolute path of one of the entry's reports, by file name."""
    for rel in entry.report_paths:
        if Path(rel).name == name:
            return index_path.parent / rel
    raise FileNotFoundError(f"run {entry.run_id} has no report {name}")
