"""Experiment reports and their CSV / JSON encodings.

Floats are written with ``repr`` (shortest round-trip decimal), so the two
encodings carry bit-identical values.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field

from . import __version__

SCHEMA = "1"


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if hasattr(v, "item"):  # numpy scalars
        return _clean(v.item())
    return v


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    rows: list[dict]
    duration_s: float = 0.0
    streams: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    version: str = f"v{__version__}"

    def clean_rows(self) -> list[dict]:
        return [{k: _clean(v) for k, v in r.items()} for r in self.rows]

    def records_json(self) -> str:
        """Canonical encoding of the metric records alone."""
        return json.dumps(self.clean_rows(), sort_keys=False)

    def to_json(self) -> str:
        return json.dumps({
            "schema": SCHEMA,
            "experiment": self.experiment,
            "version": self.version,
            "config": self.config,
            "rows": self.clean_rows(),
            "streams": self.streams,
            "notes": self.notes,
            "duration_s": self.duration_s,
        }, indent=1) + "\n"

    def to_csv(self) -> str:
        rows = self.clean_rows()
        cols: list[str] = []
        for r in rows:
            cols.extend(k for k in r if k not in cols)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_csv_cell(r.get(c)) for c in cols])
        return buf.getvalue()

    def write(self, path: str, fmt: str | None = None) -> None:
        fmt = fmt or ("csv" if path.endswith(".csv") else "json")
        text = self.to_csv() if fmt == "csv" else self.to_json()
        write_atomic(path, text)


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_csv_rows(text: str) -> list[dict]:
    """Parse a report CSV back into typed rows (numbers, booleans, None)."""
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        row = {}
        for k, v in r.items():
            if v == "":
                row[k] = None
            elif v in ("true", "false"):
                row[k] = v == "true"
            else:
                try:
                    row[k] = int(v)
                except ValueError:
                    try:
                        row[k] = float(v)
                    except ValueError:
                        row[k] = v
        out.append(row)
    return out


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
