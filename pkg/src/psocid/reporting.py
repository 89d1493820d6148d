"""Byte-stable CSV / JSON-lines output and run manifests."""

from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import io
import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from . import __version__

FORMATS = ("csv", "jsonl")


def _plain(value: Any) -> Any:
    """Convert a value to a JSON-native type."""
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (bytes, bytearray)):
        return value.hex()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return as_row(value)
    return value


def as_row(item: Any) -> dict:
    if isinstance(item, dict):
        row = item
    elif hasattr(item, "to_dict"):
        row = item.to_dict()
    elif dataclasses.is_dataclass(item):
        row = {f.name: getattr(item, f.name) for f in dataclasses.fields(item)}
    elif hasattr(item, "_asdict"):
        row = item._asdict()
    else:
        raise TypeError(f"cannot tabulate {type(item).__name__}")
    return {k: _plain(v) for k, v in row.items()}


def format_cell(value: Any) -> str:
    """Shortest round-trip text for floats; lowercase booleans; blank for None."""
    value = _plain(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value)
    return str(value)


def render(rows: Sequence[dict], fmt: str, columns: Sequence[str], metadata: Optional[dict] = None) -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    if fmt == "csv":
        if metadata is not None:
            buf.write("# " + json.dumps({"metadata": metadata}, sort_keys=True) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(c)) for c in columns])
    else:
        if metadata is not None:
            buf.write(json.dumps({"metadata": metadata}, sort_keys=True) + "\n")
        for row in rows:
            buf.write(json.dumps({c: row.get(c) for c in columns}) + "\n")
    return buf.getvalue()


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    artifact_version: str = __version__
    started: float = field(default_factory=time.time)
    finished: Optional[float] = None
    outputs: list = field(default_factory=list)

    def add(self, path: Path, digest: str, rows: int) -> dict:
        entry = {"path": str(path), "sha256": digest, "rows": rows}
        self.outputs.append(entry)
        return entry

    def write(self, path: Path) -> Path:
        self.finished = time.time()
        path = Path(path)
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True, default=str) + "\n")
        return path


def emit_report(results: Iterable[Any], fmt: str, sink, columns: Optional[Sequence[str]] = None,
                metadata: Optional[dict] = None, manifest: Optional[RunManifest] = None) -> dict:
    """Write ``results`` to ``sink`` and return its manifest entry.

    Identical inputs give identical bytes. With no rows, ``columns`` supplies
    the header.
    """
    rows = [as_row(r) for r in results]
    if columns is None:
        if not rows:
            raise ValueError("columns are required for an empty result list")
        columns = list(rows[0])
    text = render(rows, fmt, list(columns), metadata)
    data = text.encode()
    path = Path(sink)
    path.write_bytes(data)  # OSError propagates for unwritable sinks
    digest = hashlib.sha256(data).hexdigest()
    entry = {"path": str(path), "sha256": digest, "rows": len(rows)}
    if manifest is not None:
        manifest.add(path, digest, len(rows))
    return entry
