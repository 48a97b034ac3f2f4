"""Byte-stable file formats: array bundles (datasets, checkpoints) and CSV tables.

Bundle layout::

    GRNPPG-BUNDLE 1\\n
    <one line of JSON: {"kind", "version", "meta", "arrays": [...]}>\\n
    <raw little-endian array bytes, in the order listed>

Each ``arrays`` entry carries ``name``, ``dtype`` (``<f8`` or ``<i8``),
``shape``, ``offset`` and ``nbytes``; offsets count from the first byte after
the header line.  JSON is written with sorted keys and no whitespace, so
equal content always produces equal bytes.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"GRNPPG-BUNDLE 1\n"
FORMAT_VERSION = 1

LEARNING_CURVE_COLUMNS = ("epoch", "split", "loss", "auc", "precision", "recall", "f1")
SWEEP_COLUMNS = ("Models", "variant", "gating", "seed", "Acc", "Pre", "Rec", "F1")
MI_TRACE_COLUMNS = ("seed", "representation", "epoch", "mi_nats")
CONFUSION_COLUMNS = ("true_label", "predicted_0", "predicted_1")
STATS_COLUMNS = ("statistic", "overall", "non_artifact", "artifact")


class FormatError(ValueError):
    """A file does not match the expected schema or version."""


def _dtype(arr: np.ndarray) -> str:
    if np.issubdtype(arr.dtype, np.integer) or arr.dtype == bool:
        return "<i8"
    return "<f8"


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def write_bundle(path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    entries, blobs, offset = [], [], 0
    for name in arrays:
        arr = np.asarray(arrays[name])
        dt = _dtype(arr)
        raw = np.ascontiguousarray(arr.astype(dt)).tobytes()
        entries.append({"name": name, "dtype": dt, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = {"kind": kind, "version": FORMAT_VERSION, "meta": meta, "arrays": entries}
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(dumps_json(header).encode("utf-8") + b"\n")
        for raw in blobs:
            fh.write(raw)
    return path


def read_bundle(path, kind: str | None = None) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    data = path.read_bytes()
    if not data.startswith(MAGIC):
        raise FormatError(f"{path} is not a grnppg bundle")
    nl = data.index(b"\n", len(MAGIC))
    header = json.loads(data[len(MAGIC):nl].decode("utf-8"))
    if header.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported bundle version {header.get('version')}")
    if kind is not None and header.get("kind") != kind:
        raise FormatError(f"{path}: expected a {kind} bundle, found {header.get('kind')!r}")
    body = data[nl + 1:]
    arrays = {}
    for e in header["arrays"]:
        if e["dtype"] not in ("<f8", "<i8"):
            raise FormatError(f"{path}: unsupported dtype {e['dtype']}")
        chunk = body[e["offset"]:e["offset"] + e["nbytes"]]
        if len(chunk) != e["nbytes"]:
            raise FormatError(f"{path}: array {e['name']!r} is truncated")
        arrays[e["name"]] = np.frombuffer(chunk, dtype=e["dtype"]).reshape(e["shape"]).copy()
    return header, arrays


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------- CSV


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[dict | Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if isinstance(row, dict):
            row = [row[c] for c in columns]
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path, columns: Sequence[str] | None = None) -> list[dict]:
    """Read a CSV, checking the header against ``columns`` when given."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None:
            raise FormatError(f"{path} is empty")
        if columns is not None and tuple(header) != tuple(columns):
            raise FormatError(f"{path}: header {header} does not match {list(columns)}")
        return [dict(zip(header, row)) for row in r]


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
