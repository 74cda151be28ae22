"""File formats: JSONL record corpora, the EMB1 binary embedding container,
CSV embeddings, and tidy CSV writing with round-trip float formatting.
"""

from __future__ import annotations

import csv
import json
import struct

import numpy as np

from .chain import TextRecord
from .errors import InvalidInputError

__all__ = [
    "read_records_jsonl",
    "write_records_jsonl",
    "read_embeddings",
    "write_embeddings_emb1",
    "write_csv",
]

_EMB1_MAGIC = b"EMB1"


def read_records_jsonl(path) -> list[TextRecord]:
    """One record per line: {"text": str, "domain"?: str, "quality"?: int,
    "lean"?: int, "positivity"?: float}."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "text" not in row:
                raise InvalidInputError(f"{path}:{lineno}: record lacks a text field")
            annotations = {k: row[k] for k in ("quality", "lean", "positivity") if k in row}
            records.append(TextRecord(
                text=row["text"],
                source=row.get("source", "human"),
                generation=row.get("generation", -1 if row.get("source", "human") == "human" else 0),
                domain=row.get("domain"),
                annotations=annotations or None,
            ))
    return records


def write_records_jsonl(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            row = {"text": r.text}
            if r.source != "human":
                row["source"] = r.source
                row["generation"] = r.generation
            if r.domain is not None:
                row["domain"] = r.domain
            for k in ("quality", "lean", "positivity"):
                if r.annotations and k in r.annotations:
                    row[k] = r.annotations[k]
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def write_embeddings_emb1(matrix: np.ndarray, path) -> None:
    """Binary container: magic "EMB1", u32 n, u32 d, then n*d little-endian
    float32 values row-major."""
    matrix = np.asarray(matrix, dtype=np.float32)
    if matrix.ndim != 2:
        raise InvalidInputError("embedding matrix must be 2-D")
    n, d = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_EMB1_MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(matrix.astype("<f4").tobytes(order="C"))


def read_embeddings(path) -> np.ndarray:
    """Read an embedding matrix from an EMB1 binary file or a CSV with an id
    column (first column) followed by the vector components."""
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head == _EMB1_MAGIC:
            n, d = struct.unpack("<II", fh.read(8))
            data = np.frombuffer(fh.read(4 * n * d), dtype="<f4")
            if data.size != n * d:
                raise InvalidInputError(f"{path}: truncated EMB1 payload")
            return data.reshape(n, d).astype(float)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for i, row in enumerate(reader):
            if not row:
                continue
            if i == 0 and not _is_float(row[-1]):
                continue  # header line
            rows.append([float(v) for v in row[1:]])
    if not rows:
        raise InvalidInputError(f"{path}: no embedding rows found")
    return np.asarray(rows, dtype=float)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def write_csv(path, header: list[str], rows) -> None:
    """Write a tidy CSV with shortest round-trip float formatting so reruns
    are byte-identical."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
