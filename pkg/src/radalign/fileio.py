"""File formats: JSON-lines records, flat binary matrices, content hashing.

The binary matrix format is a 16-byte header of two little-endian uint64
values (row count N, column count d) followed by N*d little-endian float64
values in row-major order. JSON-lines embedding files carry one object per
line with a ``vector`` field (an optional ``id`` is preserved but unused
for alignment, which is positional).
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

_HEADER = struct.Struct("<QQ")


def iter_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc


def read_jsonl(path: str | Path) -> list[dict]:
    return list(iter_jsonl(path))


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")


def write_json(path: str | Path, doc) -> None:
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def write_matrix(path: str | Path, matrix: np.ndarray) -> None:
    arr = np.ascontiguousarray(np.asarray(matrix, dtype=np.float64))
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(arr.shape[0], arr.shape[1]))
        fh.write(arr.astype("<f8").tobytes(order="C"))


def read_matrix(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated matrix file")
    n, d = _HEADER.unpack_from(raw)
    expected = _HEADER.size + n * d * 8
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for a {n}x{d} matrix, got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    return data.reshape(n, d).astype(np.float64)


def read_embeddings(path: str | Path) -> np.ndarray:
    """Load a (N, d) embedding matrix from a .jsonl or binary matrix file."""
    path = Path(path)
    if path.suffix == ".jsonl":
        rows = [record["vector"] for record in iter_jsonl(path)]
        if not rows:
            return np.zeros((0, 0), dtype=np.float64)
        return np.asarray(rows, dtype=np.float64)
    return read_matrix(path)


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()
