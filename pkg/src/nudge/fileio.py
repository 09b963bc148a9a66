"""Embedding and label file formats plus seeded dataset splitting.

The embedding container is a fixed 28-byte little-endian header (magic
"NUDG", version, element dtype, row and column counts) followed by the matrix
body in row-major order. Labels are tab-separated text lines
``query_index<TAB>record_index[<TAB>relevance]`` with ``#`` comment lines.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import as_matrix

__all__ = [
    "FormatError",
    "EmbeddingFile",
    "read_labels",
    "write_labels",
    "split_parts",
]

MAGIC = b"NUDG"
VERSION = 1
_HEADER = struct.Struct("<4sIB3sQQ")
_CODE_TO_DTYPE = {1: "f32", 2: "f64"}
_DTYPE_TO_CODE = {"f32": 1, "f64": 2}
_DTYPE_TO_NP = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


class FormatError(ValueError):
    """A file does not conform to one of the on-disk formats."""


@dataclass(frozen=True)
class EmbeddingFile:
    """A matrix loaded from or destined for the binary embedding format.

    Values are held in float64 for computation regardless of the stored
    element type; writing casts back to the stored type, so a read-write
    cycle reproduces the original bytes exactly.
    """

    values: np.ndarray
    dtype: str

    @classmethod
    def from_array(cls, values: np.ndarray, dtype: str = "f64") -> "EmbeddingFile":
        if dtype not in _DTYPE_TO_CODE:
            raise ValueError(f"dtype must be 'f32' or 'f64', got {dtype!r}")
        return cls(as_matrix(values), dtype)

    @classmethod
    def read(cls, path: str | Path) -> "EmbeddingFile":
        path = Path(path)
        blob = path.read_bytes()
        if len(blob) < _HEADER.size:
            raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
        magic, version, code, pad, n, d = _HEADER.unpack_from(blob)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"{path}: unknown version {version}")
        if code not in _CODE_TO_DTYPE:
            raise FormatError(f"{path}: unknown dtype code {code}")
        if pad != b"\x00\x00\x00":
            raise FormatError(f"{path}: nonzero header padding")
        if n == 0 or d == 0:
            raise FormatError(f"{path}: empty matrix ({n}x{d})")
        dtype = _CODE_TO_DTYPE[code]
        np_dtype = _DTYPE_TO_NP[dtype]
        body = len(blob) - _HEADER.size
        expected = n * d * np_dtype.itemsize
        if body != expected:
            raise FormatError(f"{path}: body is {body} bytes, expected {expected}")
        raw = np.frombuffer(blob, dtype=np_dtype, count=n * d, offset=_HEADER.size)
        values = raw.astype(np.float64).reshape(n, d)
        if not np.isfinite(values).all():
            raise FormatError(f"{path}: body contains non-finite values")
        return cls(values, dtype)

    def write(self, path: str | Path) -> None:
        n, d = self.values.shape
        header = _HEADER.pack(MAGIC, VERSION, _DTYPE_TO_CODE[self.dtype], b"\x00\x00\x00", n, d)
        body = np.ascontiguousarray(self.values.astype(_DTYPE_TO_NP[self.dtype])).tobytes()
        Path(path).write_bytes(header + body)


def read_labels(path: str | Path) -> list[tuple[int, int, float]]:
    """Parse a label file into (query, record, relevance) entries.

    Blank lines and lines starting with '#' are skipped. Index bounds,
    duplicates, and query coverage are checked later when the entries are
    bound to concrete matrices.
    """
    path = Path(path)
    entries: list[tuple[int, int, float]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise FormatError(
                    f"{path}:{lineno}: expected 2 or 3 tab-separated fields, got {len(parts)}"
                )
            try:
                query = int(parts[0], 10)
                record = int(parts[1], 10)
            except ValueError:
                raise FormatError(
                    f"{path}:{lineno}: indices must be decimal integers"
                ) from None
            if query < 0 or record < 0:
                raise FormatError(f"{path}:{lineno}: indices must be non-negative")
            relevance = 1.0
            if len(parts) == 3:
                try:
                    relevance = float(parts[2])
                except ValueError:
                    raise FormatError(
                        f"{path}:{lineno}: relevance must be a number"
                    ) from None
                if not (math.isfinite(relevance) and relevance > 0.0):
                    raise FormatError(f"{path}:{lineno}: relevance must be positive and finite")
            entries.append((query, record, relevance))
    return entries


def write_labels(path: str | Path, entries: list[tuple[int, int, float]]) -> None:
    lines = []
    for query, record, relevance in entries:
        if relevance == 1.0:
            lines.append(f"{query}\t{record}")
        else:
            lines.append(f"{query}\t{record}\t{relevance!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def split_parts(
    queries: np.ndarray,
    entries: list[tuple[int, int, float]],
    fractions: tuple[float, float, float],
    seed: int,
) -> list[tuple[np.ndarray, list[tuple[int, int, float]]]]:
    """Shuffle queries with a seeded permutation and cut them into three parts.

    Sizing floors each fraction of the query count and gives any remainder to
    the last part, so the parts always cover every query exactly once. Label
    entries follow their query and are reindexed to the part-local order.
    """
    q = as_matrix(queries, "queries")
    n = q.shape[0]
    if len(fractions) != 3:
        raise ValueError(f"expected three fractions, got {len(fractions)}")
    for f in fractions:
        if not (math.isfinite(f) and f > 0.0):
            raise ValueError(f"fractions must be positive, got {f}")
    if sum(fractions) > 1.0 + 1e-9:
        raise ValueError(f"fractions must sum to at most 1, got {sum(fractions)}")
    # The small slack absorbs float error in f * n (0.7 * 10 is just below 7).
    sizes = [int(math.floor(f * n + 1e-9)) for f in fractions]
    sizes[-1] += n - sum(sizes)
    if min(sizes) < 1:
        raise ValueError(
            f"fractions {tuple(fractions)} leave an empty part for {n} queries "
            f"(sizes {tuple(sizes)})"
        )
    perm = np.random.default_rng(seed).permutation(n)
    out = []
    start = 0
    for size in sizes:
        part = perm[start : start + size]
        start += size
        local = {int(old): new for new, old in enumerate(part)}
        kept = sorted(
            (local[query], record, relevance)
            for query, record, relevance in entries
            if query in local
        )
        out.append((q[part], kept))
    return out
