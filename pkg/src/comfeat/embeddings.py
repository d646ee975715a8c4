"""CFEM embedding files: read/write precomputed neural feature matrices.

The pretrained models that produce TRILLsson (1024-d) and x-vector (512-d)
embeddings are external; this module only moves their outputs around. The
on-disk layout is little-endian throughout:

    offset  size  field
    0       4     magic  b"CFEM"
    4       2     version u16 (= 1)
    6       2     source  u16 (1 = trillsson, 2 = xvector, 255 = other)
    8       4     n_frames u32 (>= 1)
    12      4     dim u32
    16      ...   n_frames * dim float32, row-major

Values are stored as float32; loading a file written from float32-exact
values round-trips bit-for-bit. Multi-frame files are mean-pooled over time
by the loader, so downstream code only ever sees fixed-dimension vectors.
"""

from __future__ import annotations

import struct

import numpy as np

from .spectral import SOURCE_DIMS, FeatureVector

MAGIC = b"CFEM"
VERSION = 1
HEADER = struct.Struct("<4sHHII")  # 16 bytes

SOURCE_CODES = {"trillsson": 1, "xvector": 2, "other": 255}
CODE_SOURCES = {v: k for k, v in SOURCE_CODES.items()}


class EmbeddingFormatError(ValueError):
    """Base for malformed or contract-violating CFEM input."""


class BadMagic(EmbeddingFormatError):
    pass


class BadVersion(EmbeddingFormatError):
    pass


class DimensionMismatch(EmbeddingFormatError):
    """Dim or source violates the file/source contract."""


class Truncated(EmbeddingFormatError):
    """Payload shorter than the header promises."""


def _check_source_dim(source: str, dim: int):
    expected = SOURCE_DIMS.get(source)
    if expected is not None and dim != expected:
        raise DimensionMismatch(f"{source} requires dim {expected}, got {dim}")


def peek_source(data: bytes) -> str:
    """Read just the source tag from a CFEM header."""
    if len(data) < HEADER.size:
        raise Truncated(f"{len(data)} bytes is shorter than the 16-byte header")
    magic, version, source_code, _, _ = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersion(f"unsupported version {version}")
    source = CODE_SOURCES.get(source_code)
    if source is None:
        raise DimensionMismatch(f"unknown source code {source_code}")
    return source


def load_embedding(data: bytes, expected_source: str) -> FeatureVector:
    """Parse a CFEM byte string into a mean-pooled FeatureVector.

    Multi-frame payloads are averaged over time. The file's source tag must
    equal expected_source and honor the per-source dimension contract.
    """
    source = peek_source(data)
    _, _, _, n_frames, dim = HEADER.unpack_from(data)
    if source != expected_source:
        raise DimensionMismatch(f"expected source {expected_source!r}, file holds {source!r}")
    if n_frames < 1 or dim < 1:
        raise DimensionMismatch(f"degenerate payload shape {n_frames} x {dim}")
    _check_source_dim(source, dim)

    n_bytes = 4 * n_frames * dim
    payload = data[HEADER.size : HEADER.size + n_bytes]
    if len(payload) < n_bytes:
        raise Truncated(f"payload holds {len(payload)} bytes, header promises {n_bytes}")
    rows = np.frombuffer(payload, dtype="<f4").reshape(n_frames, dim).astype(np.float64)
    values = rows[0] if n_frames == 1 else rows.mean(axis=0)
    return FeatureVector(values=values, source=source)


def store_embedding(values: np.ndarray, source: str) -> bytes:
    """Serialize a vector or (n_frames, dim) matrix to CFEM bytes.

    load_embedding(store_embedding(x), source) reproduces x (pooled over
    frames) exactly when x is float32-representable.
    """
    if source not in SOURCE_CODES:
        raise DimensionMismatch(f"source {source!r} has no CFEM code; use {sorted(SOURCE_CODES)}")
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"need a vector or (n_frames, dim) matrix, got shape {arr.shape}")
    n_frames, dim = arr.shape
    _check_source_dim(source, dim)
    header = HEADER.pack(MAGIC, VERSION, SOURCE_CODES[source], n_frames, dim)
    return header + arr.astype("<f4").tobytes()
