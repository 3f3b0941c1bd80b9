"""Persisted fingerprint store.

Binary layout (all little-endian):

    magic   8s   b"SPAMFP01"
    version u16  format version (currently 1)
    kind    u8   descriptor kind: 0 = gist, 1 = rp
    flags   u8   reserved, 0
    dim     u32  descriptor dimension
    count   u64  number of records
    metalen u32  metadata JSON length in bytes
    crc     u32  CRC32 of everything after the header

followed by the metadata JSON (UTF-8, sorted keys) and ``count``
fixed-size records:

    sha256      32 bytes raw
    label_idx   u32   index into metadata["labels"]
    byte_length u64
    added_at    f64   source file mtime (kept deterministic on re-runs)
    descriptor  dim x f32

Labels live once in the metadata, so records stay fixed-size without
truncating long AV label strings.  Writes go through a temp file and an
atomic rename; a crashed run never leaves a half-written store behind the
published path.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CorruptStore, DimensionMismatch, VersionMismatch

MAGIC = b"SPAMFP01"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHBBIQII")
_KINDS = {"gist": 0, "rp": 1}
_KIND_NAMES = {v: k for k, v in _KINDS.items()}


@dataclass(frozen=True)
class FingerprintRecord:
    sha256: str  # hex digest
    label: str
    descriptor: np.ndarray  # float32
    byte_length: int
    added_at: float = 0.0


def _record_struct(dim: int) -> struct.Struct:
    return struct.Struct(f"<32sIQd{dim}f")


def save(records: list[FingerprintRecord], metadata: dict, path) -> None:
    """Write a store atomically; metadata must carry feature kind/config."""
    if not records:
        raise CorruptStore("refusing to write an empty store")
    kind = metadata.get("feature", {}).get("kind")
    if kind not in _KINDS:
        raise CorruptStore(f"metadata lacks a known feature kind: {kind!r}")
    dim = len(records[0].descriptor)
    for rec in records:
        if len(rec.descriptor) != dim:
            raise DimensionMismatch("records have mixed descriptor dimensions")
    seen = set()
    for rec in records:
        if rec.sha256 in seen:
            raise CorruptStore(f"duplicate sha256 in store: {rec.sha256}")
        seen.add(rec.sha256)

    labels = sorted({rec.label for rec in records})
    label_idx = {label: i for i, label in enumerate(labels)}
    meta = dict(metadata)
    meta["labels"] = labels
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")

    rec_struct = _record_struct(dim)
    body = bytearray(meta_bytes)
    for rec in records:
        desc = np.asarray(rec.descriptor, dtype="<f4")
        body += rec_struct.pack(
            bytes.fromhex(rec.sha256),
            label_idx[rec.label],
            rec.byte_length,
            rec.added_at,
            *desc.tolist(),
        )

    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        _KINDS[kind],
        0,
        dim,
        len(records),
        len(meta_bytes),
        zlib.crc32(bytes(body)),
    )

    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fpstore-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(bytes(body))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load(path) -> tuple[list[FingerprintRecord], dict]:
    """Read a store back; raises CorruptStore/VersionMismatch on damage."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise CorruptStore("file shorter than the store header")
    magic, version, kind, _flags, dim, count, meta_len, crc = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CorruptStore("bad magic bytes")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"store version {version}, supported {FORMAT_VERSION}")
    if kind not in _KIND_NAMES:
        raise CorruptStore(f"unknown descriptor kind {kind}")

    body = blob[_HEADER.size :]
    rec_struct = _record_struct(dim)
    expected = meta_len + count * rec_struct.size
    if len(body) != expected:
        raise CorruptStore(f"body is {len(body)} bytes, expected {expected}")
    if zlib.crc32(body) != crc:
        raise CorruptStore("checksum mismatch")

    try:
        metadata = json.loads(body[:meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptStore(f"metadata is not valid JSON: {exc}") from exc
    labels = metadata.get("labels", [])

    records = []
    offset = meta_len
    for _ in range(count):
        fields = rec_struct.unpack_from(body, offset)
        offset += rec_struct.size
        sha, lidx, byte_length, added_at = fields[0], fields[1], fields[2], fields[3]
        if lidx >= len(labels):
            raise CorruptStore(f"label index {lidx} out of range")
        descriptor = np.array(fields[4:], dtype=np.float32)
        records.append(
            FingerprintRecord(
                sha256=sha.hex(),
                label=labels[lidx],
                descriptor=descriptor,
                byte_length=byte_length,
                added_at=added_at,
            )
        )
    return records, metadata
