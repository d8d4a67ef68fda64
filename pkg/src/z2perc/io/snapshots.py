"""Binary snapshot files.

Layout (little-endian)::

    magic        8 bytes  b"Z2SNAP01"
    version      u16
    D            u8
    basis        u8       0 = tau^x, 1 = tau^z
    L            u32
    count        u64
    manifest     32 bytes sha256 of the producing manifest (zeros if none)
    header crc   u32      crc32 of everything above
    payload      count * ceil(link_count / 8) bytes, bit 1 = spin -1,
                 link order site-major / direction-minor, LSB first
    payload crc  u32
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..gauge import Basis

MAGIC = b"Z2SNAP01"
VERSION = 1
_HEADER = struct.Struct("<8sHBBIQ32s")
_CRC = struct.Struct("<I")


class SnapshotError(ValueError):
    """Malformed, truncated or corrupted snapshot file."""


@dataclass(frozen=True)
class SnapshotHeader:
    D: int
    L: int
    basis: Basis
    count: int
    manifest_hash: bytes = bytes(32)
    version: int = VERSION

    @property
    def link_count(self) -> int:
        return self.D * self.L**self.D

    @property
    def record_bytes(self) -> int:
        return (self.link_count + 7) // 8


def encode(strings: np.ndarray, D: int, L: int, basis: Basis = Basis.X,
           manifest_hash: bytes = bytes(32)) -> bytes:
    """Serialise an ``(count, link_count)`` array of 0/1 link states."""
    strings = np.atleast_2d(np.asarray(strings, dtype=np.uint8))
    n_links = D * L**D
    if strings.shape[1] != n_links:
        raise ValueError(f"expected {n_links} links per snapshot, got {strings.shape[1]}")
    if strings.size and strings.max() > 1:
        raise ValueError("link states must be 0 or 1")
    if len(manifest_hash) != 32:
        raise ValueError("manifest hash must be 32 bytes")
    head = _HEADER.pack(MAGIC, VERSION, D, int(Basis(basis)), L, len(strings), bytes(manifest_hash))
    payload = np.packbits(strings, axis=1, bitorder="little").tobytes()
    return b"".join([head, _CRC.pack(zlib.crc32(head)), payload, _CRC.pack(zlib.crc32(payload))])


def decode(blob: bytes) -> tuple[SnapshotHeader, np.ndarray]:
    hsize = _HEADER.size + _CRC.size
    if len(blob) < hsize:
        raise SnapshotError("file too short for a snapshot header")
    head = blob[: _HEADER.size]
    magic, version, D, basis, L, count, mhash = _HEADER.unpack(head)
    if magic != MAGIC:
        raise SnapshotError("not a snapshot file (bad magic)")
    (crc,) = _CRC.unpack_from(blob, _HEADER.size)
    if crc != zlib.crc32(head):
        raise SnapshotError("header checksum mismatch")
    if version != VERSION:
        raise SnapshotError(f"unsupported format version {version}")
    if basis not in (0, 1) or D not in (2, 3) or L < 2:
        raise SnapshotError("header fields out of range")
    header = SnapshotHeader(D, L, Basis(basis), count, mhash, version)
    n_payload = count * header.record_bytes
    payload = blob[hsize: hsize + n_payload]
    trailer = blob[hsize + n_payload:]
    if len(payload) != n_payload or len(trailer) != _CRC.size:
        raise SnapshotError("payload length does not match the header (truncated or padded file)")
    if _CRC.unpack(trailer)[0] != zlib.crc32(payload):
        raise SnapshotError("payload checksum mismatch")
    packed = np.frombuffer(payload, dtype=np.uint8).reshape(count, header.record_bytes)
    strings = np.unpackbits(packed, axis=1, count=header.link_count, bitorder="little")
    return header, strings


def write_snapshots(path, strings, D: int, L: int, basis: Basis = Basis.X,
                    manifest_hash: bytes = bytes(32)) -> Path:
    path = Path(path)
    path.write_bytes(encode(strings, D, L, basis, manifest_hash))
    return path


def read_snapshots(path) -> tuple[SnapshotHeader, np.ndarray]:
    return decode(Path(path).read_bytes())
