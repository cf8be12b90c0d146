"""Binary weights-file format ("PNWT") and the named-tensor store.

Layout, all little-endian:

    magic   4 bytes  b"PNWT"
    version u32      currently 1
    count   u32      number of entries
    entry   repeated count times:
        name_len u32
        name     name_len bytes, UTF-8
        rank     u32
        dims     rank x u32
        values   prod(dims) x f32 (IEEE-754)

The byte layout is a contract: save followed by load is bit-exact, and
entry order is insertion order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .core import StainforgeError

__all__ = [
    "MAGIC",
    "VERSION",
    "FormatError",
    "TruncatedStreamError",
    "DuplicateTensorError",
    "WeightStore",
    "load_weights",
    "save_weights",
]

MAGIC = b"PNWT"
VERSION = 1


class FormatError(StainforgeError):
    """Stream is not a PNWT file (bad magic or unsupported version)."""


class TruncatedStreamError(StainforgeError):
    """Stream ended mid-record; ``offset`` is the byte position needed."""

    def __init__(self, offset: int, what: str):
        super().__init__(f"truncated stream at byte {offset}: expected {what}")
        self.offset = offset


class DuplicateTensorError(StainforgeError):
    """Two entries share one tensor name."""


@dataclass
class WeightStore:
    """Ordered name -> float32 tensor map.

    Shapes are kept explicitly so rank-0 vs shape-[1] distinctions survive
    a round trip. Values are always float32, matching the file format.
    """

    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        clean: dict[str, np.ndarray] = {}
        for name, values in self.entries.items():
            arr = np.asarray(values, dtype=np.float32)
            arr.flags.writeable = False
            clean[name] = arr
        self.entries = clean

    def add(self, name: str, values: np.ndarray) -> None:
        if name in self.entries:
            raise DuplicateTensorError(f"tensor {name!r} already present")
        arr = np.asarray(values, dtype=np.float32)
        arr.flags.writeable = False
        self.entries[name] = arr

    def get(self, name: str) -> np.ndarray:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def names(self) -> list[str]:
        return list(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        if self.names() != other.names():
            return False
        return all(
            a.shape == b.shape and np.array_equal(a, b, equal_nan=True)
            for a, b in ((self.entries[n], other.entries[n]) for n in self.entries)
        )


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedStreamError(self.pos, what)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def load_weights(data: bytes) -> WeightStore:
    """Parse a PNWT byte stream into a :class:`WeightStore`."""
    r = _Reader(bytes(data))
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version = r.u32("version")
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    count = r.u32("entry count")
    store = WeightStore()
    for _ in range(count):
        name_len = r.u32("name length")
        name = r.take(name_len, "name bytes").decode("utf-8")
        rank = r.u32("rank")
        dims = tuple(r.u32("dimension") for _ in range(rank))
        n_values = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = r.take(4 * n_values, f"{n_values} f32 values")
        values = np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(dims)
        if name in store:
            raise DuplicateTensorError(f"duplicate tensor name {name!r}")
        store.add(name, values)
    return store


def save_weights(store: WeightStore) -> bytes:
    """Serialize a store; exact inverse of :func:`load_weights`."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", VERSION)
    out += struct.pack("<I", len(store))
    for name, arr in store.entries.items():
        name_b = name.encode("utf-8")
        out += struct.pack("<I", len(name_b))
        out += name_b
        out += struct.pack("<I", arr.ndim)
        for d in arr.shape:
            out += struct.pack("<I", d)
        out += arr.astype("<f4").tobytes(order="C")
    return bytes(out)
