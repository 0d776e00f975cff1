"""Minimal standalone codec for the flat ``.wxs`` snapshot format.

Layout (little-endian): 8-byte magic "WXSTATE1", u16 version, u32 lat
count, u32 lon count, u32 channel count (73), i64 Unix seconds UTC, u32
resolution in microdegrees, then per channel a u8 name length plus ASCII
name, then float32 payload in (channel, lat, lon) row-major order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import CHANNEL_NAMES

MAGIC = b"WXSTATE1"
VERSION = 1
_HEADER = struct.Struct("<8sHIIIqI")


class WxsFormatError(Exception):
    """Snapshot file violates the format contract."""


@dataclass
class Snapshot:
    """One decoded snapshot: float32 values shaped (73, lat, lon)."""

    lat_count: int
    lon_count: int
    resolution_microdeg: int
    unix_seconds: int
    values: np.ndarray

    def advanced(self, hours: int = 6) -> "Snapshot":
        return Snapshot(self.lat_count, self.lon_count, self.resolution_microdeg,
                        self.unix_seconds + hours * 3600, self.values)


def _variable_table() -> bytes:
    table = bytearray()
    for name in CHANNEL_NAMES:
        raw = name.encode("ascii")
        table.append(len(raw))
        table.extend(raw)
    return bytes(table)


def read_snapshot(path) -> Snapshot:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise WxsFormatError(f"bad magic: {data[:8]!r}")
    if len(data) < _HEADER.size:
        raise WxsFormatError("truncated header")
    _, version, lat_count, lon_count, channels, unix_s, micro = _HEADER.unpack_from(data)
    if version != VERSION:
        raise WxsFormatError(f"unsupported version {version}")
    if channels != len(CHANNEL_NAMES):
        raise WxsFormatError(f"expected {len(CHANNEL_NAMES)} channels, found {channels}")
    pos = _HEADER.size
    for c, expected in enumerate(CHANNEL_NAMES):
        if pos >= len(data):
            raise WxsFormatError("truncated variable table")
        n = data[pos]
        name = data[pos + 1 : pos + 1 + n].decode("ascii", errors="replace")
        if name != expected:
            raise WxsFormatError(f"channel {c} is {name!r}, expected {expected!r}")
        pos += 1 + n
    count = channels * lat_count * lon_count
    if len(data) - pos != 4 * count:
        raise WxsFormatError(
            f"payload is {len(data) - pos} bytes, header declares {4 * count}"
        )
    values = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
    values = values.reshape(channels, lat_count, lon_count)
    if not np.isfinite(values).all():
        raise WxsFormatError("payload contains non-finite values")
    return Snapshot(lat_count, lon_count, micro, unix_s, values)


def write_snapshot(path, snap: Snapshot) -> None:
    values = np.ascontiguousarray(snap.values, dtype="<f4")
    if values.shape != (len(CHANNEL_NAMES), snap.lat_count, snap.lon_count):
        raise WxsFormatError(f"values shape {values.shape} does not match header dims")
    if not np.isfinite(values).all():
        raise WxsFormatError("refusing to write non-finite values")
    header = _HEADER.pack(MAGIC, VERSION, snap.lat_count, snap.lon_count,
                          len(CHANNEL_NAMES), snap.unix_seconds, snap.resolution_microdeg)
    with open(path, "wb") as f:
        f.write(header)
        f.write(_variable_table())
        f.write(values.tobytes())
