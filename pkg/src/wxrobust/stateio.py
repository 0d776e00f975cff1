"""Bit-exact file formats for snapshots and per-variable statistics.

State files (``.wxs``) are a flat little-endian binary format designed to
be trivially implementable in any language:

    offset  0  8s   magic "WXSTATE1"
    offset  8  u16  version (currently 1)
    offset 10  u32  lat_count
    offset 14  u32  lon_count
    offset 18  u32  channel_count (must equal the 73-entry catalog)
    offset 22  i64  valid time, Unix seconds UTC
    offset 30  u32  grid resolution in microdegrees
    offset 34  variable table: per channel, u8 name length + ASCII name
    then       payload: float32 little-endian, (channel, lat, lon) row-major

Stats files (``.stats.csv``) are plain text, one ``name,mean,std`` line per
catalog variable with full round-trip decimal precision.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import FieldSet, GridSpec, VariableCatalog, build_catalog
from .errors import (
    BadMagicError,
    BadVersionError,
    CatalogMismatchError,
    DegenerateStdError,
    DimMismatchError,
    IncompleteStatsError,
    NonFiniteStateError,
    StateFormatError,
    TruncatedPayloadError,
)
from .perturb import VariableStats
from .util import fmt_float, utc_from_unix

MAGIC = b"WXSTATE1"
VERSION = 1
_FIXED_HEADER = struct.Struct("<8sHIIIqI")  # magic, version, lats, lons, channels, time, resolution


def _resolution_microdeg(resolution_deg: float) -> int:
    micro = round(resolution_deg * 1e6)
    if not 0 < micro < 2**32:
        raise StateFormatError(f"resolution {resolution_deg} not representable in microdegrees")
    return micro


def write_state(path, fs: FieldSet) -> None:
    """Write a snapshot; refuses non-finite values."""
    if not np.isfinite(fs.values).all():
        raise NonFiniteStateError("non-finite state")
    header = _FIXED_HEADER.pack(
        MAGIC,
        VERSION,
        fs.grid.lat_count,
        fs.grid.lon_count,
        len(fs.catalog),
        int(fs.valid_time.timestamp()),
        _resolution_microdeg(fs.grid.resolution_deg),
    )
    table = bytearray()
    for name in fs.catalog.names:
        raw = name.encode("ascii")
        if not 0 < len(raw) <= 255:
            raise StateFormatError(f"variable name not storable: {name!r}")
        table.append(len(raw))
        table.extend(raw)
    with open(path, "wb") as f:
        f.write(header)
        f.write(bytes(table))
        f.write(np.ascontiguousarray(fs.values, dtype="<f4").tobytes())


def read_state(path) -> FieldSet:
    """Read and validate a snapshot; corruption classes raise distinct
    errors, each reporting the byte offset involved."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise BadMagicError(f"bad magic at offset 0: {data[:8]!r}")
    if len(data) < _FIXED_HEADER.size:
        raise TruncatedPayloadError(
            f"truncated header: need {_FIXED_HEADER.size} bytes, file has {len(data)}"
        )
    _, version, lat_count, lon_count, channel_count, unix_s, micro = _FIXED_HEADER.unpack_from(data)
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version} at offset 8")
    catalog = build_catalog()
    if channel_count != len(catalog):
        raise DimMismatchError(
            f"dim mismatch: channel count {channel_count} != {len(catalog)} at offset 18"
        )
    offset = _FIXED_HEADER.size
    names = []
    for _ in range(channel_count):
        if offset >= len(data):
            raise TruncatedPayloadError(f"truncated variable table at offset {offset}")
        n = data[offset]
        offset += 1
        if offset + n > len(data):
            raise TruncatedPayloadError(f"truncated variable table at offset {offset}")
        try:
            names.append(data[offset : offset + n].decode("ascii"))
        except UnicodeDecodeError as e:
            raise CatalogMismatchError(f"non-ASCII variable name at offset {offset}") from e
        offset += n
    if tuple(names) != catalog.names:
        bad = next(c for c, (a, b) in enumerate(zip(names, catalog.names)) if a != b)
        raise CatalogMismatchError(
            f"variable table mismatch at channel {bad}: {names[bad]!r} != {catalog.names[bad]!r}"
        )
    try:
        grid = GridSpec(lat_count, lon_count, micro / 1e6)
    except ValueError as e:
        raise DimMismatchError(f"dim mismatch: {e}") from e
    expected = 4 * channel_count * lat_count * lon_count
    actual = len(data) - offset
    if actual < expected:
        raise TruncatedPayloadError(
            f"truncated payload: expected {expected} bytes at offset {offset}, found {actual}"
        )
    if actual > expected:
        raise DimMismatchError(
            f"dim mismatch: {actual - expected} trailing bytes after payload at offset {offset + expected}"
        )
    values = np.frombuffer(data, dtype="<f4", count=expected // 4, offset=offset)
    values = values.reshape(channel_count, lat_count, lon_count)
    return FieldSet(grid, catalog, utc_from_unix(unix_s), values)


def write_stats(path, stats: VariableStats, allow_degenerate: bool = False) -> None:
    """One ``name,mean,std`` line per variable, in catalog order."""
    if stats.degenerate and not allow_degenerate:
        raise DegenerateStdError(f"degenerate std: {', '.join(stats.degenerate)}")
    lines = [
        f"{name},{fmt_float(m)},{fmt_float(s)}\n"
        for name, m, s in zip(stats.names, stats.mean, stats.std)
    ]
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.writelines(lines)


def read_stats(path, catalog: VariableCatalog | None = None) -> VariableStats:
    """Read a stats file and validate completeness against the catalog."""
    catalog = catalog or build_catalog()
    seen: dict[str, tuple[float, float]] = {}
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise IncompleteStatsError(f"incomplete stats: malformed line {lineno}: {line!r}")
            name = parts[0]
            try:
                mean, std = float(parts[1]), float(parts[2])
            except ValueError:
                raise IncompleteStatsError(f"incomplete stats: bad number on line {lineno}") from None
            if name in seen:
                raise IncompleteStatsError(f"incomplete stats: duplicate variable {name!r}")
            if name not in catalog.names:
                raise IncompleteStatsError(f"incomplete stats: unknown variable {name!r}")
            if not (np.isfinite(mean) and np.isfinite(std)):
                raise IncompleteStatsError(f"incomplete stats: non-finite value on line {lineno}")
            if std <= 0:
                raise DegenerateStdError(f"degenerate std: {name}")
            seen[name] = (mean, std)
    missing = [n for n in catalog.names if n not in seen]
    if missing:
        raise IncompleteStatsError(f"incomplete stats: missing {', '.join(missing)}")
    return VariableStats(
        names=catalog.names,
        mean=np.array([seen[n][0] for n in catalog.names]),
        std=np.array([seen[n][1] for n in catalog.names]),
    )
