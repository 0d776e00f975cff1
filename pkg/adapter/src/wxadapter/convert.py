"""One-time converter from reanalysis archive slices to ``.wxs``.

Archives are HDF5 files with one dataset per exchange variable (2-D
lat x lon, or 3-D time x lat x lon alongside a 1-D "time" dataset of Unix
seconds), plus 1-D "lat" / "lon" coordinate datasets: latitude descending
from +90, longitude ascending from 0, equal spacing. GRIB decoding is out
of scope; slices in this layout are easy to produce with standard tooling.
"""

from __future__ import annotations

from datetime import datetime, timezone

import h5py
import numpy as np

from .catalog import CHANNEL_NAMES
from .wxs import Snapshot, WxsFormatError, write_snapshot


class MissingVariablesError(Exception):
    """Archive lacks one or more catalog variables."""

    def __init__(self, names):
        self.names = tuple(names)
        super().__init__(f"archive is missing variables: {', '.join(self.names)}")


def parse_timestamp(text: str) -> int:
    """ISO-8601 (Z accepted) or raw Unix seconds -> Unix seconds."""
    text = text.strip()
    if text.lstrip("-").isdigit():
        return int(text)
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    t = datetime.fromisoformat(text)
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return int(t.timestamp())


def _grid_from_coords(f: h5py.File) -> tuple[int, int, int]:
    for key in ("lat", "lon"):
        if key not in f:
            raise WxsFormatError(f"archive has no {key!r} coordinate dataset")
    lat = np.asarray(f["lat"], dtype=np.float64)
    lon = np.asarray(f["lon"], dtype=np.float64)
    if lat.ndim != 1 or lon.ndim != 1 or lat.size < 2 or lon.size < 1:
        raise WxsFormatError("lat/lon coordinates must be 1-D")
    steps = -np.diff(lat)
    if abs(lat[0] - 90.0) > 1e-6 or not np.allclose(steps, steps[0], atol=1e-6) or steps[0] <= 0:
        raise WxsFormatError("latitude must descend from +90 with equal spacing")
    res = steps[0]
    if lon[0] != 0.0 or (lon.size > 1 and not np.allclose(np.diff(lon), res, atol=1e-6)):
        raise WxsFormatError("longitude must ascend from 0 with the latitude spacing")
    return lat.size, lon.size, round(res * 1e6)


def _time_index(f: h5py.File, unix_seconds: int) -> int:
    if "time" not in f:
        raise WxsFormatError("archive has 3-D variables but no 'time' dataset")
    times = np.asarray(f["time"], dtype=np.int64)
    hits = np.nonzero(times == unix_seconds)[0]
    if hits.size == 0:
        stamp = datetime.fromtimestamp(unix_seconds, tz=timezone.utc).isoformat()
        raise WxsFormatError(f"timestamp {stamp} not present in archive")
    return int(hits[0])


def convert_archive(source, timestamp: str, out_path) -> None:
    """Extract one time slice of all 73 variables into a ``.wxs`` file."""
    unix_seconds = parse_timestamp(timestamp)
    with h5py.File(source, "r") as f:
        missing = [name for name in CHANNEL_NAMES if name not in f]
        if missing:
            raise MissingVariablesError(missing)
        lat_count, lon_count, micro = _grid_from_coords(f)
        values = np.empty((len(CHANNEL_NAMES), lat_count, lon_count), dtype=np.float32)
        time_idx: int | None = None
        for c, name in enumerate(CHANNEL_NAMES):
            ds = f[name]
            if ds.ndim == 2:
                plane = ds[()]
            elif ds.ndim == 3:
                if time_idx is None:
                    time_idx = _time_index(f, unix_seconds)
                plane = ds[time_idx]
            else:
                raise WxsFormatError(f"variable {name!r} must be 2-D or 3-D, got {ds.ndim}-D")
            if plane.shape != (lat_count, lon_count):
                raise WxsFormatError(
                    f"variable {name!r} has shape {plane.shape}, expected {(lat_count, lon_count)}"
                )
            values[c] = plane
    write_snapshot(out_path, Snapshot(lat_count, lon_count, micro, unix_seconds, values))
