"""Core domain types for gridded multi-variable atmospheric states.

Conventions fixed here and shared by every file format and operation:

  - latitude descends from +90°N (row index 0 is the north pole);
  - longitude ascends east in [0, 360); west longitudes in user input are
    normalized by +360;
  - one snapshot holds all 73 catalog variables on one grid at one UTC
    valid time, stored as float32; statistics accumulate in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .errors import EmptyRegionError, IncompatibleFieldsError, NonFiniteStateError, UnknownVariableError
from .util import ensure_utc

#: Deterministic forecast models advance in fixed 6-hour steps.
MODEL_TIMESTEP = timedelta(hours=6)

#: The 13 pressure levels (hPa), ascending, of the upper-air variables.
PRESSURE_LEVELS_HPA = (50, 100, 150, 200, 250, 300, 400, 500, 600, 700, 850, 925, 1000)

_SINGLE_LEVEL_VARS = (
    ("u10m", "Zonal wind 10 m above the surface", "m/s"),
    ("u100m", "Zonal wind 100 m above the surface", "m/s"),
    ("v10m", "Meridional wind 10 m above the surface", "m/s"),
    ("v100m", "Meridional wind 100 m above the surface", "m/s"),
    ("t2m", "Temperature 2 m above the surface", "K"),
    ("sp", "Surface pressure", "Pa"),
    ("msl", "Mean sea level pressure", "Pa"),
    ("tcwv", "Total column water vapor", "kg/m^2"),
)

_PRESSURE_LEVEL_VARS = (
    ("z", "Geopotential height", "m"),
    ("t", "Temperature", "K"),
    ("u", "Zonal wind", "m/s"),
    ("v", "Meridional wind", "m/s"),
    ("rh", "Relative humidity", "%"),
)


@dataclass(frozen=True)
class VariableDef:
    """One catalog entry. ``level`` is "single" or a pressure level in hPa."""

    name: str
    description: str
    units: str
    level: str | int


@dataclass(frozen=True)
class VariableCatalog:
    """Fixed, ordered catalog of the 73 variables.

    The entry order defines the channel index everywhere: in memory, in
    state files, and in the backend exchange protocol.
    """

    entries: tuple[VariableDef, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {e.name: c for c, e in enumerate(self.entries)}
        if len(index) != len(self.entries):
            raise ValueError("catalog names must be unique")
        object.__setattr__(self, "_index", index)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownVariableError(f"unknown variable: {name!r}") from None

    def units_of(self, name: str) -> str:
        return self.entries[self.index_of(name)].units

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[VariableDef]:
        return iter(self.entries)

    def __getitem__(self, c: int) -> VariableDef:
        return self.entries[c]


@lru_cache(maxsize=1)
def build_catalog() -> VariableCatalog:
    """The fixed 73-entry catalog: 8 single-layer variables, then each
    upper-air variable at the 13 pressure levels ascending."""
    entries = [VariableDef(n, d, u, "single") for n, d, u in _SINGLE_LEVEL_VARS]
    for prefix, desc, units in _PRESSURE_LEVEL_VARS:
        for level in PRESSURE_LEVELS_HPA:
            entries.append(VariableDef(f"{prefix}{level}", f"{desc} at {level} hPa", units, level))
    return VariableCatalog(tuple(entries))


def _normalize_lon(lon: float, upper: bool = False) -> float:
    """Map a longitude into [0, 360); for box upper bounds a multiple of
    360 maps to 360 so a 0..360 box means the whole ring."""
    wrapped = float(lon) % 360.0
    if upper and wrapped == 0.0 and lon != 0.0:
        return 360.0
    return wrapped


@dataclass(frozen=True)
class GridSpec:
    """Regular lat/lon grid: latitude descending from +90°N, longitude
    ascending east from 0°, both spaced by ``resolution_deg``."""

    lat_count: int
    lon_count: int
    resolution_deg: float

    def __post_init__(self):
        if self.lat_count < 1 or self.lon_count < 1:
            raise ValueError("grid must have at least one point per axis")
        if not (0 < self.resolution_deg <= 90):
            raise ValueError(f"bad grid resolution: {self.resolution_deg}")
        if (self.lat_count - 1) * self.resolution_deg > 180 + 1e-9:
            raise ValueError("latitude span exceeds 180 degrees")
        if self.lon_count * self.resolution_deg > 360 + 1e-9:
            raise ValueError("longitude span exceeds 360 degrees")

    @classmethod
    def quarter_degree(cls) -> "GridSpec":
        """The production 0.25° grid (721 x 1440)."""
        return cls(721, 1440, 0.25)

    @classmethod
    def from_resolution(cls, resolution_deg: float) -> "GridSpec":
        """Full-globe grid at the given spacing, e.g. 1.0 -> 181 x 360."""
        lat_count = round(180.0 / resolution_deg) + 1
        lon_count = round(360.0 / resolution_deg)
        return cls(lat_count, lon_count, resolution_deg)

    def lat_of(self, i: int) -> float:
        return 90.0 - i * self.resolution_deg

    def lon_of(self, j: int) -> float:
        return (j * self.resolution_deg) % 360.0

    def latitudes(self) -> np.ndarray:
        return 90.0 - np.arange(self.lat_count) * self.resolution_deg

    def longitudes(self) -> np.ndarray:
        return (np.arange(self.lon_count) * self.resolution_deg) % 360.0


@dataclass(frozen=True)
class Region:
    """Closed lat/lon box. Boundary grid points are included.

    West longitudes are normalized by +360; a box whose normalized
    lon_min exceeds lon_max wraps across the 0° meridian.
    """

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not self.lat_min < self.lat_max:
            raise ValueError("region requires lat_min < lat_max")
        object.__setattr__(self, "lon_min", _normalize_lon(self.lon_min))
        object.__setattr__(self, "lon_max", _normalize_lon(self.lon_max, upper=True))


#: Central Atlantic box used for regional storm analysis: 30°N-40°N, 70°W-90°W.
CENTRAL_ATLANTIC = Region(30.0, 40.0, 270.0, 290.0)

_EDGE_EPS = 1e-9  # tolerate float drift when grid points sit exactly on a box edge


def region_axis_indices(grid: GridSpec, region: Region) -> tuple[np.ndarray, np.ndarray]:
    """Ascending (lat_index_array, lon_index_array) of the grid rows and
    columns inside the region. Raises EmptyRegionError if either is empty."""
    lats = grid.latitudes()
    lons = grid.longitudes()
    lat_idx = np.nonzero((lats >= region.lat_min - _EDGE_EPS) & (lats <= region.lat_max + _EDGE_EPS))[0]
    if region.lon_min <= region.lon_max:
        lon_ok = (lons >= region.lon_min - _EDGE_EPS) & (lons <= region.lon_max + _EDGE_EPS)
    else:  # wraps across 0°
        lon_ok = (lons >= region.lon_min - _EDGE_EPS) | (lons <= region.lon_max + _EDGE_EPS)
    lon_idx = np.nonzero(lon_ok)[0]
    if lat_idx.size == 0 or lon_idx.size == 0:
        raise EmptyRegionError("empty region")
    return lat_idx, lon_idx


def region_indices(grid: GridSpec, region: Region) -> list[tuple[int, int]]:
    """All (lat index, lon index) pairs inside the region, row-major."""
    lat_idx, lon_idx = region_axis_indices(grid, region)
    return [(int(i), int(j)) for i in lat_idx for j in lon_idx]


@dataclass(frozen=True, eq=False)
class FieldSet:
    """One atmospheric snapshot: all 73 variables on one grid at one time.

    Values are float32, shaped (channel, lat index, lon index), finite,
    and immutable after construction.
    """

    grid: GridSpec
    catalog: VariableCatalog
    valid_time: datetime
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "valid_time", ensure_utc(self.valid_time))
        v = np.asarray(self.values)
        if v.dtype != np.float32:
            v = v.astype(np.float32)
        v = np.ascontiguousarray(v)
        expected = (len(self.catalog), self.grid.lat_count, self.grid.lon_count)
        if v.shape != expected:
            raise ValueError(f"values shape {v.shape} != expected {expected}")
        if not np.isfinite(v).all():
            raise NonFiniteStateError("non-finite state")
        if v.flags.writeable:
            v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def channel(self, name: str) -> np.ndarray:
        """Read-only (lat, lon) view of one variable."""
        return self.values[self.catalog.index_of(name)]

    def with_values(self, values: np.ndarray, valid_time: datetime | None = None) -> "FieldSet":
        """New snapshot on the same grid/catalog."""
        return FieldSet(self.grid, self.catalog, valid_time or self.valid_time, values)


def same_layout(a: FieldSet, b: FieldSet) -> bool:
    return a.grid == b.grid and a.catalog.names == b.catalog.names


def field_difference(a: FieldSet, b: FieldSet) -> FieldSet:
    """Elementwise a - b per channel (forecast minus truth gives the
    signed error field; positive means overestimate)."""
    if not same_layout(a, b):
        raise IncompatibleFieldsError("incompatible fieldsets: grid or catalog mismatch")
    return a.with_values(a.values - b.values)


def pa_to_hpa(v):
    """Convert pressure (or a pressure-error field) from Pa to hPa."""
    return v / 100.0


@dataclass(frozen=True)
class TrackPoint:
    time: datetime
    lat: float
    lon: float


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped storm-center positions at the fixed 6-hour spacing."""

    points: tuple[TrackPoint, ...]

    def __post_init__(self):
        pts = tuple(self.points)
        for prev, cur in zip(pts, pts[1:]):
            if cur.time - prev.time != MODEL_TIMESTEP:
                raise ValueError("trajectory points must be 6 hours apart, increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[TrackPoint]:
        return iter(self.points)

    @property
    def times(self) -> tuple[datetime, ...]:
        return tuple(p.time for p in self.points)

    @property
    def lats(self) -> np.ndarray:
        return np.array([p.lat for p in self.points], dtype=np.float64)

    @property
    def lons(self) -> np.ndarray:
        return np.array([p.lon for p in self.points], dtype=np.float64)


def trajectory_from(times: Sequence[datetime], lats: Sequence[float], lons: Sequence[float]) -> Trajectory:
    if not (len(times) == len(lats) == len(lons)):
        raise ValueError("times, lats, lons must have equal length")
    return Trajectory(tuple(TrackPoint(ensure_utc(t), float(la), float(lo)) for t, la, lo in zip(times, lats, lons)))
