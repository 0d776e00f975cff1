"""Storm-center localization and trajectory error.

The storm center at each time is the grid point of minimum mean-sea-level
pressure inside a search region, optionally restricted to a great-circle
radius around the previous center. Ties break to the first point in
row-major scan order, which makes tracking fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FieldSet, Region, TrackPoint, Trajectory, region_axis_indices
from .errors import NoCandidateError, TrackingError, UnalignedTrajectoriesError

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class TrackConfig:
    """Search box plus optional step-to-step continuity constraint."""

    region: Region
    continuity_radius_km: float | None = None

    def __post_init__(self):
        if self.continuity_radius_km is not None and not self.continuity_radius_km > 0:
            raise ValueError("continuity_radius_km must be positive")


def great_circle_km(lat1, lon1, lat2, lon2):
    """Haversine distance in km (spherical Earth, R = 6371 km).

    Accepts scalars or numpy arrays (degrees).
    """
    phi1, lam1, phi2, lam2 = (np.radians(np.asarray(x, dtype=np.float64)) for x in (lat1, lon1, lat2, lon2))
    a = np.sin((phi2 - phi1) / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin((lam2 - lam1) / 2.0) ** 2
    return EARTH_RADIUS_KM * 2.0 * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def locate_center(fs: FieldSet, cfg: TrackConfig, prior: tuple[float, float] | None = None) -> tuple[float, float]:
    """(lat, lon) of the minimum-MSL grid point inside the search region.

    With a prior and a continuity radius, only points within that
    great-circle distance of the prior are considered.
    """
    lat_idx, lon_idx = region_axis_indices(fs.grid, cfg.region)
    sub = fs.channel("msl")[np.ix_(lat_idx, lon_idx)]
    if prior is not None and cfg.continuity_radius_km is not None:
        lat_grid = fs.grid.latitudes()[lat_idx][:, None]
        lon_grid = fs.grid.longitudes()[lon_idx][None, :]
        dist = great_circle_km(lat_grid, lon_grid, prior[0], prior[1])
        ok = dist <= cfg.continuity_radius_km
        if not ok.any():
            raise NoCandidateError("no candidate points")
        sub = np.where(ok, sub.astype(np.float64), np.inf)
    flat = int(np.argmin(sub))  # first occurrence in row-major order breaks ties
    i, j = np.unravel_index(flat, sub.shape)
    return fs.grid.lat_of(int(lat_idx[i])), fs.grid.lon_of(int(lon_idx[j]))


def track_states(states: Sequence[FieldSet], cfg: TrackConfig) -> Trajectory:
    """Locate the center in each state, chaining each fix as the next
    step's prior."""
    points = []
    prior = None
    for k, state in enumerate(states):
        try:
            lat, lon = locate_center(state, cfg, prior)
        except TrackingError as e:
            raise type(e)(f"timestep {k}: {e}") from e
        points.append(TrackPoint(state.valid_time, lat, lon))
        prior = (lat, lon)
    return Trajectory(tuple(points))


def track_storm(run, cfg: TrackConfig) -> Trajectory:
    """Track a forecast run; one trajectory point per time slice,
    including the initial state."""
    return track_states(run.states, cfg)


def mean_trajectory_error(pred: Trajectory, truth: Trajectory) -> float:
    """Great-circle distances between paired centers, summed and divided
    by the number of compared points (the initial time included)."""
    if len(pred) != len(truth) or pred.times != truth.times:
        raise UnalignedTrajectoriesError("unaligned trajectories")
    d = great_circle_km(pred.lats, pred.lons, truth.lats, truth.lons)
    return float(np.sum(d) / len(pred))
