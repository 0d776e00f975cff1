"""Shared fixtures: synthetic snapshots with realistic per-variable scales."""

from __future__ import annotations

import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for `oracles`

from wxrobust.core import FieldSet, GridSpec, build_catalog

T0 = datetime(2021, 6, 1, 0, 0, tzinfo=timezone.utc)

# Rough (base, spread) per variable family, in native units. The rh spread
# is wide relative to its base on purpose: chi-squared random ICs then put
# sample mass below zero, which some tests rely on.
_FAMILY_SCALES = {
    "u": (0.0, 8.0),
    "v": (0.0, 8.0),
    "t": (285.0, 12.0),
    "sp": (96000.0, 4000.0),
    "msl": (101325.0, 1200.0),
    "tcwv": (30.0, 15.0),
    "z": (5200.0, 900.0),
    "rh": (15.0, 25.0),
}


def variable_scale(name: str) -> tuple[float, float]:
    for prefix in ("msl", "tcwv", "sp", "rh", "u", "v", "t", "z"):
        if name.startswith(prefix):
            return _FAMILY_SCALES[prefix]
    raise KeyError(name)


def synthetic_fieldset(grid: GridSpec, seed: int = 0, valid_time=T0) -> FieldSet:
    """Gaussian random snapshot with per-family offsets and spreads."""
    catalog = build_catalog()
    rng = np.random.default_rng(seed)
    values = np.empty((len(catalog), grid.lat_count, grid.lon_count), dtype=np.float32)
    for c, entry in enumerate(catalog):
        base, spread = variable_scale(entry.name)
        values[c] = (base + spread * rng.standard_normal((grid.lat_count, grid.lon_count))).astype(np.float32)
    return FieldSet(grid, catalog, valid_time, values)


def cyclone_fieldset(grid: GridSpec, center_lat: float, center_lon: float,
                     depth_pa: float = 4000.0, width_deg: float = 3.0,
                     seed: int = 0, valid_time=T0) -> FieldSet:
    """Synthetic snapshot whose MSL channel has a single Gaussian
    depression centered on a grid point."""
    fs = synthetic_fieldset(grid, seed=seed, valid_time=valid_time)
    catalog = fs.catalog
    values = fs.values.copy()
    c = catalog.index_of("msl")
    lats = grid.latitudes()[:, None]
    lons = grid.longitudes()[None, :]
    dlon = np.minimum(np.abs(lons - center_lon), 360.0 - np.abs(lons - center_lon))
    r2 = (lats - center_lat) ** 2 + dlon**2
    values[c] = (101325.0 - depth_pa * np.exp(-r2 / (2.0 * width_deg**2))).astype(np.float32)
    return fs.with_values(values)


@pytest.fixture(scope="session")
def catalog():
    return build_catalog()


@pytest.fixture(scope="session")
def tiny_grid():
    return GridSpec(5, 8, 1.0)


@pytest.fixture(scope="session")
def one_deg_grid():
    return GridSpec.from_resolution(1.0)


@pytest.fixture(scope="session")
def coarse_grid():
    return GridSpec.from_resolution(4.0)


@pytest.fixture(scope="session")
def tiny_fieldset(tiny_grid):
    return synthetic_fieldset(tiny_grid, seed=7)


@pytest.fixture(scope="session")
def one_deg_fieldset(one_deg_grid):
    return synthetic_fieldset(one_deg_grid, seed=11)


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when == "call" and "test_acceptance" in report.nodeid:
        status = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[{status}] {name}", flush=True)
