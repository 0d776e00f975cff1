"""The fixed 73-channel variable order of the exchange format.

Channel order is part of the wire contract: 8 single-layer variables,
then z, t, u, v, rh at 13 pressure levels each, levels ascending.
"""

from __future__ import annotations

PRESSURE_LEVELS_HPA = (50, 100, 150, 200, 250, 300, 400, 500, 600, 700, 850, 925, 1000)

_SINGLE = ("u10m", "u100m", "v10m", "v100m", "t2m", "sp", "msl", "tcwv")
_UPPER = ("z", "t", "u", "v", "rh")

CHANNEL_NAMES: tuple[str, ...] = _SINGLE + tuple(
    f"{prefix}{level}" for prefix in _UPPER for level in PRESSURE_LEVELS_HPA
)

assert len(CHANNEL_NAMES) == 73
