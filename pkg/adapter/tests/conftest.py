"""Fixtures: synthetic snapshots and archive slices, adapter-side only."""

from __future__ import annotations

import numpy as np
import pytest

from wxadapter.catalog import CHANNEL_NAMES
from wxadapter.wxs import Snapshot

T0_UNIX = 1622505600  # 2021-06-01T00:00:00Z
RES_MICRODEG = 10_000_000  # 10-degree test grid
LAT_COUNT, LON_COUNT = 19, 36


def make_snapshot(seed: int = 0, unix_seconds: int = T0_UNIX) -> Snapshot:
    rng = np.random.default_rng(seed)
    values = rng.normal(100.0, 25.0, size=(len(CHANNEL_NAMES), LAT_COUNT, LON_COUNT))
    return Snapshot(LAT_COUNT, LON_COUNT, RES_MICRODEG, unix_seconds,
                    values.astype(np.float32))


@pytest.fixture
def snapshot():
    return make_snapshot(seed=3)
