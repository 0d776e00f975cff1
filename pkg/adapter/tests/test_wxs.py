"""Codec: round-trips and format validation."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from wxadapter.wxs import Snapshot, WxsFormatError, read_snapshot, write_snapshot


def test_roundtrip_bit_exact(tmp_path, snapshot):
    p = tmp_path / "s.wxs"
    write_snapshot(p, snapshot)
    back = read_snapshot(p)
    assert back.values.tobytes() == snapshot.values.tobytes()
    assert (back.lat_count, back.lon_count) == (snapshot.lat_count, snapshot.lon_count)
    assert back.unix_seconds == snapshot.unix_seconds
    assert back.resolution_microdeg == snapshot.resolution_microdeg


def test_deterministic_bytes(tmp_path, snapshot):
    a, b = tmp_path / "a.wxs", tmp_path / "b.wxs"
    write_snapshot(a, snapshot)
    write_snapshot(b, snapshot)
    assert a.read_bytes() == b.read_bytes()


def test_rejects_bad_magic(tmp_path, snapshot):
    p = tmp_path / "s.wxs"
    write_snapshot(p, snapshot)
    p.write_bytes(b"BADMAGIC" + p.read_bytes()[8:])
    with pytest.raises(WxsFormatError, match="bad magic"):
        read_snapshot(p)


def test_rejects_wrong_channel_count(tmp_path, snapshot):
    p = tmp_path / "s.wxs"
    write_snapshot(p, snapshot)
    raw = p.read_bytes()
    p.write_bytes(raw[:18] + struct.pack("<I", 72) + raw[22:])
    with pytest.raises(WxsFormatError, match="72"):
        read_snapshot(p)


def test_rejects_truncation(tmp_path, snapshot):
    p = tmp_path / "s.wxs"
    write_snapshot(p, snapshot)
    p.write_bytes(p.read_bytes()[:-40])
    with pytest.raises(WxsFormatError, match="payload"):
        read_snapshot(p)


def test_rejects_nonfinite(tmp_path, snapshot):
    values = snapshot.values.copy()
    values[0, 0, 0] = np.nan
    bad = Snapshot(snapshot.lat_count, snapshot.lon_count,
                   snapshot.resolution_microdeg, snapshot.unix_seconds, values)
    with pytest.raises(WxsFormatError, match="non-finite"):
        write_snapshot(tmp_path / "bad.wxs", bad)
