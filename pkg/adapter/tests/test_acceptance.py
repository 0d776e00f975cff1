"""Secondary acceptance: protocol conformance against the real driver.

The driver package (wxrobust) is exercised strictly through its command
line and file formats; nothing from it is imported here.
"""

from __future__ import annotations

import subprocess
import sys

import pytest

from conftest import make_snapshot
from test_convert import make_archive
from wxadapter.catalog import CHANNEL_NAMES
from wxadapter.wxs import read_snapshot, write_snapshot

DRIVER = [sys.executable, "-m", "wxrobust"]
ADAPTER_CMD = f"{sys.executable} -m wxadapter step"


def _run(cmd, **kw):
    return subprocess.run(cmd, capture_output=True, text=True, **kw)


def test_driver_rollout_through_adapter_stub(tmp_path):
    """cmd_forecast with the adapter as external backend for 14 steps:
    every state equals the initial one, timestamps advance 6 h."""
    pytest.importorskip("wxrobust", reason="driver package required for conformance run")
    ic_path = tmp_path / "ic.wxs"
    snapshot = make_snapshot(seed=9)
    write_snapshot(ic_path, snapshot)
    out_dir = tmp_path / "run"
    proc = _run(DRIVER + [
        "forecast", str(ic_path),
        "--backend", "external",
        "--command", ADAPTER_CMD,
        "--workdir", str(tmp_path / "exchange"),
        "--steps", "14",
        "--out-dir", str(out_dir),
    ])
    assert proc.returncode == 0, proc.stderr
    states = sorted(out_dir.glob("state_*.wxs"))
    assert len(states) == 15
    for k, p in enumerate(states):
        snap = read_snapshot(p)
        assert snap.values.tobytes() == snapshot.values.tobytes()
        assert snap.unix_seconds == snapshot.unix_seconds + k * 6 * 3600


def test_exit_code_mapping(tmp_path):
    """0 on success, 2 on input validation failure, 3 on model load failure."""
    d = tmp_path / "exchange"
    d.mkdir()
    write_snapshot(d / "input.wxs", make_snapshot(seed=10))
    assert _run([sys.executable, "-m", "wxadapter", str(d)]).returncode == 0
    (d / "input.wxs").write_bytes(b"not a snapshot")
    assert _run([sys.executable, "-m", "wxadapter", str(d)]).returncode == 2
    write_snapshot(d / "input.wxs", make_snapshot(seed=10))
    assert _run([sys.executable, "-m", "wxadapter", "step", str(d),
                 "--model", "missing.ckpt"]).returncode == 3


def test_converted_slice_accepted_by_driver(tmp_path):
    """A complete synthetic archive slice converts to a .wxs the driver
    reads; a slice missing one variable fails naming it."""
    pytest.importorskip("wxrobust", reason="driver package required for conformance run")
    src = make_archive(tmp_path / "arch.h5", seed=4)
    out = tmp_path / "slice.wxs"
    assert _run([sys.executable, "-m", "wxadapter", "convert",
                 str(src), "2021-06-01T00:00:00Z", str(out)]).returncode == 0
    # the driver's stats command read_states the file; exit 0 means accepted
    proc = _run(DRIVER + ["stats", str(out), str(tmp_path / "slice.stats.csv")])
    assert proc.returncode == 0, proc.stderr
    assert len((tmp_path / "slice.stats.csv").read_text().splitlines()) == len(CHANNEL_NAMES)

    broken = make_archive(tmp_path / "broken.h5", omit=("z500",))
    proc = _run([sys.executable, "-m", "wxadapter", "convert",
                 str(broken), "2021-06-01T00:00:00Z", str(tmp_path / "broken.wxs")])
    assert proc.returncode == 2
    assert "z500" in proc.stderr
