"""Minimal exchange-protocol backend used by the test suite.

Invoked as ``python stub_backend.py <exchange_dir>``. Default behavior is
the identity model: copy input to output with the valid time advanced by
6 hours. The STUB_MODE environment variable selects failure behaviors so
the driver's error paths can be exercised:

    ok            identity step (default)
    exit3         exit with code 3, message on stderr
    badchannels   write an output declaring 72 channels
    notime        write output without advancing the valid time
    sleep         sleep 30 s (for timeout tests)
    diverge       write an output whose payload is +inf
    diverge-rough diverge only if the payload roughness (mean absolute
                  adjacent difference) exceeds STUB_THRESHOLD
"""

from __future__ import annotations

import os
import struct
import sys
import time
from datetime import timedelta
from pathlib import Path


def _patch_state_bytes(raw: bytes, *, time_shift_s: int = 0, channel_count: int | None = None,
                       inf_payload: bool = False) -> bytes:
    """Rewrite header fields / payload of a .wxs byte string directly, so
    malformed outputs can be produced without the library refusing."""
    head = struct.Struct("<8sHIIIqI")
    magic, version, lats, lons, channels, unix_s, micro = head.unpack_from(raw)
    if channel_count is not None:
        channels = channel_count
    header = head.pack(magic, version, lats, lons, channels, unix_s + time_shift_s, micro)
    rest = raw[head.size:]
    if inf_payload:
        table_len = 0
        pos = head.size
        for _ in range(struct.unpack_from("<I", raw, 18)[0]):
            n = raw[pos]
            pos += 1 + n
            table_len += 1 + n
        table = raw[head.size : head.size + table_len]
        payload_floats = (len(raw) - head.size - table_len) // 4
        return header + table + struct.pack("<f", float("inf")) * payload_floats
    return header + rest


def main() -> int:
    exchange = Path(sys.argv[1])
    mode = os.environ.get("STUB_MODE", "ok")
    raw = (exchange / "input.wxs").read_bytes()
    if mode == "exit3":
        print("stub backend: simulated model failure", file=sys.stderr)
        return 3
    if mode == "sleep":
        time.sleep(30)
        return 0
    shift = int(timedelta(hours=6).total_seconds())
    if mode == "badchannels":
        out = _patch_state_bytes(raw, time_shift_s=shift, channel_count=72)
    elif mode == "notime":
        out = _patch_state_bytes(raw, time_shift_s=0)
    elif mode == "diverge":
        out = _patch_state_bytes(raw, time_shift_s=shift, inf_payload=True)
    elif mode == "diverge-rough":
        import numpy as np

        head_size = struct.calcsize("<8sHIIIqI")
        channels = struct.unpack_from("<I", raw, 18)[0]
        pos = head_size
        for _ in range(channels):
            pos += 1 + raw[pos]
        values = np.frombuffer(raw, dtype="<f4", offset=pos).astype(np.float64)
        roughness = float(np.abs(np.diff(values)).mean())
        threshold = float(os.environ.get("STUB_THRESHOLD", "1e9"))
        out = _patch_state_bytes(raw, time_shift_s=shift, inf_payload=roughness > threshold)
    else:
        out = _patch_state_bytes(raw, time_shift_s=shift)
    (exchange / "output.wxs").write_bytes(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
