"""Small shared helpers: float formatting, UTC timestamps."""

from __future__ import annotations

import math
from datetime import datetime, timezone

UNIX_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def fmt_float(v: float) -> str:
    """Shortest decimal string that round-trips to the same float.

    Integral values drop the trailing ".0" (101325.0 -> "101325"); both
    forms parse back bit-exactly.
    """
    v = float(v)
    if math.isfinite(v) and v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def ensure_utc(t: datetime) -> datetime:
    """Validate and normalize a timestamp to whole-second UTC."""
    if t.tzinfo is None:
        raise ValueError("timestamp must be timezone-aware (UTC)")
    t = t.astimezone(timezone.utc)
    if t.microsecond != 0:
        raise ValueError("timestamp must be whole seconds")
    return t


def utc_from_unix(seconds: int) -> datetime:
    return datetime.fromtimestamp(seconds, tz=timezone.utc)


def iso_utc(t: datetime) -> str:
    return ensure_utc(t).isoformat()


def parse_utc(s: str) -> datetime:
    """Parse an ISO-8601 timestamp; a trailing Z and bare dates are accepted."""
    s = s.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    t = datetime.fromisoformat(s)
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return ensure_utc(t)
