"""One protocol step: read input.wxs, run the wrapped model, write output.wxs.

The adapter owns everything model-specific: channel-order permutation
between the exchange catalog and the model's native order, device
placement, and checkpoint loading. The built-in "stub" model is an
identity step used for protocol-conformance testing; real model wrappers
register the same interface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .catalog import CHANNEL_NAMES
from .wxs import Snapshot, WxsFormatError, read_snapshot, write_snapshot


class ModelLoadError(Exception):
    """The configured model could not be loaded."""


class StubModel:
    """Identity dynamics: returns the state unchanged (time handling is the
    adapter's job). Keeps the protocol path fully exercisable without any
    neural runtime."""

    def step(self, values: np.ndarray) -> np.ndarray:
        return values


@dataclass
class AdapterConfig:
    """Model selection plus channel-order mapping.

    ``mapping_path`` points to a JSON file giving the model's native
    channel order (a list of the 73 exchange names, or an object with a
    "model_order" key). Omitted means the model consumes exchange order.
    """

    model: str = "stub"
    device: str = "cpu"
    mapping_path: str | None = None

    def load_permutation(self) -> np.ndarray:
        """Indices such that values[perm] is in model order."""
        if self.mapping_path is None:
            return np.arange(len(CHANNEL_NAMES))
        try:
            raw = json.loads(Path(self.mapping_path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise WxsFormatError(f"cannot read channel mapping: {e}") from e
        order = raw["model_order"] if isinstance(raw, dict) else raw
        if sorted(order) != sorted(CHANNEL_NAMES):
            raise WxsFormatError("channel mapping must be a complete permutation of the 73 names")
        index = {name: c for c, name in enumerate(CHANNEL_NAMES)}
        return np.array([index[name] for name in order])


def load_model(config: AdapterConfig):
    if config.model == "stub":
        return StubModel()
    # Real checkpoints would be wired in here (weights, device, the lot);
    # this build ships only the stub.
    raise ModelLoadError(f"cannot load model {config.model!r}: no such model is available")


def invert_permutation(perm: np.ndarray) -> np.ndarray:
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return inv


def adapter_step(exchange_dir, config: AdapterConfig) -> None:
    """Advance input.wxs by one 6-hour step into output.wxs."""
    exchange = Path(exchange_dir)
    in_path = exchange / "input.wxs"
    if not in_path.exists():
        raise WxsFormatError(f"no input.wxs in {exchange}")
    snap = read_snapshot(in_path)
    perm = config.load_permutation()
    model = load_model(config)
    model_in = snap.values[perm]
    model_out = model.step(model_in)
    if model_out.shape != model_in.shape:
        raise WxsFormatError("model returned wrong shape")
    out_values = np.ascontiguousarray(model_out[invert_permutation(perm)])
    out = Snapshot(snap.lat_count, snap.lon_count, snap.resolution_microdeg,
                   snap.unix_seconds, out_values).advanced(hours=6)
    write_snapshot(exchange / "output.wxs", out)
