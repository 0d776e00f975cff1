"""Forecast backends and the autoregressive rollout driver.

Two backend kinds advance a snapshot by exactly 6 hours per step:

  - the built-in surrogate, a linear toy stepper (zonal advection plus
    relaxation toward per-variable reference means) used for desk-scale
    experiments and tests;
  - an external process speaking the exchange-directory protocol: the
    driver writes ``input.wxs`` into a fresh directory, invokes the
    configured command with that directory as its final argument, and
    reads back ``output.wxs`` with the valid time advanced by 6 hours.

Both are deterministic: the same input state always yields the same
output state, so repeated rollouts are bit-identical.
"""

from __future__ import annotations

import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from datetime import timedelta
from pathlib import Path
from typing import Iterator

import numpy as np

from .core import MODEL_TIMESTEP, FieldSet, same_layout
from .errors import (
    BackendError,
    BackendProcessError,
    BackendTimeoutError,
    BadBackendOutputError,
    ConfigError,
    NonFiniteStateError,
    RolloutDivergedError,
    RolloutError,
    StateFormatError,
)
from .perturb import VariableStats


@dataclass(frozen=True)
class SurrogateParams:
    """Toy dynamics: shift each field ``advect_cells_lon`` cells eastward,
    then relax by ``relax_rate`` toward the per-variable reference mean."""

    advect_cells_lon: int = 0
    relax_rate: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.relax_rate <= 1.0):
            raise ConfigError(f"relax_rate out of range [0, 1]: {self.relax_rate}")
        if self.advect_cells_lon != int(self.advect_cells_lon):
            raise ConfigError("advect_cells_lon must be an integer")


@dataclass(frozen=True)
class BackendDescriptor:
    """Configuration-level description of a forecast backend."""

    kind: str  # "surrogate" | "external"
    timestep: timedelta = MODEL_TIMESTEP
    surrogate: SurrogateParams | None = None
    command: tuple[str, ...] | None = None
    workdir: str | None = None
    timeout_s: float = 3600.0

    def __post_init__(self):
        if self.timestep != MODEL_TIMESTEP:
            raise ConfigError("backend timestep must be exactly 6 hours")
        if self.kind == "surrogate":
            if self.surrogate is None:
                object.__setattr__(self, "surrogate", SurrogateParams())
        elif self.kind == "external":
            if not self.command:
                raise ConfigError("external backend requires a command")
            object.__setattr__(self, "command", tuple(self.command))
            if self.timeout_s <= 0:
                raise ConfigError("backend timeout must be positive")
        else:
            raise ConfigError(f"unknown backend kind: {self.kind!r}")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind, "timestep_hours": self.timestep.total_seconds() / 3600.0}
        if self.kind == "surrogate":
            d["advect_cells_lon"] = self.surrogate.advect_cells_lon
            d["relax_rate"] = self.surrogate.relax_rate
        else:
            d["command"] = list(self.command)
            d["workdir"] = self.workdir
            d["timeout_s"] = self.timeout_s
        return d


def surrogate_step(state: FieldSet, params: SurrogateParams, reference_means: VariableStats | None) -> FieldSet:
    """One 6-hour step of the toy dynamics.

    Per channel: circular west-to-east shift by ``advect_cells_lon`` grid
    cells, then v <- v + relax_rate * (mean_x - v). Full relaxation
    (relax_rate = 1) lands exactly on the reference mean; a field already
    at its reference mean is a fixed point.
    """
    r = params.relax_rate
    if r > 0.0:
        if reference_means is None:
            raise ConfigError("relaxing surrogate requires reference means")
        reference_means.check_covers(state.catalog)
    values = np.roll(state.values, params.advect_cells_lon, axis=2)
    if r == 1.0:
        mu = reference_means.mean.astype(np.float32)
        values = np.broadcast_to(mu[:, None, None], state.values.shape).copy()
    elif r > 0.0:
        shifted = values.astype(np.float64)
        mu = reference_means.mean[:, None, None]
        values = (shifted + r * (mu - shifted)).astype(np.float32)
    return state.with_values(values, state.valid_time + MODEL_TIMESTEP)


class SurrogateBackend:
    """In-process deterministic stand-in for a real forecast model."""

    def __init__(self, params: SurrogateParams, reference_means: VariableStats | None = None):
        self.params = params
        self.reference_means = reference_means
        self.descriptor = BackendDescriptor(kind="surrogate", surrogate=params)

    def step(self, state: FieldSet) -> FieldSet:
        return surrogate_step(state, self.params, self.reference_means)


def external_step(state: FieldSet, descriptor: BackendDescriptor) -> FieldSet:
    """One step through the exchange-directory protocol.

    A fresh exchange directory is used per invocation so concurrent trials
    never collide; it is removed on success and kept for diagnosis on
    failure.
    """
    from .stateio import read_state, write_state  # deferred: stateio imports perturb

    if descriptor.kind != "external":
        raise ConfigError("external_step requires an external backend descriptor")
    base = Path(descriptor.workdir) if descriptor.workdir else Path(tempfile.gettempdir())
    base.mkdir(parents=True, exist_ok=True)
    exchange = Path(tempfile.mkdtemp(prefix="exchange-", dir=base))
    write_state(exchange / "input.wxs", state)
    cmd = [arg.replace("{dir}", str(exchange)) for arg in descriptor.command]
    if "{dir}" not in " ".join(descriptor.command):
        cmd.append(str(exchange))
    try:
        proc = subprocess.run(
            cmd,
            capture_output=True,
            text=True,
            timeout=descriptor.timeout_s,
        )
    except subprocess.TimeoutExpired:
        raise BackendTimeoutError(
            f"backend timeout after {descriptor.timeout_s}s (exchange dir kept: {exchange})"
        ) from None
    except OSError as e:
        raise BackendProcessError(f"backend process failed to start: {e}") from e
    if proc.returncode != 0:
        tail = (proc.stderr or "").strip()[-2000:]
        raise BackendProcessError(
            f"backend process failed with exit code {proc.returncode}"
            + (f": {tail}" if tail else "")
            + f" (exchange dir kept: {exchange})",
            exit_code=proc.returncode,
        )
    out_path = exchange / "output.wxs"
    if not out_path.exists():
        raise BadBackendOutputError(f"bad backend output: missing {out_path}")
    try:
        result = read_state(out_path)
    except StateFormatError as e:
        raise BadBackendOutputError(f"bad backend output: {e}") from e
    if not same_layout(result, state):
        raise BadBackendOutputError("bad backend output: grid or catalog mismatch")
    if result.valid_time != state.valid_time + MODEL_TIMESTEP:
        raise BadBackendOutputError(
            f"bad backend output: valid time {result.valid_time.isoformat()} "
            f"is not input + 6 h"
        )
    shutil.rmtree(exchange, ignore_errors=True)
    return result


class ExternalBackend:
    """Backend that shells out to an external forecast process."""

    def __init__(self, descriptor: BackendDescriptor):
        self.descriptor = descriptor

    def step(self, state: FieldSet) -> FieldSet:
        return external_step(state, self.descriptor)


def make_backend(descriptor: BackendDescriptor, reference_means: VariableStats | None = None):
    if descriptor.kind == "surrogate":
        return SurrogateBackend(descriptor.surrogate, reference_means)
    return ExternalBackend(descriptor)


@dataclass(frozen=True)
class ForecastRun:
    """A completed rollout: states[0] is the initial condition and each
    subsequent state is 6 hours later."""

    states: tuple[FieldSet, ...]
    backend: BackendDescriptor | None = None

    def __post_init__(self):
        states = tuple(self.states)
        if not states:
            raise ValueError("a run needs at least one state")
        for prev, cur in zip(states, states[1:]):
            if cur.valid_time - prev.valid_time != MODEL_TIMESTEP:
                raise ValueError("run states must be 6 hours apart, increasing")
        object.__setattr__(self, "states", states)

    @property
    def initial(self) -> FieldSet:
        return self.states[0]

    @property
    def steps(self) -> int:
        return len(self.states) - 1


def iter_rollout(backend, ic: FieldSet, steps: int) -> Iterator[FieldSet]:
    """Yield the initial state, then each of ``steps`` autoregressive
    steps. Failures raise RolloutError (RolloutDivergedError for
    non-finite output) carrying the failing step index."""
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    state = ic
    yield state
    for k in range(steps):
        try:
            nxt = backend.step(state)
        except NonFiniteStateError as e:
            raise RolloutDivergedError(
                f"backend produced non-finite state at step {k}", step_index=k
            ) from e
        except (BackendError, StateFormatError) as e:
            raise RolloutError(f"backend failed at step {k}: {e}", step_index=k) from e
        if nxt.valid_time != state.valid_time + MODEL_TIMESTEP:
            raise RolloutError(f"backend broke the 6-hour contract at step {k}", step_index=k)
        state = nxt
        yield state


def rollout(backend, ic: FieldSet, steps: int) -> ForecastRun:
    """Run ``steps`` autoregressive steps; the returned run includes the
    initial state, so it holds steps + 1 states."""
    states: list[FieldSet] = []
    try:
        for state in iter_rollout(backend, ic, steps):
            states.append(state)
    except RolloutError as e:
        e.partial_states = tuple(states)
        raise
    return ForecastRun(tuple(states), getattr(backend, "descriptor", None))


def clamp_physical(state: FieldSet) -> FieldSet:
    """Optional safeguard: clamp relative-humidity channels to their
    physical 0-100 % range. Every other channel is untouched. Idempotent."""
    values = state.values.copy()
    for c, entry in enumerate(state.catalog):
        if entry.name.startswith("rh"):
            np.clip(values[c], 0.0, 100.0, out=values[c])
    return state.with_values(values)
