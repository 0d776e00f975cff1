"""Noise injection and fully randomized initial-condition generation.

Perturbed states are built as x~ = x + noise with the noise drawn
independently per variable and grid point from
Normal(mean = sign * alpha * mean_x, std = beta * std_x), where mean_x and
std_x are the per-variable statistics of the reference snapshot. Fully
random states draw from a base distribution (chi2, lognormal, normal or
uniform), standardize the draw, and rescale it to each variable's
(mean_x, std_x).

Reproducibility: every channel gets an independent substream of a
counter-based generator keyed by (seed, channel index), so identical seeds
give bit-identical fields regardless of evaluation order or concurrency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .core import FieldSet, GridSpec, VariableCatalog
from .errors import ConfigError, DegenerateStdError, DistributionSpecError, MissingStatsError, NonFiniteStateError
from .util import UNIX_EPOCH

#: Noise levels exercised in the reference experiment design.
CANONICAL_NOISE_LEVELS = (0.0, 0.02, 0.05, 0.10, 0.20, 0.35, 0.50)

#: Supported base distributions for fully random initial conditions.
RANDOM_IC_DISTRIBUTIONS = ("chi2", "lognormal", "normal", "uniform")


@dataclass(frozen=True)
class VariableStats:
    """Per-variable mean and standard deviation, aligned to the catalog.

    std entries must be finite and non-negative; zero-std (constant
    channel) entries are tolerated in the object so they can be reported,
    but every operation that scales by std rejects them.
    """

    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64)
        std = np.array(self.std, dtype=np.float64)
        if mean.shape != (len(self.names),) or std.shape != (len(self.names),):
            raise ValueError("stats arrays must have one entry per variable")
        if not (np.isfinite(mean).all() and np.isfinite(std).all()):
            raise ValueError("stats must be finite")
        if (std < 0).any():
            raise ValueError("std must be non-negative")
        mean.flags.writeable = False
        std.flags.writeable = False
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.names)})

    @property
    def degenerate(self) -> tuple[str, ...]:
        """Names of variables with zero standard deviation."""
        return tuple(n for n, s in zip(self.names, self.std) if s <= 0)

    def mean_of(self, name: str) -> float:
        return float(self.mean[self._index[name]])

    def std_of(self, name: str) -> float:
        return float(self.std[self._index[name]])

    def check_covers(self, catalog: VariableCatalog) -> None:
        if self.names != catalog.names:
            missing = sorted(set(catalog.names) - set(self.names))
            raise MissingStatsError(
                f"missing stats: {', '.join(missing) if missing else 'variable order mismatch'}"
            )


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian perturbation: alpha scales a mean bias, beta scales the
    per-variable standard deviation; both are fractions in [0, 1]."""

    beta: float
    alpha: float = 0.0
    alpha_sign: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigError(f"alpha out of range [0, 1]: {self.alpha}")
        if not (0.0 <= self.beta <= 1.0):
            raise ConfigError(f"beta out of range [0, 1]: {self.beta}")
        if self.alpha_sign not in (1, -1):
            raise ConfigError(f"alpha_sign must be +1 or -1: {self.alpha_sign}")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class RandomICSpec:
    """Fully random initial condition sampled from one base distribution.

    ``standardize`` selects how the base draw is centered/scaled before
    rescaling to each variable's target stats: "empirical" (the draw's own
    sample moments; the target mean/std are then matched exactly) or
    "analytic" (the base distribution's closed-form moments).
    """

    distribution: str
    seed: int
    target: VariableStats
    chi2_dof: float = 4.0
    lognormal_mu: float = 0.0
    lognormal_sigma: float = 1.0
    normal_mean: float = 0.0
    normal_std: float = 1.0
    uniform_low: float = 0.0
    uniform_high: float = 1.0
    standardize: str = "empirical"

    def __post_init__(self):
        if self.distribution not in RANDOM_IC_DISTRIBUTIONS:
            raise DistributionSpecError(f"unsupported distribution: {self.distribution!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise DistributionSpecError("bad distribution spec: seed must be unsigned 64-bit")
        if self.standardize not in ("empirical", "analytic"):
            raise DistributionSpecError(f"bad distribution spec: standardize={self.standardize!r}")
        params = (self.chi2_dof, self.lognormal_mu, self.lognormal_sigma,
                  self.normal_mean, self.normal_std, self.uniform_low, self.uniform_high)
        if not all(math.isfinite(p) for p in params):
            raise DistributionSpecError("bad distribution spec: non-finite parameter")
        if self.chi2_dof < 1:
            raise DistributionSpecError(f"bad distribution spec: chi2 dof {self.chi2_dof} < 1")
        if self.lognormal_sigma <= 0:
            raise DistributionSpecError("bad distribution spec: lognormal sigma must be > 0")
        if self.normal_std <= 0:
            raise DistributionSpecError("bad distribution spec: normal std must be > 0")
        if not self.uniform_low < self.uniform_high:
            raise DistributionSpecError("bad distribution spec: uniform requires low < high")

    def base_moments(self) -> tuple[float, float]:
        """Closed-form (mean, std) of the base distribution."""
        if self.distribution == "chi2":
            return self.chi2_dof, math.sqrt(2.0 * self.chi2_dof)
        if self.distribution == "lognormal":
            m, s = self.lognormal_mu, self.lognormal_sigma
            return (
                math.exp(m + s * s / 2.0),
                math.sqrt((math.exp(s * s) - 1.0) * math.exp(2.0 * m + s * s)),
            )
        if self.distribution == "normal":
            return self.normal_mean, self.normal_std
        lo, hi = self.uniform_low, self.uniform_high
        return (lo + hi) / 2.0, (hi - lo) / math.sqrt(12.0)

    def draw_base(self, rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        if self.distribution == "chi2":
            return rng.chisquare(self.chi2_dof, size=shape)
        if self.distribution == "lognormal":
            return rng.lognormal(self.lognormal_mu, self.lognormal_sigma, size=shape)
        if self.distribution == "normal":
            return rng.normal(self.normal_mean, self.normal_std, size=shape)
        return rng.uniform(self.uniform_low, self.uniform_high, size=shape)


def channel_rng(seed: int, channel_index: int) -> np.random.Generator:
    """Independent counter-based substream for one channel of one seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=(int(seed), int(channel_index)))))


def compute_stats(fs: FieldSet, allow_degenerate: bool = False) -> VariableStats:
    """Per-variable mean and population standard deviation over all grid
    points, accumulated in float64."""
    n_channels = len(fs.catalog)
    mean = np.empty(n_channels)
    std = np.empty(n_channels)
    for c in range(n_channels):
        flat = fs.values[c].reshape(-1)
        mean[c] = flat.mean(dtype=np.float64)
        std[c] = math.sqrt(flat.var(dtype=np.float64))
    stats = VariableStats(names=fs.catalog.names, mean=mean, std=std)
    if stats.degenerate and not allow_degenerate:
        raise DegenerateStdError(f"degenerate std: {', '.join(stats.degenerate)}")
    return stats


def inject_noise(fs: FieldSet, stats: VariableStats, spec: NoiseSpec) -> FieldSet:
    """Add independent Gaussian noise to every variable and grid point.

    alpha = beta = 0 returns the input unchanged (bit-identical, no RNG
    consumed). Identical (fs, stats, spec) give bit-identical outputs.
    """
    stats.check_covers(fs.catalog)
    if spec.alpha == 0.0 and spec.beta == 0.0:
        return fs
    if spec.beta > 0.0 and stats.degenerate:
        raise DegenerateStdError(f"degenerate std: {', '.join(stats.degenerate)}")
    out = np.empty_like(fs.values)
    for c in range(len(fs.catalog)):
        loc = spec.alpha_sign * spec.alpha * stats.mean[c]
        if spec.beta == 0.0:
            noise = loc  # constant bias needs no draw
        else:
            rng = channel_rng(spec.seed, c)
            noise = rng.normal(loc, spec.beta * stats.std[c], size=fs.values[c].shape)
        out[c] = (fs.values[c] + noise).astype(np.float32)
    try:
        return fs.with_values(out)
    except NonFiniteStateError:
        raise NonFiniteStateError("non-finite perturbation") from None


def random_ic(
    grid: GridSpec,
    catalog: VariableCatalog,
    spec: RandomICSpec,
    valid_time: datetime = UNIX_EPOCH,
) -> FieldSet:
    """Fully random snapshot: per variable, i.i.d. base-distribution draws
    standardized and rescaled to the target stats. No physical bounds are
    applied; unphysical values (e.g. negative humidity) are expected."""
    spec.target.check_covers(catalog)
    if spec.target.degenerate:
        raise DegenerateStdError(f"degenerate std: {', '.join(spec.target.degenerate)}")
    shape = (grid.lat_count, grid.lon_count)
    out = np.empty((len(catalog),) + shape, dtype=np.float32)
    for c in range(len(catalog)):
        rng = channel_rng(spec.seed, c)
        sample = spec.draw_base(rng, shape)
        if spec.standardize == "analytic":
            base_mean, base_std = spec.base_moments()
        else:
            base_mean = float(sample.mean())
            base_std = float(sample.std())
            if base_std == 0.0:
                raise DistributionSpecError("bad distribution spec: sample has zero spread")
        z = (sample - base_mean) / base_std
        out[c] = (spec.target.mean[c] + spec.target.std[c] * z).astype(np.float32)
    return FieldSet(grid, catalog, valid_time, out)
