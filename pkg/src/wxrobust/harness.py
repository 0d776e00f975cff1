"""Ensemble experiment orchestration.

Runs the noise-level x trial matrix (or the random-IC variant): each trial
derives its own seed, perturbs the reference initial condition, rolls the
forecast out, tracks the storm, summarizes errors per timestep, and writes
its artifacts. Per-level aggregates (mean/std of mean trajectory error and
the median trial) are recomputed exactly from the trial records.

Determinism: trial seeds are a pure function of (base seed, level index,
trial index); trials are independent, so results and artifacts are
bit-identical whether they run serially or on a worker pool.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import errstats, stateio
from .core import MODEL_TIMESTEP, FieldSet, Region, TrackPoint, Trajectory
from .errors import (
    AllTrialsFailedError,
    BackendError,
    ConfigError,
    RolloutDivergedError,
    RolloutError,
    TrackingError,
)
from .forecast import BackendDescriptor, iter_rollout, make_backend
from .perturb import (
    CANONICAL_NOISE_LEVELS,
    RANDOM_IC_DISTRIBUTIONS,
    NoiseSpec,
    RandomICSpec,
    compute_stats,
    inject_noise,
    random_ic,
)
from .tracking import TrackConfig, locate_center, mean_trajectory_error, track_states
from .util import fmt_float, iso_utc

MANIFEST_FORMAT = "wxrobust-manifest/1"
MANIFEST_NAME = "manifest.json"

_M64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """One round of the splitmix64 mixer (a bijection on 64-bit words)."""
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def derive_trial_seed(base_seed: int, group_index: int, trial_index: int) -> int:
    """base_seed XOR mix(group, trial). The mixer is bijective and the
    (group, trial) packing is injective, so seeds within one experiment
    are always distinct."""
    if not (0 <= group_index < 2**31 and 0 <= trial_index < 2**31):
        raise ConfigError("group/trial index out of range")
    return (int(base_seed) ^ _splitmix64((group_index << 32) | trial_index)) & _M64


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one perturb -> forecast -> evaluate pipeline execution."""

    label: str  # artifact directory group, e.g. "level_0.05" or "dist_chi2"
    trial_index: int
    seed: int
    status: str  # "ok" | "diverged" | "failed"
    level: float | None = None
    distribution: str | None = None
    mte_km: float | None = None
    error: str | None = None
    artifacts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "label": self.label,
            "trial_index": self.trial_index,
            "seed": self.seed,
            "status": self.status,
        }
        if self.level is not None:
            d["level"] = self.level
        if self.distribution is not None:
            d["distribution"] = self.distribution
        d["mte_km"] = self.mte_km
        if self.error is not None:
            d["error"] = self.error
        d["artifacts"] = dict(sorted(self.artifacts.items()))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        return cls(
            label=d["label"],
            trial_index=d["trial_index"],
            seed=d["seed"],
            status=d["status"],
            level=d.get("level"),
            distribution=d.get("distribution"),
            mte_km=d.get("mte_km"),
            error=d.get("error"),
            artifacts=d.get("artifacts", {}),
        )


@dataclass(frozen=True)
class GroupAggregate:
    """Per-level (or per-distribution) aggregate over successful trials."""

    label: str
    level: float | None
    distribution: str | None
    n_trials: int
    n_ok: int
    n_diverged: int
    n_failed: int
    mean_mte_km: float | None
    std_mte_km: float | None
    median_seed: int | None
    median_trial_index: int | None

    def to_dict(self) -> dict:
        d = {"label": self.label}
        if self.level is not None:
            d["level"] = self.level
        if self.distribution is not None:
            d["distribution"] = self.distribution
        d.update(
            n_trials=self.n_trials,
            n_ok=self.n_ok,
            n_diverged=self.n_diverged,
            n_failed=self.n_failed,
            mean_mte_km=self.mean_mte_km,
            std_mte_km=self.std_mte_km,
            median_seed=self.median_seed,
            median_trial_index=self.median_trial_index,
        )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GroupAggregate":
        return cls(
            label=d["label"],
            level=d.get("level"),
            distribution=d.get("distribution"),
            n_trials=d["n_trials"],
            n_ok=d["n_ok"],
            n_diverged=d["n_diverged"],
            n_failed=d["n_failed"],
            mean_mte_km=d.get("mean_mte_km"),
            std_mte_km=d.get("std_mte_km"),
            median_seed=d.get("median_seed"),
            median_trial_index=d.get("median_trial_index"),
        )


@dataclass(frozen=True)
class ExperimentManifest:
    """Full record of an ensemble run. Artifact paths are relative to the
    manifest's directory; wall-clock information lives only under
    ``metadata`` so reruns compare bit-identically without it."""

    config: dict
    trials: tuple[TrialRecord, ...]
    aggregates: tuple[GroupAggregate, ...]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "metadata": dict(self.metadata),
            "config": self.config,
            "trials": [t.to_dict() for t in self.trials],
            "aggregates": [a.to_dict() for a in self.aggregates],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentManifest":
        if d.get("format") != MANIFEST_FORMAT:
            raise ConfigError(f"not a manifest file (format {d.get('format')!r})")
        return cls(
            config=d["config"],
            trials=tuple(TrialRecord.from_dict(t) for t in d["trials"]),
            aggregates=tuple(GroupAggregate.from_dict(a) for a in d["aggregates"]),
            metadata=d.get("metadata", {}),
        )

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="ascii")

    @classmethod
    def read(cls, path) -> "ExperimentManifest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="ascii")))


def median_by_mte(records: Sequence[TrialRecord]) -> TrialRecord:
    """The successful record with the (lower) median mean trajectory
    error; ties break to the smaller seed."""
    ok = [r for r in records if r.status == "ok" and r.mte_km is not None]
    if not ok:
        raise AllTrialsFailedError("all trials failed")
    ok.sort(key=lambda r: (r.mte_km, r.seed))
    return ok[(len(ok) - 1) // 2]


def recompute_group_aggregate(label: str, records: Sequence[TrialRecord]) -> GroupAggregate:
    """Aggregate a group's records; mean/std (population) are exact
    recomputations from the per-trial errors."""
    ok = [r for r in records if r.status == "ok"]
    mtes = np.array([r.mte_km for r in ok], dtype=np.float64)
    try:
        med = median_by_mte(records)
        median_seed, median_trial = med.seed, med.trial_index
    except AllTrialsFailedError:
        median_seed = median_trial = None
    first = records[0]
    return GroupAggregate(
        label=label,
        level=first.level,
        distribution=first.distribution,
        n_trials=len(records),
        n_ok=len(ok),
        n_diverged=sum(r.status == "diverged" for r in records),
        n_failed=sum(r.status == "failed" for r in records),
        mean_mte_km=float(mtes.mean()) if ok else None,
        std_mte_km=float(np.sqrt(np.mean((mtes - mtes.mean()) ** 2))) if ok else None,
        median_seed=median_seed,
        median_trial_index=median_trial,
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Noise-injection experiment matrix."""

    truth_paths: tuple[str, ...]
    backend: BackendDescriptor
    track: TrackConfig
    out_dir: str
    levels: tuple[float, ...] = CANONICAL_NOISE_LEVELS
    level_mode: str = "default"  # "default" restricts to the canonical set
    alpha: float = 0.0
    alpha_sign: int = 1
    trials: int = 30
    base_seed: int = 0
    eval_variable: str = "msl"
    eval_region: Region | None = None
    hist_range: float = errstats.DEFAULT_HIST_RANGE
    workers: int = 1
    keep_states: bool = False

    def __post_init__(self):
        _validate_common(self)
        if self.level_mode not in ("default", "explicit"):
            raise ConfigError(f"level_mode must be 'default' or 'explicit': {self.level_mode!r}")
        if not self.levels:
            raise ConfigError("at least one noise level is required")
        for b in self.levels:
            if not (0.0 <= b <= 1.0):
                raise ConfigError(f"beta out of range [0, 1]: {b}")
            if self.level_mode == "default" and b not in CANONICAL_NOISE_LEVELS:
                raise ConfigError(
                    f"beta {b} is not a canonical level {CANONICAL_NOISE_LEVELS}; "
                    "use level_mode 'explicit' for arbitrary levels"
                )
        NoiseSpec(beta=0.0, alpha=self.alpha, alpha_sign=self.alpha_sign)  # validates alpha fields

    def echo(self) -> dict:
        return {
            "mode": "noise",
            "truth_paths": list(self.truth_paths),
            "backend": self.backend.to_dict(),
            "track": _track_dict(self.track),
            "levels": list(self.levels),
            "level_mode": self.level_mode,
            "alpha": self.alpha,
            "alpha_sign": self.alpha_sign,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "eval_variable": self.eval_variable,
            "eval_region": _region_dict(self.eval_region),
            "hist_range": self.hist_range,
            "keep_states": self.keep_states,
        }


@dataclass(frozen=True)
class RandomICExperimentConfig:
    """Fully-random-IC experiment: global analysis only, no tracking."""

    truth_paths: tuple[str, ...]
    backend: BackendDescriptor
    out_dir: str
    distributions: tuple[str, ...] = RANDOM_IC_DISTRIBUTIONS
    trials: int = 1
    base_seed: int = 0
    standardize: str = "empirical"
    eval_variable: str = "msl"
    eval_region: Region | None = None
    hist_range: float = errstats.DEFAULT_HIST_RANGE
    workers: int = 1
    keep_states: bool = False

    def __post_init__(self):
        _validate_common(self)
        if not self.distributions:
            raise ConfigError("at least one distribution is required")
        for d in self.distributions:
            if d not in RANDOM_IC_DISTRIBUTIONS:
                raise ConfigError(f"unsupported distribution: {d!r}")

    def echo(self) -> dict:
        return {
            "mode": "random_ic",
            "truth_paths": list(self.truth_paths),
            "backend": self.backend.to_dict(),
            "distributions": list(self.distributions),
            "trials": self.trials,
            "base_seed": self.base_seed,
            "standardize": self.standardize,
            "eval_variable": self.eval_variable,
            "eval_region": _region_dict(self.eval_region),
            "hist_range": self.hist_range,
            "keep_states": self.keep_states,
        }


def _validate_common(cfg) -> None:
    if len(cfg.truth_paths) < 2:
        raise ConfigError("truth series needs at least two states (one forecast step)")
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if not cfg.hist_range > 0:
        raise ConfigError("hist_range must be positive")
    if not (0 <= int(cfg.base_seed) < 2**64):
        raise ConfigError("base_seed must be an unsigned 64-bit integer")


def _region_dict(region: Region | None) -> dict | None:
    if region is None:
        return None
    return {
        "lat_min": region.lat_min,
        "lat_max": region.lat_max,
        "lon_min": region.lon_min,
        "lon_max": region.lon_max,
    }


def _track_dict(track: TrackConfig) -> dict:
    return {
        "region": _region_dict(track.region),
        "continuity_radius_km": track.continuity_radius_km,
    }


def _load_truth(paths: Sequence[str]) -> list[FieldSet]:
    truth = [stateio.read_state(p) for p in paths]
    for prev, cur in zip(truth, truth[1:]):
        if cur.valid_time - prev.valid_time != MODEL_TIMESTEP:
            raise ConfigError("truth series must be 6-hour spaced, increasing")
    return truth


def _trial_dir(out_dir: Path, label: str, trial_index: int) -> Path:
    return out_dir / label / f"trial_{trial_index:03d}"


def level_label(level: float) -> str:
    return f"level_{fmt_float(level)}"


class _TrialRunner:
    """Shared context for all trials of one experiment."""

    def __init__(self, cfg, truth, stats, out_dir: Path):
        self.cfg = cfg
        self.truth = truth
        self.stats = stats
        self.out_dir = out_dir
        self.steps = len(truth) - 1
        self.backend = make_backend(cfg.backend, reference_means=stats)
        self.track_cfg = getattr(cfg, "track", None)
        self.truth_traj = track_states(truth, self.track_cfg) if self.track_cfg else None

    def run_trial(self, label: str, trial_index: int, seed: int, ic: FieldSet,
                  level: float | None = None, distribution: str | None = None) -> TrialRecord:
        cfg = self.cfg
        trial_dir = _trial_dir(self.out_dir, label, trial_index)
        centers: list[tuple[float, float]] = []
        summaries: list = []
        states_kept: list[Path] = []
        trial_dir.mkdir(parents=True, exist_ok=True)
        try:
            prior = None
            for k, state in enumerate(iter_rollout(self.backend, ic, self.steps)):
                if self.track_cfg is not None:
                    center = locate_center(state, self.track_cfg, prior)
                    centers.append(center)
                    prior = center
                ef = errstats.error_field(state, self.truth[k], cfg.eval_variable,
                                          cfg.eval_region, step_index=k)
                summaries.append(errstats.summarize(ef, cfg.hist_range))
                if cfg.keep_states:
                    p = trial_dir / f"state_{k:03d}.wxs"
                    stateio.write_state(p, state)
                    states_kept.append(p)
        except RolloutDivergedError as e:
            return TrialRecord(label=label, trial_index=trial_index, seed=seed, status="diverged",
                               level=level, distribution=distribution, error=str(e))
        except (RolloutError, BackendError, TrackingError) as e:
            return TrialRecord(label=label, trial_index=trial_index, seed=seed, status="failed",
                               level=level, distribution=distribution, error=str(e))

        artifacts: dict[str, str] = {}
        mte = None
        if self.track_cfg is not None:
            times = [self.truth[0].valid_time + k * MODEL_TIMESTEP for k in range(len(centers))]
            traj = Trajectory(tuple(
                TrackPoint(t, c[0], c[1]) for t, c in zip(times, centers)
            ))
            mte = mean_trajectory_error(traj, self.truth_traj)
            traj_path = trial_dir / "trajectory.csv"
            write_trajectory_csv(traj_path, traj)
            artifacts["trajectory"] = str(traj_path.relative_to(self.out_dir))

        rows = [
            {"label": label, "trial": trial_index, "seed": seed,
             "variable": cfg.eval_variable, "timestep": k,
             "time": self.truth[k].valid_time, "summary": s}
            for k, s in enumerate(summaries)
        ]
        summary_path = trial_dir / "summary.csv"
        errstats.write_summary_csv(summary_path, rows,
                                   lead_fields=("label", "trial", "seed", "variable", "timestep", "time"))
        artifacts["summary"] = str(summary_path.relative_to(self.out_dir))
        for name, s in (("hist_initial", summaries[0]), ("hist_final", summaries[-1])):
            p = trial_dir / f"{name}.csv"
            errstats.write_histogram_csv(p, s)
            artifacts[name] = str(p.relative_to(self.out_dir))
        for p in states_kept:
            artifacts[p.stem] = str(p.relative_to(self.out_dir))
        return TrialRecord(label=label, trial_index=trial_index, seed=seed, status="ok",
                           level=level, distribution=distribution, mte_km=mte, artifacts=artifacts)


def write_trajectory_csv(path, traj: Trajectory) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("time,lat,lon\n")
        for p in traj:
            f.write(f"{iso_utc(p.time)},{fmt_float(p.lat)},{fmt_float(p.lon)}\n")


def _execute(jobs, workers: int):
    """Run trial jobs, returning results in job order regardless of
    completion order (scheduling-independent)."""
    if workers <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def _finalize(cfg, records, group_labels, out_dir: Path) -> ExperimentManifest:
    aggregates = tuple(
        recompute_group_aggregate(label, [r for r in records if r.label == label])
        for label in group_labels
    )
    manifest = ExperimentManifest(
        config=cfg.echo(),
        trials=tuple(records),
        aggregates=aggregates,
        metadata={"generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds")},
    )
    manifest.write(out_dir / MANIFEST_NAME)
    (out_dir / "summary.txt").write_text(format_manifest_table(manifest), encoding="ascii")
    _write_combined_summaries(out_dir, records)
    return manifest


def _write_combined_summaries(out_dir: Path, records) -> None:
    """One experiment-wide CSV with a row per (group, trial, timestep)."""
    lines: list[str] = []
    for rec in records:
        summary = rec.artifacts.get("summary")
        if summary is None:
            continue
        rows = (out_dir / summary).read_text(encoding="ascii").splitlines()
        if not lines:
            lines.append(rows[0])
        lines.extend(rows[1:])
    if lines:
        (out_dir / "summaries.csv").write_text("\n".join(lines) + "\n", encoding="ascii")


def run_experiment(cfg: ExperimentConfig) -> ExperimentManifest:
    """Noise-level x trial matrix: perturb, forecast, track, evaluate.

    Diverged or failed trials are recorded with their status and excluded
    from aggregates; the exclusion counts are part of the manifest.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    truth = _load_truth(cfg.truth_paths)
    stats = compute_stats(truth[0])
    runner = _TrialRunner(cfg, truth, stats, out_dir)

    def make_job(li: int, level: float, ti: int):
        def job() -> TrialRecord:
            seed = derive_trial_seed(cfg.base_seed, li, ti)
            spec = NoiseSpec(beta=level, alpha=cfg.alpha, alpha_sign=cfg.alpha_sign, seed=seed)
            ic = inject_noise(truth[0], stats, spec)
            return runner.run_trial(level_label(level), ti, seed, ic, level=level)

        return job

    jobs = [make_job(li, level, ti)
            for li, level in enumerate(cfg.levels) for ti in range(cfg.trials)]
    records = _execute(jobs, cfg.workers)
    return _finalize(cfg, records, [level_label(b) for b in cfg.levels], out_dir)


def run_random_ic_experiment(cfg: RandomICExperimentConfig) -> ExperimentManifest:
    """Distribution x trial matrix with fully random initial conditions.

    Tracking is skipped entirely (the random states contain no storm), so
    records carry no trajectory error; global error summaries per timestep
    are the product."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    truth = _load_truth(cfg.truth_paths)
    stats = compute_stats(truth[0])
    runner = _TrialRunner(cfg, truth, stats, out_dir)

    def make_job(di: int, dist: str, ti: int):
        def job() -> TrialRecord:
            seed = derive_trial_seed(cfg.base_seed, di, ti)
            spec = RandomICSpec(distribution=dist, seed=seed, target=stats,
                                standardize=cfg.standardize)
            ic = random_ic(truth[0].grid, truth[0].catalog, spec, valid_time=truth[0].valid_time)
            return runner.run_trial(f"dist_{dist}", ti, seed, ic, distribution=dist)

        return job

    jobs = [make_job(di, dist, ti)
            for di, dist in enumerate(cfg.distributions) for ti in range(cfg.trials)]
    records = _execute(jobs, cfg.workers)
    return _finalize(cfg, records, [f"dist_{d}" for d in cfg.distributions], out_dir)


def format_manifest_table(manifest: ExperimentManifest) -> str:
    """Human-readable per-group aggregate table."""
    header = f"{'group':<16}{'trials':>7}{'ok':>5}{'divg':>6}{'fail':>6}{'mean MTE km':>14}{'std MTE km':>13}{'median seed':>21}"
    lines = [header, "-" * len(header)]
    for a in manifest.aggregates:
        mean = f"{a.mean_mte_km:.3f}" if a.mean_mte_km is not None else "-"
        std = f"{a.std_mte_km:.3f}" if a.std_mte_km is not None else "-"
        med = str(a.median_seed) if a.median_seed is not None else "-"
        lines.append(
            f"{a.label:<16}{a.n_trials:>7}{a.n_ok:>5}{a.n_diverged:>6}{a.n_failed:>6}{mean:>14}{std:>13}{med:>21}"
        )
    excluded = sum(a.n_diverged + a.n_failed for a in manifest.aggregates)
    lines.append(f"excluded trials: {excluded}")
    return "\n".join(lines) + "\n"
