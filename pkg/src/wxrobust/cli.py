"""Command-line entry point.

Thin composition of the library operations; no statistics logic lives
here. Exit codes are a stable scripting contract:

    0  success
    1  usage error (bad flags or parameter values)
    2  data/validation error (unreadable or invalid files, bad config)
    3  backend failure (external process, timeout, divergence)

All outputs are plot-ready CSV or the machine-readable manifest; nothing
is rendered.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import yaml

from . import __version__
from .core import GridSpec, Region, build_catalog
from .errors import (
    BackendError,
    ConfigError,
    RolloutError,
    WxError,
)
from .errstats import DEFAULT_HIST_RANGE, series_over_time, write_histogram_csv, write_summary_csv
from .forecast import BackendDescriptor, ForecastRun, SurrogateParams, make_backend, rollout
from .harness import (
    ExperimentConfig,
    ExperimentManifest,
    RandomICExperimentConfig,
    format_manifest_table,
    recompute_group_aggregate,
    run_experiment,
    run_random_ic_experiment,
    write_trajectory_csv,
)
from .perturb import (
    CANONICAL_NOISE_LEVELS,
    RANDOM_IC_DISTRIBUTIONS,
    NoiseSpec,
    RandomICSpec,
    compute_stats,
    inject_noise,
    random_ic,
)
from .stateio import read_state, read_stats, write_state, write_stats
from .tracking import TrackConfig, mean_trajectory_error, track_states
from .util import fmt_float, parse_utc

WORKERS_ENV = "WXROBUST_WORKERS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise UsageError(message)


def _parse_region(text: str) -> Region:
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError(f"region must be lat_min,lat_max,lon_min,lon_max: {text!r}")
    try:
        lat_min, lat_max, lon_min, lon_max = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"region values must be numbers: {text!r}") from None
    try:
        return Region(lat_min, lat_max, lon_min, lon_max)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _state_paths(directory: str) -> list[Path]:
    paths = sorted(Path(directory).glob("*.wxs"))
    if not paths:
        raise ConfigError(f"no .wxs state files in {directory}")
    return paths


def _load_series(directory: str):
    return [read_state(p) for p in _state_paths(directory)]


def cmd_stats(args) -> int:
    fs = read_state(args.input)
    stats = compute_stats(fs, allow_degenerate=True)
    if stats.degenerate:
        print(f"warning: degenerate std (constant channel): {', '.join(stats.degenerate)}",
              file=sys.stderr)
    write_stats(args.output, stats, allow_degenerate=True)
    return 0


def cmd_perturb(args) -> int:
    if not (0.0 <= args.beta <= 1.0):
        raise UsageError(f"beta out of range [0, 1]: {args.beta}")
    if not (0.0 <= args.alpha <= 1.0):
        raise UsageError(f"alpha out of range [0, 1]: {args.alpha}")
    if args.alpha_sign not in (1, -1):
        raise UsageError("alpha-sign must be 1 or -1")
    fs = read_state(args.input)
    stats = read_stats(args.stats)
    spec = NoiseSpec(beta=args.beta, alpha=args.alpha, alpha_sign=args.alpha_sign, seed=args.seed)
    write_state(args.output, inject_noise(fs, stats, spec))
    return 0


def cmd_randomize(args) -> int:
    if args.dist not in RANDOM_IC_DISTRIBUTIONS:
        raise UsageError(f"unsupported distribution: {args.dist!r} "
                         f"(choose from {', '.join(RANDOM_IC_DISTRIBUTIONS)})")
    stats = read_stats(args.stats)
    grid = GridSpec.from_resolution(args.resolution)
    spec = RandomICSpec(distribution=args.dist, seed=args.seed, target=stats,
                        standardize=args.standardize)
    fs = random_ic(grid, build_catalog(), spec, valid_time=parse_utc(args.time))
    write_state(args.output, fs)
    return 0


def cmd_forecast(args) -> int:
    if args.steps < 1:
        raise UsageError(f"steps must be >= 1, got {args.steps}")
    ic = read_state(args.input)
    if args.backend == "surrogate":
        if args.relax > 0 and not args.stats:
            raise UsageError("--relax > 0 requires --stats (relaxation target means)")
        params = SurrogateParams(advect_cells_lon=args.advect, relax_rate=args.relax)
        descriptor = BackendDescriptor(kind="surrogate", surrogate=params)
        means = read_stats(args.stats) if args.stats else None
    else:
        if not args.command:
            raise UsageError("external backend requires --command")
        descriptor = BackendDescriptor(kind="external", command=tuple(args.command.split()),
                                       workdir=args.workdir, timeout_s=args.timeout)
        means = None
    backend = make_backend(descriptor, reference_means=means)
    run = rollout(backend, ic, args.steps)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, state in enumerate(run.states):
        write_state(out / f"state_{k:03d}.wxs", state)
    return 0


def cmd_track(args) -> int:
    forecast_states = _load_series(args.forecast_dir)
    truth_states = _load_series(args.truth_dir)
    cfg = TrackConfig(region=_parse_region(args.region),
                      continuity_radius_km=args.continuity_radius_km)
    pred = track_states(forecast_states, cfg)
    truth = track_states(truth_states, cfg)
    mte = mean_trajectory_error(pred, truth)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out / "forecast_trajectory.csv", pred)
    write_trajectory_csv(out / "truth_trajectory.csv", truth)
    (out / "mte.txt").write_text(f"{fmt_float(mte)}\n", encoding="ascii")
    print(f"mte_km={fmt_float(mte)}")
    return 0


def cmd_evaluate(args) -> int:
    forecast_states = _load_series(args.forecast_dir)
    truth_states = _load_series(args.truth_dir)
    mask = _parse_region(args.region) if args.region else None
    run = ForecastRun(tuple(forecast_states))
    summaries = series_over_time(run, truth_states, args.variable, mask, args.range)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [
        {"variable": args.variable, "timestep": k, "time": forecast_states[k].valid_time, "summary": s}
        for k, s in enumerate(summaries)
    ]
    write_summary_csv(out / "summary.csv", rows, lead_fields=("variable", "timestep", "time"))
    write_histogram_csv(out / "hist_initial.csv", summaries[0])
    write_histogram_csv(out / "hist_final.csv", summaries[-1])
    return 0


def _config_from_file(path: str, args) -> "ExperimentConfig | RandomICExperimentConfig":
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"bad config syntax: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    overrides = {
        "out_dir": args.out_dir,
        "trials": args.trials,
        "base_seed": args.base_seed,
        "workers": args.workers,
    }
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    if args.levels is not None:
        raw["levels"] = [float(x) for x in args.levels.split(",")]
    raw.setdefault("workers", int(os.environ.get(WORKERS_ENV, "1")))
    return build_experiment_config(raw)


_COMMON_KEYS = {"mode", "truth_states", "out_dir", "base_seed", "trials", "backend",
                "eval", "workers", "keep_states"}
_NOISE_KEYS = _COMMON_KEYS | {"levels", "level_mode", "alpha", "alpha_sign", "track"}
_RANDOM_KEYS = _COMMON_KEYS | {"distributions", "standardize"}


def build_experiment_config(raw: dict) -> "ExperimentConfig | RandomICExperimentConfig":
    """Build a validated experiment config from a parsed mapping (the
    documented YAML schema)."""
    mode = raw.get("mode", "noise")
    allowed = _NOISE_KEYS if mode == "noise" else _RANDOM_KEYS
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    truth = raw.get("truth_states")
    if isinstance(truth, str):
        truth_paths = tuple(str(p) for p in _state_paths(truth))
    elif isinstance(truth, (list, tuple)) and truth:
        truth_paths = tuple(str(p) for p in truth)
    else:
        raise ConfigError("truth_states must be a directory or a list of state paths")
    if "out_dir" not in raw:
        raise ConfigError("out_dir is required")
    backend = _backend_from_dict(raw.get("backend") or {"kind": "surrogate"})
    eval_cfg = raw.get("eval") or {}
    if not isinstance(eval_cfg, dict) or set(eval_cfg) - {"variable", "region", "hist_range"}:
        raise ConfigError("eval must be a mapping with variable/region/hist_range")
    common = dict(
        truth_paths=truth_paths,
        backend=backend,
        out_dir=str(raw["out_dir"]),
        base_seed=int(raw.get("base_seed", 0)),
        eval_variable=str(eval_cfg.get("variable", "msl")),
        eval_region=_region_from(eval_cfg.get("region")),
        hist_range=float(eval_cfg.get("hist_range", DEFAULT_HIST_RANGE)),
        workers=int(raw.get("workers", 1)),
        keep_states=bool(raw.get("keep_states", False)),
    )
    if mode == "noise":
        track_cfg = raw.get("track") or {}
        if not isinstance(track_cfg, dict) or set(track_cfg) - {"region", "continuity_radius_km"}:
            raise ConfigError("track must be a mapping with region/continuity_radius_km")
        region = _region_from(track_cfg.get("region"))
        if region is None:
            raise ConfigError("track.region is required for noise experiments")
        radius = track_cfg.get("continuity_radius_km")
        return ExperimentConfig(
            levels=tuple(float(x) for x in raw.get("levels", list(CANONICAL_NOISE_LEVELS))),
            level_mode=str(raw.get("level_mode", "default")),
            alpha=float(raw.get("alpha", 0.0)),
            alpha_sign=int(raw.get("alpha_sign", 1)),
            trials=int(raw.get("trials", 30)),
            track=TrackConfig(region=region, continuity_radius_km=radius),
            **common,
        )
    if mode == "random_ic":
        return RandomICExperimentConfig(
            distributions=tuple(raw.get("distributions", list(RANDOM_IC_DISTRIBUTIONS))),
            trials=int(raw.get("trials", 1)),
            standardize=str(raw.get("standardize", "empirical")),
            **common,
        )
    raise ConfigError(f"unknown mode: {mode!r}")


def _region_from(value) -> Region | None:
    if value is None:
        return None
    if isinstance(value, dict):
        try:
            return Region(float(value["lat_min"]), float(value["lat_max"]),
                          float(value["lon_min"]), float(value["lon_max"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad region: {e}") from e
    if isinstance(value, (list, tuple)) and len(value) == 4:
        try:
            return Region(*(float(v) for v in value))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad region: {e}") from e
    raise ConfigError(f"bad region: {value!r}")


def _backend_from_dict(d: dict) -> BackendDescriptor:
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError("backend must be a mapping with a 'kind'")
    kind = d["kind"]
    if kind == "surrogate":
        extra = set(d) - {"kind", "advect_cells_lon", "relax_rate"}
        if extra:
            raise ConfigError(f"unknown backend keys: {', '.join(sorted(extra))}")
        params = SurrogateParams(advect_cells_lon=int(d.get("advect_cells_lon", 0)),
                                 relax_rate=float(d.get("relax_rate", 0.0)))
        return BackendDescriptor(kind="surrogate", surrogate=params)
    if kind == "external":
        extra = set(d) - {"kind", "command", "workdir", "timeout_s"}
        if extra:
            raise ConfigError(f"unknown backend keys: {', '.join(sorted(extra))}")
        command = d.get("command")
        if isinstance(command, str):
            command = tuple(command.split())
        elif isinstance(command, (list, tuple)):
            command = tuple(str(c) for c in command)
        else:
            raise ConfigError("external backend requires a command")
        return BackendDescriptor(kind="external", command=command,
                                 workdir=d.get("workdir"),
                                 timeout_s=float(d.get("timeout_s", 3600.0)))
    raise ConfigError(f"unknown backend kind: {kind!r}")


def cmd_ensemble(args) -> int:
    cfg = _config_from_file(args.config, args)
    if isinstance(cfg, RandomICExperimentConfig):
        manifest = run_random_ic_experiment(cfg)
    else:
        manifest = run_experiment(cfg)
    print(format_manifest_table(manifest), end="")
    return 0


def cmd_report(args) -> int:
    manifest = ExperimentManifest.read(args.manifest)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = [a.label for a in manifest.aggregates]
    recomputed = [
        recompute_group_aggregate(label, [t for t in manifest.trials if t.label == label])
        for label in labels
    ]
    with open(out / "mte_by_level.csv", "w", encoding="ascii", newline="\n") as f:
        f.write("label,level,n_trials,n_ok,n_diverged,n_failed,mean_mte_km,std_mte_km,median_seed\n")
        for a in recomputed:
            level = fmt_float(a.level) if a.level is not None else (a.distribution or "")
            mean = fmt_float(a.mean_mte_km) if a.mean_mte_km is not None else ""
            std = fmt_float(a.std_mte_km) if a.std_mte_km is not None else ""
            med = str(a.median_seed) if a.median_seed is not None else ""
            f.write(f"{a.label},{level},{a.n_trials},{a.n_ok},{a.n_diverged},{a.n_failed},{mean},{std},{med}\n")
    manifest_dir = Path(args.manifest).parent
    with open(out / "median_summaries.csv", "w", encoding="ascii", newline="\n") as f:
        wrote_header = False
        for a in recomputed:
            if a.median_trial_index is None:
                continue
            trial = next(t for t in manifest.trials
                         if t.label == a.label and t.trial_index == a.median_trial_index)
            src = manifest_dir / trial.artifacts["summary"]
            lines = src.read_text(encoding="ascii").splitlines()
            if not wrote_header:
                f.write(lines[0] + "\n")
                wrote_header = True
            for line in lines[1:]:
                f.write(line + "\n")
    print(format_manifest_table(manifest), end="")
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="wxrobust", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"wxrobust {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("stats", help="compute per-variable mean/std of a snapshot")
    s.add_argument("input", help=".wxs state file")
    s.add_argument("output", help="output .stats.csv path")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("perturb", help="add seeded Gaussian noise to a snapshot")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--stats", required=True, help="per-variable stats file")
    s.add_argument("--beta", type=float, required=True, help="noise std fraction in [0, 1]")
    s.add_argument("--alpha", type=float, default=0.0, help="mean-bias fraction in [0, 1]")
    s.add_argument("--alpha-sign", type=int, default=1, choices=(1, -1))
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_perturb)

    s = sub.add_parser("randomize", help="generate a fully random snapshot")
    s.add_argument("output")
    s.add_argument("--stats", required=True, help="target per-variable stats file")
    s.add_argument("--dist", required=True, help="|".join(RANDOM_IC_DISTRIBUTIONS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--resolution", type=float, default=0.25, help="grid spacing in degrees")
    s.add_argument("--standardize", default="empirical", choices=("empirical", "analytic"))
    s.add_argument("--time", default="1970-01-01T00:00:00Z", help="valid time (ISO-8601 UTC)")
    s.set_defaults(func=cmd_randomize)

    s = sub.add_parser("forecast", help="roll a snapshot forward in 6-hour steps")
    s.add_argument("input")
    s.add_argument("--backend", default="surrogate", choices=("surrogate", "external"))
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--advect", type=int, default=0, help="surrogate zonal shift (cells/step)")
    s.add_argument("--relax", type=float, default=0.0, help="surrogate relaxation rate [0, 1]")
    s.add_argument("--stats", help="reference means for the relaxing surrogate")
    s.add_argument("--command", help="external backend command (exchange dir appended)")
    s.add_argument("--workdir", help="parent directory for exchange directories")
    s.add_argument("--timeout", type=float, default=3600.0, help="external step timeout (s)")
    s.set_defaults(func=cmd_forecast)

    s = sub.add_parser("track", help="track the storm center and compute MTE")
    s.add_argument("--forecast-dir", required=True)
    s.add_argument("--truth-dir", required=True)
    s.add_argument("--region", required=True, help="lat_min,lat_max,lon_min,lon_max")
    s.add_argument("--continuity-radius-km", type=float, default=None)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_track)

    s = sub.add_parser("evaluate", help="per-timestep error distribution summaries")
    s.add_argument("--forecast-dir", required=True)
    s.add_argument("--truth-dir", required=True)
    s.add_argument("--variable", default="msl")
    s.add_argument("--region", default=None, help="restrict to a box (default: global)")
    s.add_argument("--range", type=float, default=DEFAULT_HIST_RANGE, help="histogram half-width")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("ensemble", help="run a full experiment matrix from a config file")
    s.add_argument("config", help="YAML experiment config")
    s.add_argument("--out-dir", default=None)
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--base-seed", type=int, default=None)
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--levels", default=None, help="comma-separated noise levels")
    s.set_defaults(func=cmd_ensemble)

    s = sub.add_parser("report", help="collate a manifest into plot-ready tables")
    s.add_argument("manifest", help="manifest.json from an ensemble run")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_report)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (BackendError, RolloutError) as e:
        step = getattr(e, "step_index", None)
        where = f" (step {step})" if step is not None else ""
        print(f"backend error{where}: {e}", file=sys.stderr)
        return 3
    except (WxError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
