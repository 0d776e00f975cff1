"""Robustness testing for deterministic gridded weather-forecast models.

Perturb or fully randomize atmospheric snapshots, roll forecasts out
through pluggable backends, track storm centers by minimum mean-sea-level
pressure, and compute trajectory and distributional error statistics.
"""

__version__ = "0.1.0"

from .core import (
    CENTRAL_ATLANTIC,
    MODEL_TIMESTEP,
    PRESSURE_LEVELS_HPA,
    FieldSet,
    GridSpec,
    Region,
    Trajectory,
    VariableCatalog,
    VariableDef,
    build_catalog,
    field_difference,
    pa_to_hpa,
    region_indices,
)
from .errstats import (
    DistributionSummary,
    ErrorField,
    error_field,
    series_over_time,
    summarize,
)
from .forecast import (
    BackendDescriptor,
    ForecastRun,
    SurrogateParams,
    clamp_physical,
    external_step,
    make_backend,
    rollout,
    surrogate_step,
)
from .harness import (
    ExperimentConfig,
    ExperimentManifest,
    RandomICExperimentConfig,
    derive_trial_seed,
    median_by_mte,
    run_experiment,
    run_random_ic_experiment,
)
from .perturb import (
    CANONICAL_NOISE_LEVELS,
    RANDOM_IC_DISTRIBUTIONS,
    NoiseSpec,
    RandomICSpec,
    VariableStats,
    compute_stats,
    inject_noise,
    random_ic,
)
from .stateio import read_state, read_stats, write_state, write_stats
from .tracking import (
    EARTH_RADIUS_KM,
    TrackConfig,
    great_circle_km,
    locate_center,
    mean_trajectory_error,
    track_states,
    track_storm,
)
