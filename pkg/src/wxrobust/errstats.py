"""Pixelwise signed forecast error and its distributional summaries.

The error at each grid point is forecast minus truth, so a positive error
is an overestimate. Summaries are computed in float64: population moments
(skewness = m3 / m2^1.5, excess kurtosis = m4 / m2^2 - 3, both 0 for a
Gaussian), order-statistic quantiles with linear interpolation, and a
fixed-width histogram whose out-of-range values are counted in the
nearest edge bin so the bin masses always sum to the sample count.

Mean-sea-level pressure errors are reported in hPa; every other variable
stays in its native units. No latitude weighting is applied: statistics
are over grid points, not area.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import FieldSet, Region, pa_to_hpa, region_axis_indices, same_layout
from .errors import IncompatibleFieldsError
from .util import fmt_float, iso_utc

#: Number of histogram bins; odd so zero error is a bin center.
HISTOGRAM_BINS = 101

#: Histogram half-widths (hPa) used in the reference experiment design.
DEFAULT_HIST_RANGE = 7.5
WIDE_HIST_RANGE = 15.0

_QUANTILE_LEVELS = (0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)


@dataclass(frozen=True)
class ErrorField:
    """Signed per-grid-point error for one variable at one timestep,
    flattened row-major over the (optionally masked) grid."""

    variable: str
    units: str
    step_index: int
    values: np.ndarray
    region: Region | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.flags.writeable:
            v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def count(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class DistributionSummary:
    """Moments, quantiles and histogram of one error sample."""

    count: int
    mean: float
    std: float
    skewness: float
    excess_kurtosis: float
    minimum: float
    p5: float
    p25: float
    median: float
    p75: float
    p95: float
    maximum: float
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    in_range_fraction: float
    degenerate: bool = False

    def quantiles(self) -> tuple[float, ...]:
        return (self.minimum, self.p5, self.p25, self.median, self.p75, self.p95, self.maximum)


#: Scalar columns exported for each summary, in order.
SUMMARY_FIELDS = (
    "count", "mean", "std", "skewness", "excess_kurtosis",
    "min", "p5", "p25", "median", "p75", "p95", "max",
    "in_range_fraction", "degenerate",
)


def summary_values(s: DistributionSummary) -> tuple:
    return (
        s.count, s.mean, s.std, s.skewness, s.excess_kurtosis,
        s.minimum, s.p5, s.p25, s.median, s.p75, s.p95, s.maximum,
        s.in_range_fraction, int(s.degenerate),
    )


def error_field(
    forecast: FieldSet,
    truth: FieldSet,
    variable: str,
    mask: Region | None = None,
    step_index: int = 0,
) -> ErrorField:
    """forecast - truth for one variable, restricted to ``mask`` (or the
    whole grid), computed exactly in float64."""
    if not same_layout(forecast, truth):
        raise IncompatibleFieldsError("incompatible fieldsets: grid or catalog mismatch")
    if forecast.valid_time != truth.valid_time:
        raise IncompatibleFieldsError("misaligned fieldsets: valid times differ")
    f = forecast.channel(variable)
    t = truth.channel(variable)
    if mask is not None:
        lat_idx, lon_idx = region_axis_indices(forecast.grid, mask)
        f = f[np.ix_(lat_idx, lon_idx)]
        t = t[np.ix_(lat_idx, lon_idx)]
    diff = f.astype(np.float64) - t.astype(np.float64)
    units = forecast.catalog.units_of(variable)
    if variable == "msl":
        diff = pa_to_hpa(diff)
        units = "hPa"
    return ErrorField(variable=variable, units=units, step_index=step_index, values=diff, region=mask)


def summarize(err: ErrorField, hist_range: float) -> DistributionSummary:
    """Full distributional summary of one error field."""
    v = err.values
    if v.size == 0:
        raise ValueError("empty error field")
    if not hist_range > 0:
        raise ValueError("hist_range must be positive")
    vmin, vmax = float(v.min()), float(v.max())
    degenerate = vmin == vmax
    if degenerate:
        # constant sample: the float mean can drift off the constant by
        # rounding, turning the moments into noise, so report it exactly
        mean, m2 = vmin, 0.0
        skew = kurt = 0.0
    else:
        mean = float(v.mean())
        d = v - mean
        m2 = float(np.mean(d * d))
        if m2 == 0.0:
            degenerate = True
            skew = kurt = 0.0
        else:
            # standardize before the higher moments: the raw m3/m2^1.5 and
            # m4/m2^2 ratios underflow for samples with tiny spread
            z = d / np.sqrt(m2)
            skew = float(np.mean(z * z * z))
            kurt = float(np.mean((z * z) ** 2)) - 3.0
    q = np.quantile(v, _QUANTILE_LEVELS, method="linear")
    in_range = float(np.mean(np.abs(v) <= hist_range))
    counts, edges = np.histogram(np.clip(v, -hist_range, hist_range),
                                 bins=HISTOGRAM_BINS, range=(-hist_range, hist_range))
    return DistributionSummary(
        count=int(v.size),
        mean=mean,
        std=float(np.sqrt(m2)),
        skewness=skew,
        excess_kurtosis=kurt,
        minimum=float(q[0]),
        p5=float(q[1]),
        p25=float(q[2]),
        median=float(q[3]),
        p75=float(q[4]),
        p95=float(q[5]),
        maximum=float(q[6]),
        hist_edges=edges,
        hist_counts=counts,
        in_range_fraction=in_range,
        degenerate=degenerate,
    )


def series_over_time(
    run,
    truth_series: Sequence[FieldSet],
    variable: str,
    mask: Region | None = None,
    hist_range: float = DEFAULT_HIST_RANGE,
) -> list[DistributionSummary]:
    """One summary per time point. The first entry summarizes the
    initial-condition error, i.e. the injected perturbation itself."""
    states = run.states if hasattr(run, "states") else tuple(run)
    if len(states) != len(truth_series):
        raise IncompatibleFieldsError(
            f"misaligned series: {len(states)} forecast states vs {len(truth_series)} truth states"
        )
    return [
        summarize(error_field(state, truth, variable, mask, step_index=k), hist_range)
        for k, (state, truth) in enumerate(zip(states, truth_series))
    ]


def write_summary_csv(path, rows: Sequence[dict], lead_fields: Sequence[str]) -> None:
    """Rows of lead columns (level, trial, timestep, ...) followed by the
    scalar summary columns. Each row dict maps lead field -> value and
    carries its summary under "summary"."""
    with open(path, "w", encoding="ascii", newline="") as f:
        w = csv.writer(f)
        w.writerow(list(lead_fields) + list(SUMMARY_FIELDS))
        for row in rows:
            lead = [row[k] for k in lead_fields]
            w.writerow([_cell(x) for x in lead + list(summary_values(row["summary"]))])


def write_histogram_csv(path, summary: DistributionSummary) -> None:
    """bin_left,bin_right,count rows; masses sum to the sample count."""
    with open(path, "w", encoding="ascii", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bin_left", "bin_right", "count"])
        for left, right, count in zip(summary.hist_edges[:-1], summary.hist_edges[1:], summary.hist_counts):
            w.writerow([fmt_float(left), fmt_float(right), int(count)])


def _cell(x):
    if isinstance(x, float):
        return fmt_float(x)
    if hasattr(x, "isoformat"):
        return iso_utc(x)
    return x
