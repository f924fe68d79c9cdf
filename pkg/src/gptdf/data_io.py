"""Ingestion and preprocessing: CSV loading, normalization (offline and
causal/online), and synthetic series generation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .gp_core import GPModel, Matern52, TemporalFeature, TimeSeries, sample_prior

__all__ = [
    "NormalizationStats",
    "PreparedStream",
    "load_csv",
    "normalize",
    "denormalize",
    "prepare_stream",
    "generate_synthetic",
    "resolve_data_spec",
]


@dataclass(frozen=True)
class NormalizationStats:
    """Mean/std pair used to map a series to zero mean and unit sample std
    (n-1 denominator) and back."""

    mean: float
    std: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std) and self.std > 0.0):
            raise ValueError(f"invalid normalization stats: mean={self.mean}, std={self.std}")

    def apply(self, values):
        return (np.asarray(values, dtype=float) - self.mean) / self.std

    def invert(self, values):
        return np.asarray(values, dtype=float) * self.std + self.mean

    def as_dict(self):
        return {"mean": self.mean, "std": self.std}


def _parse_float(text):
    try:
        v = float(text)
    except (TypeError, ValueError):
        return None
    return v if math.isfinite(v) else None


def load_csv(path, column=0, time_column=None):
    """Load one value column (by index or header name) from a CSV file.

    Without a time column, timestamps are consecutive integers 0..n-1. Rows
    whose selected cells do not parse as finite numbers abort the load with
    their 1-based line numbers. Header rows are detected automatically for
    integer column selectors and required for name selectors.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh)]
    rows = [row for row in rows if row]

    names_used = isinstance(column, str) or isinstance(time_column, str)
    if not rows:
        raise DataError(f"empty series: no rows in {path}")

    header_lines = 0
    if names_used:
        header = [cell.strip() for cell in rows[0]]
        header_lines = 1

        def resolve(sel):
            if isinstance(sel, str):
                if sel not in header:
                    raise DataError(f"column {sel!r} not found in header {header}")
                return header.index(sel)
            return int(sel)

        col_idx = resolve(column)
        time_idx = resolve(time_column) if time_column is not None else None
    else:
        col_idx = int(column)
        time_idx = int(time_column) if time_column is not None else None
        probe = rows[0][col_idx] if col_idx < len(rows[0]) else ""
        if _parse_float(probe) is None:
            header_lines = 1  # first row is not numeric: treat as header

    data_rows = rows[header_lines:]
    values = []
    times = []
    bad_rows = []
    for offset, row in enumerate(data_rows):
        line_no = header_lines + offset + 1
        cell = row[col_idx] if col_idx < len(row) else ""
        v = _parse_float(cell)
        if v is None:
            bad_rows.append(line_no)
            continue
        if time_idx is not None:
            tcell = row[time_idx] if time_idx < len(row) else ""
            tv = _parse_float(tcell)
            if tv is None:
                bad_rows.append(line_no)
                continue
            times.append(tv)
        values.append(v)
    if bad_rows:
        raise DataError(f"unparseable values in {path} at rows {bad_rows}")
    if not values:
        raise DataError(f"empty series: no data rows in {path}")

    if time_idx is not None:
        t = np.asarray(times, dtype=float)
        if t.size > 1 and not np.all(np.diff(t) > 0.0):
            raise DataError(f"time column in {path} is not strictly increasing")
        return TimeSeries(t, np.asarray(values, dtype=float))
    return TimeSeries.from_values(values)


def normalize(data):
    """Center and scale to sample std one (n-1 denominator).

    Returns the transformed series and the stats needed to invert it.
    Refuses series shorter than 2 points or with zero variance.
    """
    if len(data) < 2:
        raise DataError("need at least 2 points to normalize")
    mean = float(data.values.mean())
    std = float(data.values.std(ddof=1))
    if std == 0.0:
        raise DataError("zero variance: cannot normalize a constant series")
    stats = NormalizationStats(mean, std)
    return TimeSeries(data.timestamps, stats.apply(data.values)), stats


def denormalize(data, stats):
    return TimeSeries(data.timestamps, stats.invert(data.values))


@dataclass(frozen=True)
class PreparedStream:
    """A stream transformed for online consumption, with the per-step offset
    and scale needed to map each step's values and predictions back to the
    original units."""

    series: TimeSeries
    offsets: np.ndarray
    scales: np.ndarray
    mode: str

    def to_original_value(self, step, z):
        return z * self.scales[step] + self.offsets[step]

    def to_original_variance(self, step, var):
        return var * self.scales[step] ** 2


def prepare_stream(data, mode="online"):
    """Transform a raw stream for prediction.

    mode="online": causal normalization. Step k is centered with the mean of
    the values strictly before it and scaled with a regularized running std,
    sqrt((m2 + 2) / (count + 1)) where m2 is the prefix sum of squared
    deviations: two unit pseudo-observations keep the scale bounded away
    from zero while a near-constant prefix lasts, and wash out as O(1/count).
    mode="offline": whole-series normalization up front.
    mode="none": identity.
    """
    if mode == "none":
        n = len(data)
        return PreparedStream(data, np.zeros(n), np.ones(n), mode)
    if mode == "offline":
        series, stats = normalize(data)
        n = len(data)
        return PreparedStream(series, np.full(n, stats.mean), np.full(n, stats.std), mode)
    if mode != "online":
        raise ConfigError(f"unknown normalization mode {mode!r}")

    y = data.values
    n = len(data)
    offsets = np.zeros(n)
    scales = np.ones(n)
    # Welford recursion over the prefix strictly before each step
    count, mean, m2 = 0, 0.0, 0.0
    for k in range(n):
        if count >= 1:
            offsets[k] = mean
        if count >= 2:
            scales[k] = math.sqrt((m2 + 2.0) / (count + 1))
        x = y[k]
        count += 1
        delta = x - mean
        mean += delta / count
        m2 += delta * (x - mean)
    series = TimeSeries(data.timestamps, (y - offsets) / scales)
    return PreparedStream(series, offsets, scales, "online")


def generate_synthetic(feature, n, seed):
    """Sample a noise-free prior path from the feature's kernel at integer
    times 0..n-1, then add independent observation noise of level sigma_n.
    Deterministic per seed."""
    if int(n) < 1:
        raise ValueError("n must be >= 1")
    n = int(n)
    ts = np.arange(n, dtype=float)
    rng = np.random.default_rng(seed)
    latent_model = GPModel(Matern52(feature.sigma_f, feature.sigma_l), noise_std=0.0)
    f = sample_prior(latent_model, ts, rng)
    y = f + rng.normal(0.0, feature.sigma_n, n) if feature.sigma_n > 0.0 else f
    return TimeSeries(ts, y)


def resolve_data_spec(spec, fallback_seed=0):
    """Materialize a data description into a TimeSeries.

    Accepts {"csv": path, "column": ..., "time_column": ...} or
    {"synthetic": {"sigma_f", "sigma_l", "sigma_n", "n", "seed"?}}.
    """
    if not isinstance(spec, dict):
        raise ConfigError(f"data spec must be a mapping, got {type(spec).__name__}")
    if "csv" in spec:
        return load_csv(spec["csv"], column=spec.get("column", 0),
                        time_column=spec.get("time_column"))
    if "synthetic" in spec:
        s = spec["synthetic"]
        try:
            feature = TemporalFeature(float(s["sigma_f"]), float(s["sigma_l"]), float(s["sigma_n"]))
            return generate_synthetic(feature, int(s["n"]), int(s.get("seed", fallback_seed)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad synthetic data spec: {exc}") from exc
    raise ConfigError("data spec needs a 'csv' or 'synthetic' entry")
