"""Metrics (NLL, MAE, MSE, delay), the train-then-predict GP baseline, and
the benchmark harness that compares fusion variants against baselines on a
shared stream."""

from __future__ import annotations

import io
import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import data_io, fusion, gp_core
from .errors import ConfigError, DataError, GptdfError
from .fusion import StepRecord, fuse_predictions, gaussian_log_density
from .gp_core import FitConfig, TemporalFeature

__all__ = [
    "nll",
    "mae",
    "mse",
    "delay",
    "run_baseline_gp",
    "BenchmarkMethod",
    "BenchmarkConfig",
    "BenchmarkRow",
    "BenchmarkReport",
    "run_benchmark",
    "REPORT_COLUMNS",
    "SERIES_COLUMNS",
]

REPORT_COLUMNS = ("method", "nll", "mae", "mse", "delay", "error")
SERIES_COLUMNS = ("step", "t", "y", "mean", "var", "lo", "hi")


def _distribution(pred):
    return pred.distribution if isinstance(pred, fusion.FusedPrediction) else pred


def _check_lengths(a, b):
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} predictions vs {len(b)} truths")
    if len(a) == 0:
        raise ValueError("need at least one prediction")


def nll(predictions, truths):
    """Mean negative log Gaussian density of the truths under the
    predictions (per-step mean, not a sum)."""
    _check_lengths(predictions, truths)
    total = 0.0
    for pred, y in zip(predictions, truths):
        total -= gaussian_log_density(_distribution(pred), y)
    return total / len(truths)


def mae(predicted_means, truths):
    m = np.asarray(predicted_means, dtype=float)
    y = np.asarray(truths, dtype=float)
    _check_lengths(m, y)
    return float(np.abs(m - y).mean())


def mse(predicted_means, truths):
    m = np.asarray(predicted_means, dtype=float)
    y = np.asarray(truths, dtype=float)
    _check_lengths(m, y)
    return float(((m - y) ** 2).mean())


def delay(records, stream_length):
    """Number of leading stream steps with no emitted prediction: the step
    index of the first record, or the stream length if nothing was emitted."""
    if not records:
        return int(stream_length)
    return int(min(r.step for r in records))


def _metrics_from_records(records, stream_length):
    preds = [r.prediction for r in records]
    truths = [r.truth for r in records]
    means = [r.prediction.distribution.mean for r in records]
    return {
        "nll": nll(preds, truths),
        "mae": mae(means, truths),
        "mse": mse(means, truths),
        "delay": delay(records, stream_length),
    }


def run_baseline_gp(stream, train_size, tau=fusion.DEFAULT_TAU, fit_config=None):
    """Train-then-predict baseline: fit the feature triple on the first
    `train_size` points, then predict the remaining steps one at a time from
    a sliding window of the most recent `tau` observations.

    Returns (records, metrics). The first `train_size` steps have no
    prediction, so the delay equals `train_size` by construction.
    """
    n = len(stream)
    train_size = int(train_size)
    if train_size < gp_core.MIN_FIT_POINTS:
        raise DataError(f"training size {train_size} is below the fitting minimum "
                        f"{gp_core.MIN_FIT_POINTS}")
    if train_size >= n:
        raise DataError(f"training size {train_size} must be smaller than the stream ({n})")
    feature = gp_core.fit_hyperparameters(stream.head(train_size), fit_config)
    model = feature.to_model()

    window_t = list(stream.timestamps[:train_size][-tau:])
    window_y = list(stream.values[:train_size][-tau:])
    records = []
    for k in range(train_size, n):
        t = float(stream.timestamps[k])
        y = float(stream.values[k])
        window = gp_core.TimeSeries(np.array(window_t), np.array(window_y))
        pred = gp_core.predict(model, window, t)
        records.append(StepRecord(step=k, t=t, truth=y,
                                  prediction=fuse_predictions([pred], [1.0])))
        window_t.append(t)
        window_y.append(y)
        if len(window_t) > tau:
            window_t.pop(0)
            window_y.pop(0)
    return records, _metrics_from_records(records, n)


@dataclass(frozen=True)
class BenchmarkMethod:
    """One table row to produce: either a fusion run over a feature set
    (kind="fusion") or a train-then-predict baseline (kind="baseline")."""

    name: str
    kind: str
    features: tuple = ()
    train_size: int = 0

    def __post_init__(self):
        if self.kind not in ("fusion", "baseline"):
            raise ConfigError(f"unknown method kind {self.kind!r}")
        if self.kind == "fusion" and not self.features:
            raise ConfigError(f"method {self.name!r} needs at least one feature")
        if self.kind == "baseline" and int(self.train_size) < 1:
            raise ConfigError(f"method {self.name!r} needs a positive train_size")
        object.__setattr__(self, "features", tuple(self.features))

    @classmethod
    def from_dict(cls, d):
        try:
            name = str(d["name"])
            kind = str(d["kind"])
        except KeyError as exc:
            raise ConfigError(f"method entry missing {exc}") from exc
        features = tuple(TemporalFeature.from_dict(f) for f in d.get("features", ()))
        return cls(name=name, kind=kind, features=features,
                   train_size=int(d.get("train_size", 0)))


@dataclass(frozen=True)
class BenchmarkConfig:
    methods: tuple
    stream: gp_core.TimeSeries
    tau: int = fusion.DEFAULT_TAU
    alpha: float = fusion.DEFAULT_ALPHA
    normalization: str = "online"
    original_scale: bool = False
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("benchmark needs at least one method")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate method names in {names}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.tau) < 1:
            raise ConfigError(f"tau must be >= 1, got {self.tau}")

    @classmethod
    def from_dict(cls, d, fallback_seed=0):
        if "stream" not in d:
            raise ConfigError("benchmark config needs a 'stream' entry")
        stream = data_io.resolve_data_spec(d["stream"], fallback_seed)
        methods = tuple(BenchmarkMethod.from_dict(m) for m in d.get("methods", ()))
        try:
            fit = FitConfig.from_dict(d["fit"]) if "fit" in d else FitConfig()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad fit config: {exc}") from exc
        return cls(methods=methods, stream=stream,
                   tau=int(d.get("tau", fusion.DEFAULT_TAU)),
                   alpha=float(d.get("alpha", fusion.DEFAULT_ALPHA)),
                   normalization=str(d.get("normalization", "online")),
                   original_scale=bool(d.get("original_scale", False)),
                   fit=fit)


@dataclass(frozen=True)
class BenchmarkRow:
    method: str
    nll: float = math.nan
    mae: float = math.nan
    mse: float = math.nan
    delay: int = -1
    error: str = ""

    def as_dict(self):
        return {"method": self.method, "nll": self.nll, "mae": self.mae,
                "mse": self.mse, "delay": self.delay, "error": self.error}


@dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple
    series: dict  # method name -> list of per-step dicts (SERIES_COLUMNS)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(REPORT_COLUMNS)
        for row in self.rows:
            d = row.as_dict()
            writer.writerow([d["method"]] +
                            [repr(d[c]) if isinstance(d[c], float) else d[c]
                             for c in REPORT_COLUMNS[1:-1]] + [d["error"]])
        return buf.getvalue()

    def to_json(self):
        return json.dumps([row.as_dict() for row in self.rows], indent=2, sort_keys=True)

    def write_series_csvs(self, out_dir):
        """One plot-ready CSV per method: truth, predictive mean/variance,
        and the 3-sigma band per step."""
        import pathlib

        out_dir = pathlib.Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name in sorted(self.series):
            safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in name)
            path = out_dir / f"series_{safe}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(SERIES_COLUMNS)
                for row in self.series[name]:
                    writer.writerow([row[c] for c in SERIES_COLUMNS])
            written.append(path)
        return written


def _series_rows(records, prepared, original_scale):
    rows = []
    for rec in records:
        dist = rec.prediction.distribution
        lo, hi = rec.prediction.interval_3sigma
        y, mean, var = rec.truth, dist.mean, dist.variance
        if original_scale:
            k = rec.step
            y = prepared.to_original_value(k, y)
            mean = prepared.to_original_value(k, mean)
            lo = prepared.to_original_value(k, lo)
            hi = prepared.to_original_value(k, hi)
            var = prepared.to_original_variance(k, var)
        rows.append({"step": rec.step, "t": rec.t, "y": y,
                     "mean": mean, "var": var, "lo": lo, "hi": hi})
    return rows


def run_benchmark(config):
    """Run every configured method on the shared (normalized) stream and
    assemble the comparison table.

    Rows are ordered by method name. A method failure does not abort the
    benchmark: its row carries the error message and empty metrics.
    """
    prepared = data_io.prepare_stream(config.stream, config.normalization)
    stream = prepared.series
    rows = []
    series = {}
    for method in sorted(config.methods, key=lambda m: m.name):
        try:
            if method.kind == "fusion":
                state = fusion.ensemble_from_features(method.features,
                                                      tau=config.tau, alpha=config.alpha)
                records = fusion.run_stream(state, stream)
                metrics = _metrics_from_records(records, len(stream))
            else:
                records, metrics = run_baseline_gp(stream, method.train_size,
                                                   tau=config.tau, fit_config=config.fit)
        except GptdfError as exc:
            rows.append(BenchmarkRow(method=method.name, error=str(exc)))
            continue
        rows.append(BenchmarkRow(method=method.name, **metrics))
        series[method.name] = _series_rows(records, prepared, config.original_scale)
    return BenchmarkReport(rows=tuple(rows), series=series)
