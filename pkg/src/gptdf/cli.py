"""Command-line interface: fit, generate, predict, simulate, bench.

Exit codes: 0 success, 1 partial simulation failure, 2 usage/config errors,
3 data errors, 4 numerical errors.
"""

from __future__ import annotations

import csv
import json
import pathlib
import sys

import click

from . import data_io, edge_sim, evaluation, fusion, gp_core
from .errors import ConfigError, DataError, NumericalError, PartialFailure


@click.group()
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for anything stochastic (generation, fitting restarts).")
@click.pass_context
def cli(ctx, seed):
    """Gaussian-process temporal data fusion tools."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


@cli.command()
@click.argument("csv_path", type=click.Path())
@click.option("--column", default="0", show_default=True,
              help="Value column, by index or header name.")
@click.option("--time-column", default=None, help="Optional time column (index or name).")
@click.option("--restarts", type=int, default=None, help="Override the restart count.")
@click.option("--fit-config", "fit_config_path", type=click.Path(), default=None,
              help="JSON file with bounds, restarts, jitter schedule, seed.")
@click.option("--no-normalize", is_flag=True, help="Fit the raw values without normalizing.")
@click.pass_context
def fit(ctx, csv_path, column, time_column, restarts, fit_config_path, no_normalize):
    """Fit the temporal feature triple of a CSV series; print it as JSON."""
    column = int(column) if column.lstrip("-").isdigit() else column
    if time_column is not None and time_column.lstrip("-").isdigit():
        time_column = int(time_column)
    series = data_io.load_csv(csv_path, column=column, time_column=time_column)
    if not no_normalize:
        series, _ = data_io.normalize(series)
    raw = _load_json(fit_config_path) if fit_config_path else {}
    raw.setdefault("seed", ctx.obj["seed"])
    if restarts is not None:
        raw["restarts"] = restarts
    try:
        config = gp_core.FitConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad fit config: {exc}") from exc
    feature = gp_core.fit_hyperparameters(series, config)
    click.echo(json.dumps(feature.as_dict()))


@cli.command()
@click.option("--sigma-f", type=float, required=True)
@click.option("--sigma-l", type=float, required=True)
@click.option("--sigma-n", type=float, default=0.0, show_default=True)
@click.option("-n", "--length", type=int, required=True, help="Number of points.")
@click.option("--out", type=click.Path(), default=None, help="Write CSV here instead of stdout.")
@click.pass_context
def generate(ctx, sigma_f, sigma_l, sigma_n, length, out):
    """Generate a synthetic series from a feature triple; emit CSV (t,y)."""
    try:
        feature = gp_core.TemporalFeature(sigma_f, sigma_l, sigma_n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    series = data_io.generate_synthetic(feature, length, ctx.obj["seed"])
    target = open(out, "w", encoding="utf-8", newline="") if out else sys.stdout
    try:
        writer = csv.writer(target)
        writer.writerow(["t", "y"])
        for t, y in zip(series.timestamps, series.values):
            writer.writerow([repr(float(t)), repr(float(y))])
    finally:
        if out:
            target.close()


@cli.command()
@click.argument("stream_csv", type=click.Path())
@click.option("--features", "features_path", type=click.Path(), required=True,
              help="JSON file: list of {sigma_f, sigma_l, sigma_n} triples.")
@click.option("--column", default="0", show_default=True)
@click.option("--tau", type=int, default=fusion.DEFAULT_TAU, show_default=True)
@click.option("--alpha", type=float, default=fusion.DEFAULT_ALPHA, show_default=True)
@click.option("--limit", type=int, default=None, help="Use only the first M features.")
@click.option("--normalization", type=click.Choice(["online", "offline", "none"]),
              default="online", show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Write the prediction log here instead of stdout.")
def predict(stream_csv, features_path, column, tau, alpha, limit, normalization, out):
    """Run the online fusion loop over a CSV stream; emit the prediction log
    as line-delimited JSON."""
    column = int(column) if column.lstrip("-").isdigit() else column
    stream = data_io.load_csv(stream_csv, column=column)
    raw = _load_json(features_path)
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{features_path}: expected a nonempty JSON list of feature triples")
    try:
        features = [gp_core.TemporalFeature.from_dict(d) for d in raw]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{features_path}: bad feature entry ({exc})") from exc
    if limit is not None:
        features = features[:limit]
    state = fusion.ensemble_from_features(features, tau=tau, alpha=alpha)
    prepared = data_io.prepare_stream(stream, normalization)
    records = fusion.run_stream(state, prepared.series)
    target = open(out, "w", encoding="utf-8") if out else sys.stdout
    try:
        fusion.write_prediction_log(records, target)
    finally:
        if out:
            target.close()


@cli.command()
@click.argument("scenario_path", type=click.Path())
@click.option("--out-dir", type=click.Path(), required=True)
@click.pass_context
def simulate(ctx, scenario_path, out_dir):
    """Run a full edge/cloud scenario; write logs, metrics, and the registry
    dump into a result directory."""
    raw = _load_json(scenario_path)
    if not isinstance(raw, dict):
        raise ConfigError(f"{scenario_path}: scenario must be a JSON object")
    if "seed" not in raw:
        raw["seed"] = ctx.obj["seed"]
    scenario = edge_sim.Scenario.from_dict(raw)
    result = edge_sim.run_simulation(scenario)

    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    registry_path = out / "registry.jsonl"
    with open(registry_path, "w", encoding="utf-8") as fh:
        for record in result.feature_records:
            fh.write(edge_sim.encode_message(record.to_message()) + "\n")
    files.append(registry_path.name)

    nodes = [{"id": r.source_id, "role": "historical", **r.feature.as_dict(),
              "n_points": r.n_points, "fitted_at": r.fitted_at}
             for r in result.feature_records]
    if result.target_report is not None:
        tr = result.target_report
        nodes.append({"id": tr.node_id, "role": "target",
                      "models": list(tr.model_ids),
                      "used_fallback": tr.used_fallback,
                      "metrics": tr.metrics})
    nodes_path = out / "nodes.json"
    nodes_path.write_text(json.dumps(nodes, indent=2, sort_keys=True), encoding="utf-8")
    files.append(nodes_path.name)

    if result.target_report is not None:
        predictions_path = out / "predictions.jsonl"
        with open(predictions_path, "w", encoding="utf-8") as fh:
            fusion.write_prediction_log(result.target_report.records, fh)
        files.append(predictions_path.name)

        row = evaluation.BenchmarkRow(method="GPTDF", **result.target_report.metrics)
        report = evaluation.BenchmarkReport(rows=(row,), series={})
        summary_path = out / "summary.csv"
        summary_path.write_text(report.to_csv(), encoding="utf-8")
        files.append(summary_path.name)

    metrics_path = out / "metrics.json"
    metrics_path.write_text(json.dumps({
        "metrics": result.target_report.metrics if result.target_report else None,
        "bytes_by_node": result.bytes_by_node,
        "n_feature_records": len(result.feature_records),
    }, indent=2, sort_keys=True), encoding="utf-8")
    files.append(metrics_path.name)

    if result.errors:
        errors_path = out / "errors.json"
        errors_path.write_text(json.dumps(
            [{"node": n, "error": e} for n, e in result.errors],
            indent=2, sort_keys=True), encoding="utf-8")
        files.append(errors_path.name)

    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps({
        "files": sorted(files),
        "seed": scenario.seed,
        "scenario": scenario.as_dict(),
    }, indent=2, sort_keys=True), encoding="utf-8")

    if result.errors:
        if result.target_report is None:
            raise DataError("; ".join(f"{n}: {e}" for n, e in result.errors))
        raise PartialFailure(f"{len(result.errors)} node(s) failed; partial results in {out}")
    click.echo(f"simulation complete: {out}")


@cli.command()
@click.argument("config_path", type=click.Path())
@click.option("--out-dir", type=click.Path(), default=None,
              help="Also write per-step series CSVs here.")
@click.pass_context
def bench(ctx, config_path, out_dir):
    """Run a benchmark config; print the comparison table as CSV."""
    raw = _load_json(config_path)
    if not isinstance(raw, dict):
        raise ConfigError(f"{config_path}: benchmark config must be a JSON object")
    config = evaluation.BenchmarkConfig.from_dict(raw, fallback_seed=ctx.obj["seed"])
    report = evaluation.run_benchmark(config)
    if out_dir is not None:
        report.write_series_csvs(out_dir)
    click.echo(report.to_csv(), nl=False)


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 130
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except (ConfigError, FileNotFoundError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except NumericalError as exc:
        click.echo(f"error: {exc}", err=True)
        return 4
    except PartialFailure as exc:
        click.echo(f"warning: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
