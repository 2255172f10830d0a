"""Command-line surface over the pipeline stages.

Each subcommand maps onto one stage (or the fixture generator / external
evaluation); `run` executes the whole graph. Config keys come from a JSON
file; command-line flags override config values. The output root can also
be set via the FIRERISK_OUT environment variable.
"""

import json
import logging
import os
import sys
from pathlib import Path

import click
import pandas as pd

from . import evaluation, models, pipeline, synth

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")


def _config(config_path, out, seed):
    overrides = {}
    if out:
        overrides["out_root"] = Path(out)
    cfg = pipeline.PipelineConfig.from_file(config_path, **overrides)
    if seed is not None:
        cfg.options["seed"] = seed
    return cfg


def _stage_command(name, help_text):
    @click.command(name=name, help=help_text)
    @click.option("--config", "config_path", required=True, type=click.Path(exists=True))
    @click.option("--out", default=None, envvar="FIRERISK_OUT", help="output root override")
    @click.option("--seed", default=None, type=int, help="global seed override")
    def cmd(config_path, out, seed):
        cfg = _config(config_path, out, seed)
        needed = pipeline.STAGES[: pipeline.STAGES.index(name) + 1]
        pipeline.run_pipeline(cfg, stages=needed)

    return cmd


@click.group()
def main():
    """Department-aware wildfire risk pipeline."""


@main.command("synth")
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
@click.option("--departments", default=3, type=int)
@click.option("--years", default=2, type=int)
@click.option("--start-year", default=2021, type=int)
def synth_cmd(out, seed, departments, years, start_year):
    """Generate the synthetic desk-scale fixture."""
    depts = synth.generate_synthetic_region(
        out, seed=seed, n_departments=departments, n_years=years, start_year=start_year
    )
    click.echo(f"generated {len(depts)} departments under {out}")


main.add_command(_stage_command("ingest", "Build the per-department base cubes."))
main.add_command(_stage_command("indices", "Compute fire-danger index cubes."), name="compute-indices")
main.add_command(_stage_command("labeling", "Fit ordinal models and write labels.csv."), name="label")
main.add_command(_stage_command("clustering", "Cluster departments via DTW k-medoids."), name="cluster")
main.add_command(_stage_command("features", "Assemble and standardize the feature table."), name="encode")
main.add_command(_stage_command("selection", "Variance/correlation feature selection."), name="select")
main.add_command(_stage_command("training", "Train baselines and emit predictions."), name="train")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", default=None, envvar="FIRERISK_OUT")
@click.option("--seed", default=None, type=int)
def sweep(config_path, out, seed):
    """Run training with the class-0 undersampling sweep enabled."""
    cfg = _config(config_path, out, seed)
    cfg.options["model"]["sweep"] = True
    pipeline.run_pipeline(cfg, stages=pipeline.STAGES[: pipeline.STAGES.index("training") + 1])


@main.command("export-windows")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", default=None, envvar="FIRERISK_OUT")
@click.option("--target", default="fo", type=click.Choice(["fo", "ba"]))
@click.option("--window", default=10, type=int)
@click.option("--dest", required=True, type=click.Path())
def export_windows(config_path, out, target, window, dest):
    """Export trailing 10-day feature windows for sequence models."""
    cfg = _config(config_path, out, None)
    pipeline.run_pipeline(cfg, stages=pipeline.STAGES[: pipeline.STAGES.index("selection") + 1])
    table = pd.read_csv(cfg.out_root / "features_selected.csv", dtype={"department": str})
    labels = pd.read_csv(cfg.out_root / "labels.csv", dtype={"department": str})
    lbl = labels[labels["target"] == target][["department", "date", "class"]]
    data = table.merge(lbl, on=["department", "date"], validate="one_to_one")
    data = data.sort_values(["department", "date"], kind="stable")
    feature_cols = [c for c in table.columns if c not in ("department", "date", "split")]
    n, skipped = models.export_windows(
        data[feature_cols].to_numpy(float), data["class"].to_numpy(int),
        data["department"].to_numpy(), data["date"].tolist(), dest,
        feature_names=feature_cols, window=window,
    )
    click.echo(f"wrote {n} windows to {dest} ({skipped} rows skipped)")


@main.command()
@click.option("--predictions", "prediction_paths", multiple=True, required=True,
              type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--split", default="test", type=click.Choice(["train", "val", "test", "all"]))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True),
              help="pipeline config supplying the split years")
@click.option("--out", default="report.json", type=click.Path())
@click.option("--csv-out", default=None, type=click.Path())
def evaluate(prediction_paths, labels_path, split, config_path, out, csv_out):
    """Score external prediction files against labels.csv."""
    try:
        labels = pd.read_csv(labels_path, dtype={"department": str})
        if split != "all":
            if config_path is None:
                raise click.UsageError("--config is required to resolve split years")
            cfg = pipeline.PipelineConfig.from_file(config_path)
            import datetime as dt

            labels = labels[
                [cfg.split().assign(dt.date.fromisoformat(d)) == split for d in labels["date"]]
            ]
        seen_models = set()
        reports = []
        for path in prediction_paths:
            full = models.ingest_predictions(path)
            clash = set(full["model"].unique()) & seen_models
            if clash:
                raise evaluation.EvaluationError(
                    f"duplicate predictions for models: {sorted(clash)}"
                )
            for (model, target), grp in full.groupby(["model", "target"], sort=True):
                truth = labels[labels["target"] == target].rename(columns={"class": "label"})
                reports.append(
                    evaluation.evaluate(
                        grp[["department", "date", "pred"]],
                        truth[["department", "date", "label"]],
                        model=model, target=target,
                    )
                )
            seen_models.update(full["model"].unique())
        evaluation.write_report(reports, out, csv_out)
        click.echo(f"wrote {out}")
    except (evaluation.EvaluationError, models.ModelError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", default=None, envvar="FIRERISK_OUT")
@click.option("--seed", default=None, type=int)
def report(config_path, out, seed):
    """Run the pipeline through evaluation and print the report summary."""
    cfg = _config(config_path, out, seed)
    pipeline.run_pipeline(cfg)
    payload = json.loads((cfg.out_root / "report.json").read_text())
    for entry in payload:
        g = entry["global"]
        click.echo(
            f"{entry['model']:<10} {entry['target']:<3} "
            f"f1={g['f1']:.3f} prec={g['precision']:.3f} rec={g['recall']:.3f} "
            f"iou={g['iou']:.3f} auoc={g['auoc']:.3f}"
        )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", default=None, envvar="FIRERISK_OUT")
@click.option("--seed", default=None, type=int)
def run(config_path, out, seed):
    """Run every pipeline stage."""
    cfg = _config(config_path, out, seed)
    pipeline.run_pipeline(cfg)


if __name__ == "__main__":
    main()
