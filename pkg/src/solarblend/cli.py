"""Command-line entry points for the forecasting pipeline and its stages."""

from __future__ import annotations

import json
import sys
from datetime import date as date_t
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import evaluation, occur, recognition
from .data import build_day_matrix
from .pipeline import (IoError, PipelineConfig, emit_outputs, load_and_prepare,
                       load_bundle, run_pipeline, save_bundle, stage_seed)
from .synth import SynthConfig, synth_generate, write_dataset_csv, write_labels_csv


@click.group()
def main():
    """Cluster-aware blended solar irradiance forecasting."""


def _fail(stage: str, exc: Exception):
    click.echo(f"error [{stage}]: {exc}", err=True)
    sys.exit(1)


@main.command()
@click.option("--out", required=True, type=click.Path())
@click.option("--labels", "labels_path", type=click.Path(), default=None,
              help="Where to write the planted regime labels CSV.")
@click.option("--days", default=96, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--start", default="2023-01-01", show_default=True)
@click.option("--mix", nargs=3, type=float, default=(0.4, 0.35, 0.25),
              show_default=True)
@click.option("--latitude", default=0.0, show_default=True)
def synth(out, labels_path, days, seed, start, mix, latitude):
    """Generate a seeded synthetic hourly dataset."""
    try:
        cfg = SynthConfig(n_days=days, seed=seed, mix=tuple(mix),
                          start=date_t.fromisoformat(start), latitude=latitude)
        ds, labels = synth_generate(cfg)
    except Exception as exc:
        _fail("synth", exc)
    write_dataset_csv(ds, out)
    if labels_path:
        write_labels_csv(ds, labels, labels_path)
    click.echo(f"wrote {sum(len(d.records) for d in ds.days)} records "
               f"({len(ds.days)} days) to {out}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--force", is_flag=True)
def pipeline(config_path, out_dir, force):
    """Run the full pipeline and write all run artifacts."""
    try:
        cfg = PipelineConfig.from_json(config_path)
    except Exception as exc:
        _fail("config", exc)
    try:
        artifacts = run_pipeline(cfg)
    except Exception as exc:
        _fail("pipeline", exc)
    try:
        files = emit_outputs(artifacts, out_dir, force=force)
    except IoError as exc:
        _fail("emit", exc)
    save_bundles(artifacts, out_dir)
    for f in files:
        click.echo(f)


def save_bundles(artifacts, out_dir):
    if artifacts.uc_bundle is not None:
        save_bundle(artifacts.uc_bundle, Path(out_dir) / "bundle-uc")
    if artifacts.aio_bundle is not None:
        save_bundle(artifacts.aio_bundle, Path(out_dir) / "bundle-aio")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--labels-out", type=click.Path(), default=None,
              help="Optional per-day cluster label CSV.")
def cluster(config_path, out_path, labels_out):
    """Run only the clustering stage on the training split."""
    try:
        cfg = PipelineConfig.from_json(config_path)
        ds, _ = load_and_prepare(cfg)
        X = build_day_matrix(ds, "train")
        k_max = min(cfg.k_max, len(X))
        outcome = occur.run_occur(X, k_max, seed=stage_seed(cfg.seed, "occur"),
                                  n_b=cfg.n_b)
    except Exception as exc:
        _fail("cluster", exc)
    dates = [d.date for d in ds.subset("train")]
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(occur.outcome_report(outcome, dates=dates), fh, indent=1)
    if labels_out:
        with open(labels_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("date,cluster_label\n")
            for d, lab in zip(dates, outcome.best_partition.labels):
                fh.write(f"{d.isoformat()},{int(lab)}\n")
    click.echo(f"k_opt={outcome.k_opt} best_method={outcome.best_method}")


@main.command()
@click.option("--classifier", "clf_path", required=True,
              type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def recognize(clf_path, config_path, out_path):
    """Recognize the cluster of each test day from its first four hours."""
    try:
        cfg = PipelineConfig.from_json(config_path)
        clf = recognition.load_classifier(clf_path)
        ds, _ = load_and_prepare(cfg)
        days = ds.subset("test")
        X = np.vstack([recognition.build_pr_vector(d) for d in days])
        labels = clf.predict(X)
    except Exception as exc:
        _fail("recognize", exc)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("date,recognized_cluster\n")
        for d, lab in zip(days, labels):
            fh.write(f"{d.date.isoformat()},{int(lab)}\n")
    click.echo(f"recognized {len(days)} days -> {out_path}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--force", is_flag=True)
def train(config_path, out_dir, force):
    """Train models and persist them (no test-set forecasting)."""
    try:
        cfg = PipelineConfig.from_json(config_path)
        artifacts = run_pipeline(cfg)
        emit_outputs(artifacts, out_dir, force=force)
        save_bundles(artifacts, out_dir)
    except IoError as exc:
        _fail("emit", exc)
    except Exception as exc:
        _fail("train", exc)
    click.echo(f"models written under {out_dir}")


@main.command()
@click.option("--bundle", "bundle_dir", required=True, type=click.Path(exists=True))
@click.option("--classifier", "clf_path", type=click.Path(exists=True), default=None)
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def forecast(bundle_dir, clf_path, config_path, out_path):
    """Forecast the test split with a persisted model bundle."""
    from .pipeline import _forecasts_csv_text, _prev_day
    from .forecasting import forecast_day
    try:
        cfg = PipelineConfig.from_json(config_path)
        bundle = load_bundle(bundle_dir)
        clf = recognition.load_classifier(clf_path) if clf_path else None
        ds, _ = load_and_prepare(cfg)
        rows = []
        for day in ds.subset("test"):
            fc, rec = forecast_day(bundle, clf, day, _prev_day(ds, day))
            for hi, hour in enumerate(range(7, 20)):
                rows.append({"date": day.date.isoformat(), "hour": hour,
                             "ghi_actual": float(day.ghi_vector[hi]),
                             "ghi_forecast": float(fc[hi]),
                             "group": "uc-m3" if clf else "aio-m3",
                             "model_tag": "c_opt",
                             "recognized_cluster": int(rec)})
        text = _forecasts_csv_text(pd.DataFrame(rows))
    except Exception as exc:
        _fail("forecast", exc)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    click.echo(f"forecasts -> {out_path}")


@main.command()
@click.option("--forecasts", "fc_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--normalization", default="mean_actual", show_default=True)
def evaluate(fc_path, out_path, normalization):
    """Compute grouped error reports from a forecasts CSV."""
    try:
        df = pd.read_csv(fc_path)
        df["group"] = df["model_tag"].str.split(":").str[0]
        frames = [evaluation.grouped_report(df, g, basis_rule=normalization)
                  for g in ("overall", "month", "hour", "cluster")]
        report = pd.concat(frames, ignore_index=True)
    except Exception as exc:
        _fail("evaluate", exc)
    report.to_csv(out_path, index=False)
    click.echo(f"evaluation -> {out_path}")


if __name__ == "__main__":
    main()
