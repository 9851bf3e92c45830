"""End-to-end orchestration: split, cluster, recognize, train, forecast,
evaluate, and write the run artifacts.

Every stage draws its seed deterministically from the master seed and the
stage name, so a run is fully reproducible from its manifest.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

import joblib
import numpy as np
import pandas as pd

from . import evaluation, forecasting, occur, recognition
from .data import (Dataset, DayProfile, HaurwitzClearSky,
                   attach_clear_sky, build_day_matrix, load_dataset,
                   split_train_test, validate_records)
from .forecasting import ForecastBundle, persistence_day, train_uc_m3
from .learners import BLENDER_CANDIDATES, FIRST_LAYER_CATALOG

GROUPS = ("uc-m3", "uc-saml", "aio-m3", "aio-saml")

OUTPUT_FILES = ("occur-report.json", "classifier.json", "forecasts.csv",
                "evaluation-report.json", "evaluation-report.csv",
                "run-manifest.json")


class ConfigError(Exception):
    def __init__(self, field_name, detail=""):
        super().__init__(f"invalid config field {field_name!r}: {detail}")
        self.field_name = field_name


class IoError(Exception):
    pass


@dataclass
class PipelineConfig:
    data_path: str = ""
    latitude: float = 0.0
    longitude: float = 0.0
    elevation: float = 0.0
    k_max: int = 14
    n_b: int = 10
    split_ratio: float = 0.75
    seed: int = 0
    folds: int = 10
    n_jobs: int = 1
    kernel_form: str = "paper"
    normalization: str = "mean_actual"
    groups: tuple = GROUPS
    catalog_names: tuple = tuple(v.name for v in FIRST_LAYER_CATALOG)
    blender_names: tuple = tuple(v.name for v in BLENDER_CANDIDATES)

    def validate(self):
        if self.k_max < 2:
            raise ConfigError("k_max", "must be >= 2")
        if not (0 < self.split_ratio < 1):
            raise ConfigError("split_ratio", "must be in (0, 1)")
        if self.folds < 2:
            raise ConfigError("folds", "must be >= 2")
        if self.n_b < 1:
            raise ConfigError("n_b", "must be >= 1")
        for g in self.groups:
            if g not in GROUPS:
                raise ConfigError("groups", f"unknown group {g!r}")
        return self

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        for key in ("groups", "catalog_names", "blender_names"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw).validate()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("groups", "catalog_names", "blender_names"):
            d[key] = list(d[key])
        return d

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def stage_seed(master: int, stage: str) -> int:
    h = hashlib.sha256(f"{master}:{stage}".encode()).digest()
    return int.from_bytes(h[:4], "big")


def _catalog_subset(names):
    by_name = {v.name: v for v in FIRST_LAYER_CATALOG}
    return tuple(by_name[n] for n in names)


def _blender_subset(names):
    by_name = {v.name: v for v in BLENDER_CANDIDATES}
    return tuple(by_name[n] for n in names)


@dataclass
class RunArtifacts:
    config: PipelineConfig
    dataset: Dataset
    outcome: occur.ClusteringOutcome
    classifier: recognition.SvmPatternClassifier | None
    uc_bundle: ForecastBundle | None
    aio_bundle: ForecastBundle | None
    forecasts: pd.DataFrame = field(default_factory=pd.DataFrame)
    reports: dict = field(default_factory=dict)
    validation: list = field(default_factory=list)
    saml_reps: dict = field(default_factory=dict)


def _pseudo_prev_day(day: DayProfile) -> DayProfile:
    # First day of the record has no predecessor: assume yesterday was clear.
    recs = tuple(
        dataclasses.replace(r, ghi=r.ghi_clr or 0.0) for r in day.records)
    return DayProfile(day.date, recs)


def _prev_day(ds: Dataset, day: DayProfile) -> DayProfile:
    prev = ds.day_by_date(day.date - timedelta(days=1))
    return prev if prev is not None else _pseudo_prev_day(day)


def load_and_prepare(cfg: PipelineConfig) -> tuple[Dataset, list[str]]:
    ds = load_dataset(cfg.data_path)
    model = HaurwitzClearSky(cfg.latitude, cfg.longitude, cfg.elevation)
    ds = attach_clear_sky(ds, model)
    report = validate_records(ds)
    ds = split_train_test(ds, ratio=cfg.split_ratio,
                          seed=stage_seed(cfg.seed, "split"))
    return ds, report


def run_pipeline(cfg: PipelineConfig, dataset: Dataset | None = None) -> RunArtifacts:
    cfg.validate()
    if dataset is None:
        ds, validation = load_and_prepare(cfg)
    else:
        ds = split_train_test(dataset, ratio=cfg.split_ratio,
                              seed=stage_seed(cfg.seed, "split"))
        validation = validate_records(ds)

    train_days = ds.subset("train")
    X = build_day_matrix(ds, "train")
    k_max = min(cfg.k_max, len(train_days))
    outcome = occur.run_occur(X, k_max, seed=stage_seed(cfg.seed, "occur"),
                              n_b=cfg.n_b)
    labels = outcome.best_partition.labels

    needs_uc = any(g.startswith("uc") for g in cfg.groups)
    clf = None
    if needs_uc and outcome.k_opt > 1:
        pr_X = np.vstack([recognition.build_pr_vector(d) for d in train_days])
        clf = recognition.fit_pr_classifier(
            pr_X, labels, seed=stage_seed(cfg.seed, "svm-pr"),
            kernel_form=cfg.kernel_form)

    catalog = _catalog_subset(cfg.catalog_names)
    blenders = _blender_subset(cfg.blender_names)
    uc_bundle = aio_bundle = None
    early = forecasting.train_early_morning(
        train_days, catalog=catalog, blender_candidates=blenders,
        folds=cfg.folds, seed=stage_seed(cfg.seed, "train-early"),
        n_jobs=cfg.n_jobs)
    if needs_uc:
        uc_bundle = train_uc_m3(train_days, labels, catalog=catalog,
                                blender_candidates=blenders, folds=cfg.folds,
                                seed=stage_seed(cfg.seed, "train-uc"),
                                n_jobs=cfg.n_jobs, early_morning=early)
    if any(g.startswith("aio") for g in cfg.groups):
        aio_bundle = train_uc_m3(train_days, np.zeros(len(train_days), dtype=int),
                                 catalog=catalog, blender_candidates=blenders,
                                 folds=cfg.folds,
                                 seed=stage_seed(cfg.seed, "train-aio"),
                                 n_jobs=cfg.n_jobs, early_morning=early)

    saml_reps = {}
    if uc_bundle is not None:
        mean_cv = {
            v.name: float(np.mean([m.first_layer_cv_[v.name]
                                   for m in uc_bundle.cluster_models.values()]))
            for v in catalog}
        saml_reps["uc-saml"] = min(sorted(mean_cv), key=lambda n: (mean_cv[n], n))
    if aio_bundle is not None:
        cv = next(iter(aio_bundle.cluster_models.values())).first_layer_cv_
        saml_reps["aio-saml"] = min(sorted(cv), key=lambda n: (cv[n], n))

    forecasts = _batched_forecasts(cfg, ds, clf, uc_bundle, aio_bundle, catalog)

    reports = {}
    if not forecasts.empty:
        for grouping in ("overall", "month", "hour", "cluster"):
            reports[grouping] = evaluation.grouped_report(
                forecasts, grouping, basis_rule=cfg.normalization)

    return RunArtifacts(config=cfg, dataset=ds, outcome=outcome,
                        classifier=clf, uc_bundle=uc_bundle,
                        aio_bundle=aio_bundle, forecasts=forecasts,
                        reports=reports, validation=validation,
                        saml_reps=saml_reps)


def _batched_forecasts(cfg, ds, clf, uc_bundle, aio_bundle, catalog) -> pd.DataFrame:
    """Day-level forecasts for every enabled group, computed model-by-model
    over all test days at once. Row order matches a day-by-day dispatch."""
    test_days = ds.subset("test")
    if not test_days:
        return pd.DataFrame()
    n = len(test_days)
    hours = list(range(7, 20))

    caps = np.full((n, 13), np.inf)
    actual = np.zeros((n, 13))
    for di, day in enumerate(test_days):
        for hi, hour in enumerate(hours):
            rec = day.record_at(hour)
            actual[di, hi] = rec.ghi
            if rec.ghi_clr is not None:
                caps[di, hi] = 1.2 * rec.ghi_clr

    p7 = np.zeros(n)
    pers = np.zeros((n, 13))
    for di, day in enumerate(test_days):
        prev = _prev_day(ds, day)
        pers[di] = persistence_day(day, prev)
        p7[di] = pers[di][0]

    early_X = {h: np.array([[d.record_at(hh).ghi for hh in range(7, h)]
                            for d in test_days])
               for h in forecasting.EARLY_HOURS}
    F = np.array([[forecasting.day_feature_row(d, hr - 1)
                   for hr in range(11, 20)] for d in test_days])

    def recognized_for(bundle, use_clf):
        if use_clf and clf is not None and bundle.k > 1:
            pr = np.vstack([recognition.build_pr_vector(d) for d in test_days])
            return np.asarray(clf.predict(pr), dtype=int)
        return np.full(n, int(min(bundle.cluster_models)), dtype=int)

    def bundle_preds(bundle, rec_labels, variant):
        out = np.zeros((n, 13))
        out[:, 0] = p7
        for h in forecasting.EARLY_HOURS:
            m = bundle.early_morning[h]
            out[:, h - 7] = (m.predict_variant(early_X[h], variant) if variant
                             else m.predict(early_X[h]))
        keys = np.array([bundle.label_map.get(int(l), int(l))
                         for l in rec_labels])
        for key in np.unique(keys):
            idx = np.flatnonzero(keys == key)
            model = bundle.cluster_models[int(key)]
            Xf = F[idx].reshape(-1, F.shape[2])
            p = (model.predict_variant(Xf, variant) if variant
                 else model.predict(Xf))
            out[idx, 4:13] = p.reshape(len(idx), 9)
        return np.minimum(np.maximum(out, 0.0), caps)

    per_model = {}   # (group, model) -> (preds (n,13), rec labels (n,))
    if uc_bundle is not None:
        rec_uc = recognized_for(uc_bundle, use_clf=True)
        if "uc-m3" in cfg.groups:
            per_model[("uc-m3", "c_opt")] = (bundle_preds(uc_bundle, rec_uc, None),
                                             rec_uc)
        if "uc-saml" in cfg.groups:
            for v in catalog:
                per_model[("uc-saml", v.name)] = (
                    bundle_preds(uc_bundle, rec_uc, v.name), rec_uc)
            per_model[("uc-saml", "persistence")] = (pers, np.full(n, -1))
    if aio_bundle is not None:
        rec_aio = recognized_for(aio_bundle, use_clf=False)
        if "aio-m3" in cfg.groups:
            per_model[("aio-m3", "c_opt")] = (
                bundle_preds(aio_bundle, rec_aio, None), rec_aio)
        if "aio-saml" in cfg.groups:
            for v in catalog:
                per_model[("aio-saml", v.name)] = (
                    bundle_preds(aio_bundle, rec_aio, v.name), rec_aio)
            per_model[("aio-saml", "persistence")] = (pers, np.full(n, -1))

    order = [("uc-m3", "c_opt"), ("aio-m3", "c_opt")]
    order += [("uc-saml", v.name) for v in catalog] + [("uc-saml", "persistence")]
    order += [("aio-saml", v.name) for v in catalog] + [("aio-saml", "persistence")]
    rows = []
    for di, day in enumerate(test_days):
        for grp, model in order:
            if (grp, model) not in per_model:
                continue
            fc, recs = per_model[(grp, model)]
            for hi, hour in enumerate(hours):
                rows.append({
                    "date": day.date.isoformat(), "hour": hour,
                    "ghi_actual": float(actual[di, hi]),
                    "ghi_forecast": float(fc[di, hi]),
                    "group": grp, "model_tag": f"{grp}:{model}",
                    "recognized_cluster": int(recs[di]),
                })
    return pd.DataFrame(rows)


def _forecasts_csv_text(forecasts: pd.DataFrame) -> str:
    lines = ["date,hour,ghi_actual,ghi_forecast,model_tag,recognized_cluster"]
    for row in forecasts.itertuples(index=False):
        lines.append(f"{row.date},{row.hour},{row.ghi_actual:.6f},"
                     f"{row.ghi_forecast:.6f},{row.model_tag},"
                     f"{row.recognized_cluster}")
    return "\n".join(lines) + "\n"


def _evaluation_report_dict(artifacts: RunArtifacts) -> dict:
    nested: dict = {}
    for grouping, df in artifacts.reports.items():
        for row in df.itertuples(index=False):
            nested.setdefault(row.group, {}).setdefault(row.model, {}) \
                .setdefault(grouping, {})[str(row.key)] = {
                "nmae": row.nmae, "nrmse": row.nrmse,
                "n": int(row.n), "basis": row.basis}
    return {
        "normalization": artifacts.config.normalization,
        "saml_representatives": artifacts.saml_reps,
        "groups": nested,
    }


def _evaluation_csv_text(artifacts: RunArtifacts) -> str:
    lines = ["group,model,grouping,key,nmae,nrmse,n,basis"]
    for grouping in sorted(artifacts.reports):
        df = artifacts.reports[grouping]
        for row in df.itertuples(index=False):
            lines.append(f"{row.group},{row.model},{row.grouping},{row.key},"
                         f"{row.nmae:.10g},{row.nrmse:.10g},{int(row.n)},"
                         f"{row.basis:.10g}")
    return "\n".join(lines) + "\n"


def emit_outputs(artifacts: RunArtifacts, out_dir, force: bool = False) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    existing = [f for f in OUTPUT_FILES if (out / f).exists()]
    if existing and not force:
        raise IoError(f"exists: {existing[0]} (pass --force to overwrite)")

    cfg = artifacts.config
    train_dates = [d.date for d in artifacts.dataset.subset("train")]
    with open(out / "occur-report.json", "w", encoding="utf-8") as fh:
        json.dump(occur.outcome_report(artifacts.outcome, dates=train_dates),
                  fh, indent=1)
    if artifacts.classifier is not None:
        recognition.save_classifier(artifacts.classifier, out / "classifier.json")
    else:
        with open(out / "classifier.json", "w", encoding="utf-8") as fh:
            json.dump({"schema_version": recognition.CLASSIFIER_SCHEMA_VERSION,
                       "models": []}, fh)
    with open(out / "forecasts.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_forecasts_csv_text(artifacts.forecasts))
    with open(out / "evaluation-report.json", "w", encoding="utf-8") as fh:
        json.dump(_evaluation_report_dict(artifacts), fh, indent=1)
    with open(out / "evaluation-report.csv", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(_evaluation_csv_text(artifacts))
    manifest = {
        "schema_version": 1,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "stage_seeds": {s: stage_seed(cfg.seed, s)
                        for s in ("split", "occur", "svm-pr", "train-uc",
                                  "train-aio")},
        "k_opt": artifacts.outcome.k_opt,
        "best_method": artifacts.outcome.best_method,
        "saml_representatives": artifacts.saml_reps,
        "validation_issues": artifacts.validation,
        "merge_records": {
            "uc": artifacts.uc_bundle.merge_records if artifacts.uc_bundle else [],
            "aio": artifacts.aio_bundle.merge_records if artifacts.aio_bundle else [],
        },
        "blenders": {
            name: {str(k): m.blender_name_
                   for k, m in bundle.cluster_models.items()}
            for name, bundle in (("uc", artifacts.uc_bundle),
                                 ("aio", artifacts.aio_bundle))
            if bundle is not None
        },
    }
    with open(out / "run-manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
    return [str(out / f) for f in OUTPUT_FILES]


# --- bundle persistence -----------------------------------------------------

BUNDLE_SCHEMA_VERSION = 1


def save_bundle(bundle: ForecastBundle, dir_path):
    """Bundle metadata as JSON; fitted model state in a joblib sidecar."""
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "clusters": sorted(bundle.cluster_models),
        "label_map": {str(k): v for k, v in bundle.label_map.items()},
        "merge_records": bundle.merge_records,
        "catalog": [v.name for v in bundle.catalog],
        "blenders": {str(k): m.blender_name_
                     for k, m in bundle.cluster_models.items()},
        "model_state": "models.joblib",
    }
    with open(d / "bundle-manifest.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
    joblib.dump(bundle, d / "models.joblib")


def load_bundle(dir_path) -> ForecastBundle:
    d = Path(dir_path)
    with open(d / "bundle-manifest.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta["schema_version"] != BUNDLE_SCHEMA_VERSION:
        raise IoError(f"unsupported bundle schema {meta['schema_version']}")
    return joblib.load(d / meta["model_state"])
