"""Pipeline orchestration: stage graph, configuration, and caching.

Stages run in a fixed order (ingest, indices, labeling, clustering,
features, selection, training, evaluation). Each stage writes its outputs
under the output root and records a stamp hashing its inputs and config;
a re-run with unchanged inputs is a per-stage no-op. Everything is
deterministic given the configured seeds, so report.json is byte-identical
across runs.
"""

import datetime as dt
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import clustering, encoding, evaluation, indices, labeling, models
from .ingest import (
    GridSpec, TemporalSplit, build_cube, load_cube, rasterize_events,
    read_events_csv, read_weather_csv, resample_weather_to_grid, store_cube,
)

log = logging.getLogger("firerisk")

STAGES = [
    "ingest", "indices", "labeling", "clustering",
    "features", "selection", "training", "evaluation",
]

DEFAULT_CONFIG = {
    "seed": 0,
    "split": {"train_years": [], "val_years": [], "test_years": []},
    "indices": {"season_start": "01-01", "rain_threshold_mm": 1.0},
    "labeling": {"k": 4, "targets": ["fo", "ba"]},
    "clustering": {"k": 2, "seed": 7, "window": 30},
    "model": {
        "lr": 0.05, "epochs": 400, "l2": 1e-4,
        "undersample_p": 0.25, "sweep": False,
    },
    "fwi_thresholds": list(models.DEFAULT_FWI_THRESHOLDS),
}


class PipelineError(RuntimeError):
    pass


def _merge(base, override):
    out = dict(base)
    for k, v in (override or {}).items():
        out[k] = _merge(base[k], v) if isinstance(v, dict) and isinstance(base.get(k), dict) else v
    return out


@dataclass
class PipelineConfig:
    events: Path
    weather: Path
    gazetteer: Path
    grids: Path
    static_dir: Path
    out_root: Path
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        self.options = _merge(DEFAULT_CONFIG, self.options)
        for name in ("events", "weather", "gazetteer", "grids", "static_dir"):
            p = Path(getattr(self, name))
            setattr(self, name, p)
            if not p.exists():
                raise PipelineError(f"configured path for '{name}' does not exist: {p}")
        self.out_root = Path(self.out_root)

    @classmethod
    def from_file(cls, path, **overrides):
        cfg = json.loads(Path(path).read_text())
        base = Path(path).parent
        paths = {
            k: (base / cfg[k] if not Path(cfg[k]).is_absolute() else Path(cfg[k]))
            for k in ("events", "weather", "gazetteer", "grids", "static_dir", "out_root")
        }
        options = _merge(cfg.get("options", {}), overrides.pop("options", {}))
        paths.update(overrides)
        return cls(options=options, **paths)

    def split(self):
        s = self.options["split"]
        return TemporalSplit(
            frozenset(s["train_years"]), frozenset(s["val_years"]), frozenset(s["test_years"])
        )

    def season_start(self):
        mm, dd = self.options["indices"]["season_start"].split("-")
        return (int(mm), int(dd))


def _hash_paths(paths):
    h = hashlib.sha256()
    for p in sorted(str(p) for p in paths):
        h.update(p.encode())
        path = Path(p)
        if path.is_dir():
            for f in sorted(path.rglob("*")):
                if f.is_file():
                    h.update(f.name.encode())
                    h.update(f.read_bytes())
        elif path.exists():
            h.update(path.read_bytes())
        else:
            h.update(b"<missing>")
    return h.hexdigest()


class StageRunner:
    """Runs a stage unless its stamp matches and its outputs all exist."""

    def __init__(self, out_root):
        self.stamp_dir = Path(out_root) / ".stamps"
        self.stamp_dir.mkdir(parents=True, exist_ok=True)
        self.executed = {}

    def run(self, name, fn, inputs, config_slice, outputs):
        stamp_file = self.stamp_dir / f"{name}.json"
        key = {
            "inputs": _hash_paths(inputs),
            "config": json.dumps(config_slice, sort_keys=True),
        }
        outputs = [Path(o) for o in outputs]
        if stamp_file.exists() and all(o.exists() for o in outputs):
            if json.loads(stamp_file.read_text()) == key:
                log.info("stage %-10s cache hit", name)
                self.executed[name] = False
                return
        t0 = time.monotonic()
        try:
            fn()
        except Exception as exc:
            raise PipelineError(f"stage '{name}' failed: {exc}") from exc
        stamp_file.write_text(json.dumps(key, sort_keys=True))
        log.info("stage %-10s done in %.2fs", name, time.monotonic() - t0)
        self.executed[name] = True


def _load_grids(config):
    raw = json.loads(Path(config.grids).read_text())
    return {
        dep: GridSpec(dep, g["origin_x"], g["origin_y"], g["n_x"], g["n_y"])
        for dep, g in raw.items()
    }


def _load_gazetteer(path):
    df = pd.read_csv(path, dtype={"department": str, "location_ref": str})
    return {r.location_ref: (int(r.row), int(r.col)) for r in df.itertuples()}


NOON_VARS = ["temp_c", "dew_c", "precip_mm", "wind_kmh", "wind_dir_deg", "snow_cm"]


def stage_ingest(config, depts, grids):
    """Build per-department base cubes: weather, static layers, target rasters."""
    events = read_events_csv(config.events)
    weather = read_weather_csv(config.weather)
    gazetteer = _load_gazetteer(config.gazetteer)
    for dep in depts:
        grid = grids[dep]
        dep_weather = weather[weather["department"] == dep]
        dates, noon = resample_weather_to_grid(dep_weather, grid, 12)
        _, evening = resample_weather_to_grid(dep_weather, grid, 16)
        dep_events = [e for e in events if e.department_id == dep]
        ev_dates, counts, ba = rasterize_events(dep_events, grid, gazetteer)
        fo_layer = np.zeros((len(dates), grid.n_y, grid.n_x))
        ba_layer = np.zeros((len(dates), grid.n_y, grid.n_x))
        if ev_dates:
            offset = (ev_dates[0] - dates[0]).days
            for t in range(len(ev_dates)):
                ti = offset + t
                if 0 <= ti < len(dates):
                    fo_layer[ti] = counts[t]
                    ba_layer[ti] = ba[t]
        layers = {v: noon[v] for v in NOON_VARS}
        layers["temp16_c"] = evening["temp_c"]
        layers["dew16_c"] = evening["dew_c"]
        for name in ("elevation", "population", "landcover"):
            path = Path(config.static_dir) / f"{dep}_{name}.csv"
            static = np.loadtxt(path, delimiter=",", ndmin=2)
            layers[name] = np.broadcast_to(static, (len(dates), grid.n_y, grid.n_x))
        layers["fo_count"] = fo_layer
        layers["ba"] = ba_layer
        cube = build_cube(dep, layers, grid, dates)
        store_cube(cube, config.out_root / "cubes" / dep)


def stage_indices(config, depts):
    """Compute fire-danger index cubes from the base cubes."""
    opts = config.options["indices"]
    for dep in depts:
        cube = load_cube(config.out_root / "cubes" / dep)
        noon = {v: np.asarray(cube.feature(v), float) for v in NOON_VARS}
        evening = {
            "temp_c": np.asarray(cube.feature("temp16_c"), float),
            "dew_c": np.asarray(cube.feature("dew16_c"), float),
        }
        layers = indices.compute_index_layers(
            cube.dates, noon, evening,
            season_start=config.season_start(),
            rain_threshold_mm=opts["rain_threshold_mm"],
        )
        out = build_cube(dep, layers, cube.grid, cube.dates)
        store_cube(out, config.out_root / "indices" / dep)


def _daily_totals(config, depts):
    """Per-department daily FO counts and BA totals from the base cubes."""
    frames = []
    for dep in depts:
        cube = load_cube(config.out_root / "cubes" / dep)
        frames.append(
            pd.DataFrame(
                {
                    "department": dep,
                    "date": cube.dates,
                    "fo": cube.feature("fo_count").sum(axis=(1, 2)).astype(float),
                    "ba": cube.feature("ba").sum(axis=(1, 2)).astype(float),
                }
            )
        )
    return pd.concat(frames, ignore_index=True)


def stage_labeling(config, depts):
    """Fit per-department ordinal models on training positives; label all days."""
    split = config.split()
    totals = _daily_totals(config, depts)
    totals["split"] = [split.assign(d) for d in totals["date"]]
    rows = []
    for target in config.options["labeling"]["targets"]:
        for dep, grp in totals.groupby("department", sort=True):
            train_pos = grp.loc[(grp["split"] == "train") & (grp[target] > 0), target]
            model = labeling.fit_ordinal_model(
                train_pos, dep, target, k=config.options["labeling"]["k"]
            )
            classes = labeling.assign_label(grp[target].to_numpy(), model)
            rows.append(
                pd.DataFrame(
                    {
                        "date": [d.isoformat() for d in grp["date"]],
                        "department": dep,
                        "target": target,
                        "class": classes,
                        "value": grp[target].to_numpy(),
                    }
                )
            )
    pd.concat(rows, ignore_index=True).to_csv(config.out_root / "labels.csv", index=False)


def stage_clustering(config, depts):
    """Cluster departments on training-period daily FO counts via DTW."""
    split = config.split()
    totals = _daily_totals(config, depts)
    totals = totals[[split.assign(d) == "train" for d in totals["date"]]]
    series = {
        dep: grp.sort_values("date")["fo"].to_numpy()
        for dep, grp in totals.groupby("department")
    }
    opts = config.options["clustering"]
    assignment = clustering.cluster_departments(
        series, k=min(opts["k"], len(depts)), seed=opts["seed"], window=opts["window"]
    )
    pd.DataFrame(
        {
            "department": sorted(assignment.labels),
            "cluster": [assignment.labels[d] for d in sorted(assignment.labels)],
            "medoid": [
                assignment.medoids[assignment.labels[d]] for d in sorted(assignment.labels)
            ],
        }
    ).to_csv(config.out_root / "clusters.csv", index=False)


def stage_features(config, depts):
    """Assemble the per-(department, date) feature table."""
    labels = pd.read_csv(config.out_root / "labels.csv", dtype={"department": str})
    clusters = pd.read_csv(config.out_root / "clusters.csv", dtype={"department": str})
    cluster_of = dict(zip(clusters["department"], clusters["cluster"]))
    split = config.split()

    parts = []
    for dep in depts:
        base = load_cube(config.out_root / "cubes" / dep)
        idx = load_cube(config.out_root / "indices" / dep)
        agg = pd.concat(
            [encoding.aggregate_spatial(base), encoding.aggregate_spatial(idx)], axis=1
        )
        agg = agg.reset_index()
        agg.insert(0, "department", dep)
        dep_labels = labels[labels["department"] == dep]
        for target in ("fo", "ba"):
            sub = dep_labels[dep_labels["target"] == target].sort_values("date")
            if sub.empty:
                continue
            dates = [dt.date.fromisoformat(d) for d in sub["date"]]
            is_train = [split.assign(d) == "train" for d in dates]
            seqs, mean_len = labeling.segment_sequences(
                [d for d, tr in zip(dates, is_train) if tr],
                (sub["class"].to_numpy() > 0)[is_train],
                dep,
            )
            h = labeling.kernel_half_width(mean_len)
            feat = labeling.past_risk_feature(sub["class"].to_numpy(), h)
            name = "past_risk" if target == "fo" else "past_ba"
            agg[name] = feat
        agg["cluster"] = cluster_of.get(dep, 0)
        parts.append(agg)
    table = pd.concat(parts, ignore_index=True)
    table["date"] = [d.isoformat() if not isinstance(d, str) else d for d in table["date"]]
    table["split"] = [
        split.assign(dt.date.fromisoformat(d)) for d in table["date"]
    ]

    # calendar block encoded against the departmental daily fire totals
    fo = labels[labels["target"] == "fo"][["department", "date", "value"]]
    table = table.merge(fo, on=["department", "date"], how="left")
    table = table.sort_values(["date", "department"], kind="stable").reset_index(drop=True)
    cal, _ = encoding.calendar_features(
        table["date"], table["value"].fillna(0.0), table["split"] == "train"
    )
    dep_enc = np.empty(len(table))
    train_mask = (table["split"] == "train").to_numpy()
    enc_train, dep_model = encoding.ordered_target_encode(
        table.loc[train_mask, "department"], table.loc[train_mask, "value"].fillna(0.0),
        feature="department",
    )
    dep_enc[train_mask] = enc_train
    dep_enc[~train_mask] = encoding.apply_encoder(
        table.loc[~train_mask, "department"], dep_model
    )
    table = pd.concat([table.drop(columns=["value"]), cal], axis=1)
    table["dept_encoded"] = dep_enc

    meta_cols = ["department", "date", "split"]
    feature_cols = [c for c in table.columns if c not in meta_cols]
    scaled, _ = encoding.standardize(table[feature_cols], train_mask)
    out = pd.concat([table[meta_cols], scaled], axis=1)
    out.to_csv(config.out_root / "features.csv", index=False)


def stage_selection(config):
    """Variance and correlation pruning on training rows."""
    table = pd.read_csv(config.out_root / "features.csv", dtype={"department": str})
    feature_cols = [c for c in table.columns if c not in ("department", "date", "split")]
    train = table[table["split"] == "train"]
    keep, dropped = encoding.select_features(train[feature_cols])
    (config.out_root / "selection.json").write_text(
        json.dumps({"retained": keep, "dropped": dropped}, indent=1, sort_keys=True)
    )
    table[["department", "date", "split"] + keep].to_csv(
        config.out_root / "features_selected.csv", index=False
    )


def _model_frames(config):
    table = pd.read_csv(config.out_root / "features_selected.csv", dtype={"department": str})
    labels = pd.read_csv(config.out_root / "labels.csv", dtype={"department": str})
    feature_cols = [c for c in table.columns if c not in ("department", "date", "split")]
    return table, labels, feature_cols


def stage_training(config):
    """Train the logistic baseline per target; emit test predictions.

    The undersampling proportion comes from the validation sweep when a
    validation split exists and sweeping is enabled, otherwise from the
    configured fixed proportion. The FWI threshold baseline is emitted for
    FO alongside.
    """
    table, labels, feature_cols = _model_frames(config)
    opts = config.options["model"]
    seed = int(config.options["seed"])
    pred_frames = []
    for target in config.options["labeling"]["targets"]:
        lbl = labels[labels["target"] == target][["department", "date", "class"]]
        data = table.merge(lbl, on=["department", "date"], validate="one_to_one")
        x = data[feature_cols].to_numpy(float)
        y = data["class"].to_numpy(int)
        tr = (data["split"] == "train").to_numpy()
        va = (data["split"] == "val").to_numpy()
        te = (data["split"] == "test").to_numpy()

        def learner(xs, ys, s):
            return models.fit_multinomial_logistic(
                xs, ys, l2=opts["l2"], lr=opts["lr"], epochs=opts["epochs"], seed=s
            )

        if opts["sweep"] and va.any():
            p, model, _ = models.sweep_undersample(
                x[tr], y[tr], x[va], y[va], learner, seed=seed
            )
        else:
            p = opts["undersample_p"]
            grid_p = min(models.UNDERSAMPLE_GRID, key=lambda g: abs(g - p))
            keep = models.undersample(y[tr], models.UndersamplePolicy(grid_p, seed))
            model = learner(x[tr][keep], y[tr][keep], seed)

        scores = model.predict_scores(x[te])
        frame = data.loc[te, ["department", "date"]].copy()
        frame.insert(0, "target", target)
        frame.insert(0, "model", "logistic")
        for k in range(models.N_CLASSES):
            frame[f"s{k}"] = scores[:, k]
        pred_frames.append(frame)

        if target == "fo":
            fwi_vals = _department_mean_fwi(config, data.loc[te])
            cls = models.fwi_classifier(
                fwi_vals, models.FwiThresholds(tuple(config.options["fwi_thresholds"]))
            )
            fframe = data.loc[te, ["department", "date"]].copy()
            fframe.insert(0, "target", target)
            fframe.insert(0, "model", "fwi")
            onehot = np.eye(models.N_CLASSES)[cls]
            for k in range(models.N_CLASSES):
                fframe[f"s{k}"] = onehot[:, k]
            pred_frames.append(fframe)
    pd.concat(pred_frames, ignore_index=True).to_csv(
        config.out_root / "predictions.csv", index=False
    )


def _department_mean_fwi(config, rows):
    """Daily department-mean FWI straight from the index cubes."""
    vals = []
    cache = {}
    for dep, date in zip(rows["department"], rows["date"]):
        if dep not in cache:
            cube = load_cube(config.out_root / "indices" / dep)
            series = cube.feature("fwi").mean(axis=(1, 2))
            cache[dep] = dict(zip((d.isoformat() for d in cube.dates), series))
        vals.append(cache[dep][date])
    return np.asarray(vals, float)


def stage_evaluation(config):
    """Score every model in predictions.csv on the test split."""
    labels = pd.read_csv(config.out_root / "labels.csv", dtype={"department": str})
    split = config.split()
    labels["split"] = [
        split.assign(dt.date.fromisoformat(d)) for d in labels["date"]
    ]
    preds = pd.read_csv(config.out_root / "predictions.csv", dtype={"department": str})
    score_cols = ["s0", "s1", "s2", "s3", "s4"]
    preds["pred"] = preds[score_cols].to_numpy().argmax(axis=1)
    reports = []
    for (model, target), grp in preds.groupby(["model", "target"], sort=True):
        truth = labels[(labels["target"] == target) & (labels["split"] == "test")]
        truth = truth.rename(columns={"class": "label"})[["department", "date", "label"]]
        reports.append(
            evaluation.evaluate(
                grp[["department", "date", "pred"]], truth, model=model, target=target
            )
        )
    evaluation.write_report(
        reports, config.out_root / "report.json", config.out_root / "report.csv"
    )


def run_pipeline(config, stages=None):
    """Run the full stage graph; returns the StageRunner with execution log."""
    config.out_root.mkdir(parents=True, exist_ok=True)
    grids = _load_grids(config)
    depts = sorted(grids)
    runner = StageRunner(config.out_root)
    inputs = [config.events, config.weather, config.gazetteer, config.grids, config.static_dir]
    opts = config.options
    wanted = set(stages or STAGES)

    plan = [
        ("ingest", lambda: stage_ingest(config, depts, grids), inputs,
         {}, [config.out_root / "cubes" / d / "values.bin" for d in depts]),
        ("indices", lambda: stage_indices(config, depts),
         [config.out_root / "cubes" / d for d in depts],
         opts["indices"], [config.out_root / "indices" / d / "values.bin" for d in depts]),
        ("labeling", lambda: stage_labeling(config, depts),
         [config.out_root / "cubes" / d for d in depts],
         {"labeling": opts["labeling"], "split": opts["split"]},
         [config.out_root / "labels.csv"]),
        ("clustering", lambda: stage_clustering(config, depts),
         [config.out_root / "cubes" / d for d in depts],
         {"clustering": opts["clustering"], "split": opts["split"]},
         [config.out_root / "clusters.csv"]),
        ("features", lambda: stage_features(config, depts),
         [config.out_root / "labels.csv", config.out_root / "clusters.csv"]
         + [config.out_root / "indices" / d for d in depts],
         {"split": opts["split"]}, [config.out_root / "features.csv"]),
        ("selection", lambda: stage_selection(config),
         [config.out_root / "features.csv"], {},
         [config.out_root / "features_selected.csv", config.out_root / "selection.json"]),
        ("training", lambda: stage_training(config),
         [config.out_root / "features_selected.csv", config.out_root / "labels.csv"],
         {"model": opts["model"], "seed": opts["seed"],
          "fwi_thresholds": opts["fwi_thresholds"]},
         [config.out_root / "predictions.csv"]),
        ("evaluation", lambda: stage_evaluation(config),
         [config.out_root / "predictions.csv", config.out_root / "labels.csv"],
         {"split": opts["split"]},
         [config.out_root / "report.json", config.out_root / "report.csv"]),
    ]
    for name, fn, ins, cfg, outs in plan:
        if name in wanted:
            runner.run(name, fn, ins, cfg, outs)
    return runner
