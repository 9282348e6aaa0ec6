"""File-based pipeline stages.  Each stage reads its inputs from the config
and from earlier outputs in ``output_dir``, writes its own outputs there
and a ``manifest_<stage>.json`` describing them."""

from __future__ import annotations

import hashlib
import json
import logging
import platform
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import PipelineConfig
from .errors import DataError, TooFewRecords
from .evaluator import (ECOREGION_CODES, MODEL_COLUMNS, evaluate_simulations, model_corr_matrix,
                        residual_quartiles, sga_by_latitude)
from .features import FeatureTable, assemble_features, compute_aridity, table_to_grid
from .gbdt import TrainConfig, gain_importance, load, save
from .grid import Grid, GridAlignment, align_to_reference, read_grid, write_ascii
from .proxies import build_proxies as _build_proxies
from .proxies import read_polygons, read_records, write_records
from .stress import Scenario, apply_scenario, count_violations, violation_report
from .trainer import (HyperSearchSpace, Variant, assemble_variant, ecoregion_cv, make_partition,
                      random_search, real_records)
from .wells import WellConfig, process_wells as _process_wells, read_wells

log = logging.getLogger(__name__)

RESIDUAL_ATTRIBUTES = ("aridity_index", "topographic_index", "elevation", "slope",
                       "depth_to_bedrock")


# ---------------------------------------------------------------------------
# helpers


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(cfg: PipelineConfig, stage: str, outputs, counts: dict, extra=None) -> Path:
    out = cfg.output_dir
    body = {
        "stage": stage,
        "config_sha256": cfg.digest,
        "seed": cfg.seed,
        "versions": {"wtdml": __version__, "numpy": np.__version__, "pandas": pd.__version__,
                     "python": platform.python_version()},
        "row_counts": counts,
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
    }
    if extra:
        body.update(extra)
    path = out / f"manifest_{stage}.json"
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_csv(df: pd.DataFrame, path: Path) -> Path:
    df.to_csv(path, index=False, float_format="%.17g", encoding="utf-8")
    return path


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise DataError(f"{path.name} not found; run '{hint}' first")
    return path


def _alignment(cfg: PipelineConfig) -> GridAlignment | None:
    ref = cfg.get("reference")
    if not ref:
        return None
    return GridAlignment((float(ref["origin_lon"]), float(ref["origin_lat"])),
                         float(ref["cell_size"]), float(ref.get("max_offset_tolerance", 0.25)))


def load_grid(cfg: PipelineConfig, value) -> Grid:
    g = read_grid(cfg.path(value))
    a = _alignment(cfg)
    return g if a is None else align_to_reference(g, a)


def load_layers(cfg: PipelineConfig) -> dict[str, Grid]:
    return {name: load_grid(cfg, p) for name, p in cfg["layers"].items()}


def template(cfg: PipelineConfig) -> Grid:
    return load_grid(cfg, cfg["layers"]["elevation"])


def load_features(cfg: PipelineConfig) -> FeatureTable:
    return FeatureTable.from_csv(_require(cfg.output_dir / "features.csv", "prepare-features"))


def load_real(cfg: PipelineConfig) -> pd.DataFrame:
    path = _require(cfg.output_dir / "wells_pixels.csv", "process-wells")
    return real_records(pd.read_csv(path, float_precision="round_trip"))


def load_proxies(cfg: PipelineConfig, required: bool = True):
    out = {}
    for key, fname in (("interior", "proxies_interior.csv"), ("shore", "proxies_shoreline.csv"),
                       ("hand", "proxies_hand.csv")):
        path = cfg.output_dir / fname
        if path.exists():
            out[key] = read_records(path)
        elif required:
            _require(path, "build-proxies")
        else:
            out[key] = None
    return out


def _variants(cfg: PipelineConfig, variant=None) -> list[Variant]:
    if variant is not None:
        return [Variant.parse(variant)]
    return [Variant.parse(v) for v in cfg["variants"]]


def _search_space(cfg: PipelineConfig) -> HyperSearchSpace:
    s = dict(cfg["search"])
    s.pop("weighted", None)
    kwargs = {"n_iterations": int(s.pop("n_iterations", 20))}
    for k, v in s.items():
        kwargs[k] = tuple(v)
    return HyperSearchSpace(**kwargs)


def _base_train(cfg: PipelineConfig) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(min_child_weight=float(t.get("min_child_weight", 1.0)),
                       n_bins=int(t.get("n_bins", 256)))


# ---------------------------------------------------------------------------
# stages


def prepare_features(cfg: PipelineConfig) -> FeatureTable:
    table = assemble_features(load_layers(cfg))
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    path = out / "features.csv"
    table.to_csv(path)
    write_manifest(cfg, "prepare-features", [path],
                   {"features": len(table), "dropped_nodata": table.dropped})
    log.info("feature table: %d rows, %d cells dropped", len(table), table.dropped)
    return table


def process_wells(cfg: PipelineConfig):
    th = cfg.thresholds
    wc = WellConfig(max_plausible_depth=float(th["max_plausible_depth"]),
                    aridity_split=float(th["aridity_split"]),
                    dry_depth_limit=float(th["dry_depth"]),
                    wet_depth_limit=float(th["wet_depth"]),
                    missing_depth=str(cfg["missing_depth"]))
    layers = cfg["layers"]
    aridity = compute_aridity(load_grid(cfg, layers["pet"]), load_grid(cfg, layers["precipitation"]))
    pixels, report = _process_wells(read_wells(cfg.path(cfg["wells"])), aridity, wc)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    p = _write_csv(pixels, out / "wells_pixels.csv")
    r = out / "wells_report.json"
    r.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_manifest(cfg, "process-wells", [p, r], {"pixels": len(pixels)})
    return pixels, report


def build_proxies(cfg: PipelineConfig):
    th = cfg.thresholds
    wop = load_grid(cfg, cfg["wop"])
    hand = load_grid(cfg, cfg["hand"])
    interior, shore, hand_recs = _build_proxies(
        wop, read_polygons(cfg.path(cfg["polygons"])), hand,
        hand_fraction=float(th["hand_fraction"]), seed=cfg.stage_seed("hand"),
        interior_threshold=float(th["interior_wop"]), shore_threshold=float(th["shore_wop"]),
        area_range_ha=(float(th["area_min_ha"]), float(th["area_max_ha"])),
        connectivity=int(cfg["connectivity"]), hand_threshold=float(th["hand"]),
        hand_weight=float(th["hand_weight"]))
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for df, name in ((interior, "proxies_interior.csv"), (shore, "proxies_shoreline.csv"),
                     (hand_recs, "proxies_hand.csv")):
        path = out / name
        write_records(df, path)
        paths.append(path)
    write_manifest(cfg, "build-proxies", paths,
                   {"interior": len(interior), "shoreline": len(shore), "hand": len(hand_recs)})
    return interior, shore, hand_recs


def partition(cfg: PipelineConfig, real, proxies):
    """One partition over the union of all record pixels, shared by every variant."""
    frames = [real] + [proxies[k] for k in ("shore", "hand") if proxies.get(k) is not None]
    focus = load_grid(cfg, cfg["focus_mask"])
    return make_partition(pd.concat(frames, ignore_index=True), focus, cfg.stage_seed("partition"))


def train(cfg: PipelineConfig, variant=None) -> dict:
    table = load_features(cfg)
    real = load_real(cfg)
    proxies = load_proxies(cfg, required=False)
    part = partition(cfg, real, proxies)
    out = cfg.output_dir
    part_path = _write_csv(part.to_frame(), out / "partition.csv")
    tmpl = template(cfg)
    features = cfg.features
    X_all = table.matrix(features)
    results = {}
    for v in _variants(cfg, variant):
        if v is not Variant.V1 and (proxies["shore"] is None or proxies["hand"] is None):
            _require(out / "proxies_shoreline.csv", "build-proxies")
        vd = assemble_variant(v, real, proxies["shore"], proxies["hand"], table, features,
                              on_unresolved="drop")
        ids = vd.records["pixel_id"].to_numpy(np.int64)
        tr, va = np.isin(ids, part.train), np.isin(ids, part.valid)
        if not tr.any() or not va.any():
            raise TooFewRecords(f"{v.value}: empty training or validation split")
        sr = random_search(_search_space(cfg), vd.matrix.subset(tr), vd.matrix.subset(va),
                           cfg.directions, seed=cfg.stage_seed("search", int(v.value[1])),
                           base=_base_train(cfg),
                           weighted=bool(cfg["search"].get("weighted", True)))
        model_path = out / f"model_{v.value}.txt"
        save(sr.model, model_path)
        log_path = _write_csv(sr.log, out / f"search_log_{v.value}.csv")
        sim = table_to_grid(table, sr.model.predict(X_all), tmpl)
        sim_path = out / f"sim_{v.value}.asc"
        write_ascii(sim, sim_path)

        test = real.loc[real["pixel_id"].isin(part.test)]
        rows = table.rows_for(test["pixel_id"].to_numpy())
        test = test.loc[rows >= 0]
        pred = sr.model.predict(X_all[rows[rows >= 0]])
        tp = pd.DataFrame({"pixel_id": test["pixel_id"].to_numpy(np.int64),
                           "observed": test["target_wtd"].to_numpy(), "predicted": pred})
        tp_path = _write_csv(tp, out / f"test_predictions_{v.value}.csv")
        imp = gain_importance(sr.model)
        imp_path = _write_csv(pd.DataFrame({"feature": list(imp), "importance": list(imp.values())}),
                              out / f"importance_{v.value}.csv")
        write_manifest(cfg, f"train-{v.value}",
                       [part_path, model_path, log_path, sim_path, tp_path, imp_path],
                       {"train": int(tr.sum()), "valid": int(va.sum()), "test_real": len(tp),
                        "dropped_duplicates": vd.dropped_duplicates,
                        "dropped_unresolved": vd.dropped_unresolved},
                       {"best_config": sr.best.as_dict()})
        results[v.value] = sr
    return results


def cross_validate(cfg: PipelineConfig, variant=None) -> dict:
    """Per-ecoregion k-fold CV; proxies of the variant inside the region stay in training."""
    if not cfg.get("ecoregions"):
        raise DataError("cross-validation needs an 'ecoregions' grid")
    eco = load_grid(cfg, cfg["ecoregions"]).values.ravel()
    table = load_features(cfg)
    real = load_real(cfg)
    proxies = load_proxies(cfg, required=False)
    c = cfg["cv"]
    k = int(c.get("k", 10))
    tc = replace(_base_train(cfg), rounds=int(c.get("rounds", 100)),
                 max_depth=int(c.get("max_depth", 4)),
                 learning_rate=float(c.get("learning_rate", 0.1)),
                 l2_lambda=float(c.get("l2_lambda", 1.0)))
    out = cfg.output_dir
    results = {}
    for v in _variants(cfg, variant):
        extra = [proxies[s] for s, src in (("shore", "SHORE"), ("hand", "HAND"))
                 if src in v.sources and proxies[s] is not None]
        prox = pd.concat(extra, ignore_index=True) if extra else None
        frames = []
        for code in ECOREGION_CODES:
            r = real.loc[eco[real["pixel_id"].to_numpy()] == code]
            if len(r) < k:
                log.warning("%s: region %d has %d real records, skipped", v.value, code, len(r))
                continue
            p = None if prox is None else prox.loc[eco[prox["pixel_id"].to_numpy()] == code]
            p = None if p is None else p.loc[~p["pixel_id"].isin(r["pixel_id"])]
            df = ecoregion_cv(r, p, table, replace(tc, seed=cfg.stage_seed("cv", code)),
                              cfg.directions, k=k, seed=cfg.stage_seed("cv", 100 + code),
                              features=cfg.features)
            frames.append(df.assign(region=code))
        res = (pd.concat(frames, ignore_index=True) if frames
               else pd.DataFrame(columns=["pixel_id", "fold", "observed", "predicted", "region"]))
        path = _write_csv(res, out / f"cv_{v.value}.csv")
        write_manifest(cfg, f"cross-validate-{v.value}", [path], {"records": len(res)})
        results[v.value] = res
    return results


def _simulations(cfg: PipelineConfig) -> dict[str, Grid]:
    sims = {}
    comp = cfg.get("comparison") or {}
    for name in MODEL_COLUMNS:
        if name in comp:
            sims[name] = load_grid(cfg, comp[name])
        elif (cfg.output_dir / f"sim_{name}.asc").exists():
            sims[name] = read_grid(cfg.output_dir / f"sim_{name}.asc")
    return sims


def evaluate(cfg: PipelineConfig) -> pd.DataFrame:
    out = cfg.output_dir
    sims = _simulations(cfg)
    if not any(n.startswith("v") for n in sims):
        raise DataError("no trained simulations found; run 'train' first")
    real = load_real(cfg)
    part = pd.read_csv(_require(out / "partition.csv", "train"))
    test_ids = part.loc[part["split"] == "test", "pixel_id"]
    obs_all = pd.DataFrame({"pixel_id": real["pixel_id"], "observed": real["target_wtd"]})
    test_obs = obs_all.loc[obs_all["pixel_id"].isin(test_ids)]
    interior = load_proxies(cfg)["interior"]
    eco = load_grid(cfg, cfg["ecoregions"]) if cfg.get("ecoregions") else None
    cv = {}
    for name in sims:
        p = out / f"cv_{name}.csv"
        if p.exists():
            cv[name] = pd.read_csv(p, float_precision="round_trip")
    report = evaluate_simulations(sims, test_obs, interior["pixel_id"], eco, obs_all, cv or None)
    names = list(sims)
    metrics = report.wide(names)
    paths = [_write_csv(metrics, out / "metrics.csv")]

    corr = pd.DataFrame(model_corr_matrix(list(sims.values())), columns=names)
    corr.insert(0, "model", names)
    paths.append(_write_csv(corr, out / "corr_matrix.csv"))

    table = load_features(cfg)
    rows = table.rows_for(test_obs["pixel_id"].to_numpy())
    ok = rows >= 0
    quart = []
    for name in names:
        if not name.startswith("v"):
            continue
        pred = sims[name].values.ravel()[test_obs["pixel_id"].to_numpy()[ok]]
        res = pred - test_obs["observed"].to_numpy()[ok]
        for attr in RESIDUAL_ATTRIBUTES:
            qs = residual_quartiles(res, table.data[attr].to_numpy()[rows[ok]])
            quart.append(qs.table.assign(model=name, attribute=attr))
    if quart:
        q = pd.concat(quart, ignore_index=True)
        q = q[["model", "attribute"] + [c for c in q.columns if c not in ("model", "attribute")]]
        paths.append(_write_csv(q, out / "residual_quartiles.csv"))

    sga = [sga_by_latitude(g).assign(model=n) for n, g in sims.items()]
    paths.append(_write_csv(pd.concat(sga, ignore_index=True), out / "sga_latitude.csv"))
    write_manifest(cfg, "evaluate", paths, {"test_real": len(test_obs), "interior": len(interior)})
    return metrics


def stress_test(cfg: PipelineConfig, variant=None, delta_t=None, precip_scale=None,
                tolerance=None) -> dict:
    s = cfg["stress"]
    scenario = Scenario(float(s["delta_t"] if delta_t is None else delta_t),
                        float(s["precip_scale"] if precip_scale is None else precip_scale),
                        bool(s.get("recompute_derived", True)))
    tol = float(s["tolerance"] if tolerance is None else tolerance)
    table = load_features(cfg)
    scen = apply_scenario(table, scenario)
    out = cfg.output_dir
    summary = {}
    for v in _variants(cfg, variant):
        model = load(_require(out / f"model_{v.value}.txt", f"train --variant {v.value}"))
        n, ids, pb, ps = count_violations(model, table, scen, tol)
        path = _write_csv(violation_report(table.pixel_ids, pb, ps, tol), out / f"stress_{v.value}.csv")
        summary[v.value] = n
        write_manifest(cfg, f"stress-test-{v.value}", [path], {"violations": n},
                       {"scenario": {"delta_t": scenario.delta_t,
                                     "precip_scale": scenario.precip_scale,
                                     "recompute_derived": scenario.recompute_derived,
                                     "tolerance": tol}})
        log.info("%s: %d monotonicity violations", v.value, n)
    return summary


def report(cfg: PipelineConfig) -> Path:
    """Plain-text summary of whatever the earlier stages produced."""
    out = cfg.output_dir
    lines = ["# WTD model report", ""]
    m = out / "metrics.csv"
    if m.exists():
        lines += ["## Accuracy", "", pd.read_csv(m).to_string(index=False, float_format="%.4f"), ""]
    imps = {}
    for v in ("v1", "v2", "v3"):
        p = out / f"importance_{v}.csv"
        if p.exists():
            imps[v] = pd.read_csv(p).set_index("feature")["importance"]
    if imps:
        imp = pd.DataFrame(imps).fillna(0.0)
        imp = imp.loc[imp.max(axis=1).sort_values(ascending=False).index]
        lines += ["## Gain importance", "", imp.to_string(float_format="%.4f"), ""]
    stress = []
    for v in ("v1", "v2", "v3"):
        p = out / f"manifest_stress-test-{v}.json"
        if p.exists():
            d = json.loads(p.read_text(encoding="utf-8"))
            stress.append(f"{v}: {d['row_counts']['violations']} violations under {d['scenario']}")
    if stress:
        lines += ["## Stress test", ""] + stress + [""]
    path = out / "report.md"
    path.write_text("\n".join(lines), encoding="utf-8")
    write_manifest(cfg, "report", [path], {})
    return path


def run_all(cfg: PipelineConfig) -> None:
    prepare_features(cfg)
    process_wells(cfg)
    build_proxies(cfg)
    train(cfg)
    if cfg.get("ecoregions"):
        cross_validate(cfg)
    evaluate(cfg)
    stress_test(cfg)
    report(cfg)
