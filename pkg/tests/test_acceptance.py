"""Acceptance gate: one PASS/FAIL line per criterion, shown in the terminal summary."""

import filecmp
import math
import time

import numpy as np
import pandas as pd
import yaml

from oracles import aquifer_oracle, brute_boundary, brute_split, cell_area_oracle, mae_oracle, \
    pearson_oracle
from test_gbdt import integer_instance, run_split
from test_proxies import interior_oracle, random_case
from test_wells import FIXTURE
from wtdml import pipeline
from wtdml.config import PipelineConfig
from wtdml.evaluator import mae, model_corr_matrix, pearson, sga_by_latitude
from wtdml.features import MODEL_FEATURES, DEFAULT_DIRECTIONS
from wtdml.gbdt import TrainConfig, TrainMatrix, fit, gain_importance
from wtdml.grid import Grid, read_ascii
from wtdml.proxies import delineate_interior, delineate_shoreline
from wtdml.stress import Scenario, apply_scenario, count_violations
from wtdml.toy import make_toy_continent
from wtdml.wells import classify_aquifer_array

LINES = []


def record(n, ok, detail):
    LINES.append(f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


# --- 1 ---------------------------------------------------------------------


def test_1_monotonicity_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    names = tuple(DEFAULT_DIRECTIONS) + ("temperature", "elevation")
    n = 10_000
    X = rng.normal(size=(n, len(names)))
    # target deliberately non-monotone in several constrained columns
    y = (np.sin(2 * X[:, 0]) - X[:, 3] ** 2 + X[:, 7] * X[:, 8] + np.cos(3 * X[:, 9])
         + rng.normal(0, 0.3, n))
    X[rng.random(X.shape) < 0.01] = np.nan
    model = fit(TrainMatrix(X, y, np.ones(n), names),
                TrainConfig(rounds=60, max_depth=6, learning_rate=0.2, subsample=0.8,
                            colsample=0.8, seed=5),
                DEFAULT_DIRECTIONS)
    violations = 0
    for j, name in enumerate(names[:len(DEFAULT_DIRECTIONS)]):
        d = DEFAULT_DIRECTIONS[name]
        rows = X[rng.integers(0, n, 10_000)].copy()
        rows[:, j] = rng.normal(size=10_000)
        moved = rows.copy()
        moved[:, j] += rng.exponential(1.0, 10_000)
        diff = model.predict(moved) - model.predict(rows)
        violations += int((d * diff < 0).sum())
    dt = time.perf_counter() - t0
    record(1, violations == 0 and dt < 60,
           f"{len(DEFAULT_DIRECTIONS)} constrained pairs x 10^4 probes, {violations} violations, "
           f"{dt:.1f}s (< 60s)")


# --- 2 ---------------------------------------------------------------------


def test_2_split_oracle_equivalence():
    t0 = time.perf_counter()
    mismatches = 0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        n, f = int(rng.integers(2, 201)), int(rng.integers(1, 4))
        X, g, h = integer_instance(rng, n, f)
        for dirs in ([0] * f, [int(v) for v in rng.choice([-1, 1], size=f)]):
            if run_split(X, g, h, dirs) != brute_split(X, g, h, dirs, 1.0, 1.0):
                mismatches += 1
    dt = time.perf_counter() - t0
    record(2, mismatches == 0 and dt < 30,
           f"50 instances x (unconstrained, constrained), {mismatches} mismatches, {dt:.1f}s (< 30s)")


# --- 3 ---------------------------------------------------------------------


def test_3_stress_theorem(tmp_path):
    make_toy_continent(seed=0, size=256).write(tmp_path)
    raw = yaml.safe_load((tmp_path / "config.yaml").read_text())
    # temperature columns are unconstrained, so the constrained model leaves them out
    raw["features"] = [f for f in MODEL_FEATURES
                       if f not in ("temperature", "january_temperature")]
    raw["variants"] = ["v1"]
    (tmp_path / "c.yaml").write_text(yaml.safe_dump(raw, sort_keys=False))
    cfg = PipelineConfig.load(tmp_path / "c.yaml", environ={"WTD_SEARCH__N_ITERATIONS": "3"})
    pipeline.prepare_features(cfg)
    pipeline.process_wells(cfg)
    pipeline.train(cfg, "v1")
    constrained = pipeline.stress_test(cfg, "v1")["v1"]

    # adversarial set: depth falls as aridity rises, model left unconstrained
    rng = np.random.default_rng(7)
    table = pipeline.load_features(cfg)
    cols = ("aridity_index", "precipitation", "precipitation_excess")
    X = table.matrix(cols)
    y = 40.0 - 15.0 * X[:, 0] + rng.normal(0, 0.5, len(X))
    loose = fit(TrainMatrix(X, y, np.ones(len(X)), cols), TrainConfig(rounds=40, max_depth=4))
    adversarial, _, _, _ = count_violations(loose, table, apply_scenario(table, Scenario()))
    record(3, constrained == 0 and adversarial >= 1,
           f"constrained (+4C, -20% P, derived recomputed): {constrained} violations; "
           f"unconstrained adversarial: {adversarial} violations")


# --- 4 ---------------------------------------------------------------------


def test_4_aquifer_rule():
    ai = np.unique(np.concatenate([np.linspace(0, 4, 101),
                                   [1.48, np.nextafter(1.48, 0), np.nextafter(1.48, 9)]]))
    depth = np.unique(np.concatenate([np.linspace(0.5, 500, 101),
                                      [19.0, 241.0, np.nextafter(19, 0), np.nextafter(19, 99),
                                       np.nextafter(241, 0), np.nextafter(241, 999)]]))
    A, D = np.meshgrid(ai, depth, indexing="ij")
    got = classify_aquifer_array(A.ravel(), D.ravel())
    sweep_bad = sum(g != aquifer_oracle(a, d) for g, a, d in zip(got, A.ravel(), D.ravel()))
    df = pd.read_csv(FIXTURE)
    agree = classify_aquifer_array(df["aridity_index"], df["well_depth_m"]) == df["label"].to_numpy()
    cons = df["rule_consistent"].to_numpy() == 1
    acc = agree[cons].mean()
    record(4, A.size >= 10_000 and sweep_bad == 0 and acc == 1.0,
           f"sweep {A.size} points, {sweep_bad} mismatches; fixture rule-consistent accuracy "
           f"{acc:.3f} ({cons.sum()} rows), flipped rows agree {agree[~cons].mean():.3f}")


# --- 5 ---------------------------------------------------------------------


def test_5_proxy_geometry():
    bad, overlap, sizes = 0, 0, []
    for seed in range(20):
        wop, polys = random_case(100 + seed)
        interior = delineate_interior(wop, polys)
        shore = delineate_shoreline(wop, exclude=interior)
        wet = np.nan_to_num(wop.values, nan=-1) > 75
        bad += not np.array_equal(interior, interior_oracle(wop, polys))
        bad += not np.array_equal(shore, brute_boundary(wet, 8) & ~interior)
        overlap += int((interior & shore).sum())
        sizes.append((int(interior.sum()), int(shore.sum())))
    nontrivial = sum(i > 0 for i, _ in sizes)
    record(5, bad == 0 and overlap == 0,
           f"20 grids 64x64, {bad} oracle mismatches, {overlap} overlapping pixels, "
           f"{nontrivial} grids with non-empty interior")


# --- 6 ---------------------------------------------------------------------


def test_6_synthetic_end_to_end(tmp_path):
    t0 = time.perf_counter()
    d = tmp_path / "toy"
    make_toy_continent(seed=0, size=256).write(d)
    cfg = PipelineConfig.load(d / "config.yaml", environ={})
    pipeline.prepare_features(cfg)
    pipeline.process_wells(cfg)
    interior, _, _ = pipeline.build_proxies(cfg)
    pipeline.train(cfg)
    out = cfg.output_dir
    ids = interior["pixel_id"].to_numpy()
    r2, wb = {}, {}
    for v in ("v1", "v2", "v3"):
        tp = pd.read_csv(out / f"test_predictions_{v}.csv")
        r2[v] = 1 - ((tp.observed - tp.predicted) ** 2).sum() / \
            ((tp.observed - tp.observed.mean()) ** 2).sum()
        wb[v] = mae(read_ascii(out / f"sim_{v}.asc").values.ravel()[ids], np.zeros(ids.size))
    dt = time.perf_counter() - t0
    ok = r2["v1"] >= 0.8 and wb["v2"] <= 0.5 * wb["v1"] and wb["v3"] <= 0.5 * wb["v1"] and dt < 300
    record(6, ok,
           f"V1 holdout R2 {r2['v1']:.3f} (>= 0.8); MAE-WB V1 {wb['v1']:.3f}, V2 {wb['v2']:.3f}, "
           f"V3 {wb['v3']:.3f} (<= 50% of V1); V2/V3 holdout R2 {r2['v2']:.3f}/{r2['v3']:.3f}; "
           f"{dt:.0f}s (< 300s)")


# --- 7 ---------------------------------------------------------------------


def test_7_metrics_fidelity():
    worst = 0.0

    def rel(a, b):
        return abs(a - b) / max(abs(b), 1e-300)

    for seed in range(25):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 3000))
        p, o = rng.normal(20, 8, n), rng.gamma(2.0, 6.0, n)
        worst = max(worst, rel(mae(p, o), mae_oracle(p, o)), rel(pearson(p, o), pearson_oracle(p, o)))
        a, b = rng.normal(size=(9, 11)), rng.normal(size=(9, 11))
        m = model_corr_matrix([Grid(0, 1, 0.1, a), Grid(0, 1, 0.1, b)])
        worst = max(worst, rel(m[0, 1], pearson_oracle(a.ravel(), b.ravel())))
        v = rng.gamma(1.0, 3.0, (12, 5))
        sga = sga_by_latitude(Grid(-90, 47.0, 0.5, v)).set_index("band_lower")
        for band in sga.index:
            want = math.fsum(cell_area_oracle(47.0 - (r + 0.5) * 0.5, 0.5)
                             for r in range(12) for c in range(5)
                             if math.floor(47.0 - (r + 0.5) * 0.5) == band and v[r, c] < 1.0)
            if want:
                worst = max(worst, rel(sga.loc[band, "area_km2_wtd_lt_1"], want))
    rng = np.random.default_rng(3)
    X = rng.normal(size=(500, 4))
    e = fit(TrainMatrix(X, X[:, 0] + X[:, 1] ** 2, np.ones(500), ("a", "b", "c", "d")),
            TrainConfig(rounds=30, max_depth=4))
    s = sum(gain_importance(e).values())
    record(7, worst <= 1e-12 and abs(s - 1) <= 1e-9,
           f"worst relative error vs two-pass oracles {worst:.2e} (<= 1e-12); "
           f"importance sum {s:.15f}")


# --- 8 ---------------------------------------------------------------------


FAST = {"WTD_SEARCH__N_ITERATIONS": "3", "WTD_SEARCH__ROUNDS": "[20, 60]",
        "WTD_CV__K": "5", "WTD_CV__ROUNDS": "30"}


def test_8_determinism(tmp_path):
    outs = []
    for run in ("a", "b"):
        d = tmp_path / run
        make_toy_continent(seed=11, size=96, n_wells=900, n_lakes=12).write(d)
        pipeline.run_all(PipelineConfig.load(d / "config.yaml", environ=FAST))
        outs.append(d / "out")
    names = sorted(p.name for p in outs[0].iterdir()
                   if p.name.startswith(("model_", "manifest_")))
    _, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], names, shallow=False)
    models = sum(n.startswith("model_") for n in names)
    record(8, models == 3 and not mismatch and not errors,
           f"{len(names)} model/manifest files compared byte for byte, "
           f"{len(mismatch) + len(errors)} differ")
