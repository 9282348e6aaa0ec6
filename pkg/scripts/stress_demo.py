"""Warmer/drier scenario on a toy continent: constrained vs unconstrained models.

    python scripts/stress_demo.py [--size 128] [--delta-t 4] [--precip-scale 0.8]

Fits three models on the well pixels of a fresh toy continent and counts
pixels whose predicted water table rises (gets shallower) under the scenario:

  unconstrained, all features
  constrained, all features (temperature columns stay free)
  constrained, temperature columns removed
"""

import argparse

import numpy as np

from wtdml.features import MODEL_FEATURES, DEFAULT_DIRECTIONS, assemble_features, compute_aridity
from wtdml.gbdt import TrainConfig, TrainMatrix, fit
from wtdml.stress import Scenario, apply_scenario, count_violations
from wtdml.toy import make_toy_continent
from wtdml.wells import process_wells


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--delta-t", type=float, default=4.0)
    ap.add_argument("--precip-scale", type=float, default=0.8)
    args = ap.parse_args()

    toy = make_toy_continent(args.seed, args.size, n_wells=args.size * 12)
    table = assemble_features(toy.layers)
    pixels, _ = process_wells(toy.wells, compute_aridity(toy.layers["pet"],
                                                         toy.layers["precipitation"]))
    rows = table.rows_for(pixels["pixel_id"])
    keep = rows >= 0
    scen = apply_scenario(table, Scenario(args.delta_t, args.precip_scale))
    cfg = TrainConfig(rounds=150, max_depth=5, learning_rate=0.1, seed=args.seed)
    no_temp = tuple(f for f in MODEL_FEATURES if f not in ("temperature", "january_temperature"))

    for label, feats, dirs in (("unconstrained, all features", MODEL_FEATURES, None),
                               ("constrained, all features", MODEL_FEATURES, DEFAULT_DIRECTIONS),
                               ("constrained, no temperature", no_temp, DEFAULT_DIRECTIONS)):
        X = table.matrix(feats)[rows[keep]]
        y = pixels["wtd_m"].to_numpy()[keep]
        model = fit(TrainMatrix(X, y, np.ones(len(y)), feats), cfg, dirs)
        n, _, base, new = count_violations(model, table, scen)
        print(f"{label:32s} {n:7d} of {len(table)} pixels shallower "
              f"(mean change {np.mean(new - base):+.3f} m)")


if __name__ == "__main__":
    main()
