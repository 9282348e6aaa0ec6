"""Metamorphic stress testing under warmer / drier climate scenarios."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import MissingColumn, RowMismatch
from .features import FeatureTable
from .gbdt import BoostedEnsemble

CLIMATE_COLUMNS = ("temperature", "january_temperature", "precipitation",
                   "precipitation_excess", "aridity_index", "pet", "aet")


@dataclass(frozen=True)
class Scenario:
    delta_t: float = 4.0
    precip_scale: float = 0.8
    recompute_derived: bool = True

    def __post_init__(self):
        if not self.precip_scale > 0:
            raise ValueError("precip_scale must be positive")


def apply_scenario(features: FeatureTable, s: Scenario) -> FeatureTable:
    """Perturb climate columns; every other column is copied unchanged.

    With ``recompute_derived`` the aridity index and precipitation excess are
    recomputed from the scaled precipitation.  Snow fraction and rainfall
    intensity stay as they are: they need the daily series.
    """
    missing = [c for c in CLIMATE_COLUMNS if c not in features.data.columns]
    if missing:
        raise MissingColumn(f"feature table lacks {missing}")
    d = features.data.copy()
    d["temperature"] = d["temperature"] + s.delta_t
    d["january_temperature"] = d["january_temperature"] + s.delta_t
    p = d["precipitation"] * s.precip_scale
    d["precipitation"] = p
    if s.recompute_derived:
        with np.errstate(divide="ignore", invalid="ignore"):
            d["aridity_index"] = np.where(p > 0, d["pet"] / p, np.nan)
        d["precipitation_excess"] = p - d["aet"]
    return features.replace(d)


def count_violations(model: BoostedEnsemble, base: FeatureTable, scenario: FeatureTable,
                     tol: float = 1e-9, features=None):
    """Rows whose scenario prediction is shallower than baseline by more than ``tol``.

    Returns ``(count, pixel_ids, base_pred, scenario_pred)``.
    """
    if len(base) != len(scenario) or not np.array_equal(base.pixel_ids, scenario.pixel_ids):
        raise RowMismatch("base and scenario tables are not row-aligned")
    cols = list(features or model.feature_names)
    pb = model.predict(base.matrix(cols))
    ps = model.predict(scenario.matrix(cols))
    bad = ps < pb - tol
    return int(bad.sum()), base.pixel_ids[bad], pb, ps


def violation_report(pixel_ids, base_pred, scen_pred, tol: float = 1e-9) -> pd.DataFrame:
    bad = scen_pred < base_pred - tol
    return pd.DataFrame({
        "pixel_id": np.asarray(pixel_ids)[bad],
        "base_wtd": base_pred[bad],
        "scenario_wtd": scen_pred[bad],
        "shallower_by": (base_pred - scen_pred)[bad],
    })
