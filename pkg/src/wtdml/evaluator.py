"""Accuracy metrics and descriptive analyses of WTD simulations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import EmptyInput, LengthMismatch
from .grid import Grid, require_same_frame

ECOREGION_CODES = (3, 5, 6, 7, 8, 9, 10, 11, 13, 15)
MODEL_COLUMNS = ("fan", "degraaf", "v1", "v2", "v3")


def _pair(predicted, reference):
    p = np.asarray(predicted, dtype=np.float64).ravel()
    r = np.asarray(reference, dtype=np.float64).ravel()
    if p.shape != r.shape:
        raise LengthMismatch(f"lengths differ: {p.size} vs {r.size}")
    if p.size == 0:
        raise EmptyInput("no values to compare")
    return p, r


def mae(predicted, reference) -> float:
    p, r = _pair(predicted, reference)
    return float(np.mean(np.abs(p - r)))


def mae_wb(predicted) -> float:
    """MAE against an expected water table at the surface (zero depth)."""
    p = np.asarray(predicted, dtype=np.float64)
    return mae(p, np.zeros_like(p))


def pearson(predicted, observed) -> float:
    """Sample Pearson correlation (two-pass); NaN when either input is constant."""
    p, o = _pair(predicted, observed)
    if p.size < 2:
        raise EmptyInput("correlation needs at least two pairs")
    dp = p - p.mean()
    do = o - o.mean()
    sp = np.sum(dp * dp)
    so = np.sum(do * do)
    if sp == 0 or so == 0:
        return float("nan")
    return float(np.clip(np.sum(dp * do) / np.sqrt(sp * so), -1.0, 1.0))


def model_corr_matrix(simulations) -> np.ndarray:
    """Pairwise Pearson over the cells valid in both grids of each pair."""
    sims = list(simulations)
    if len(sims) < 2:
        raise EmptyInput("need at least two simulations")
    require_same_frame(*sims)
    k = len(sims)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            a, b = sims[i].values.ravel(), sims[j].values.ravel()
            both = ~np.isnan(a) & ~np.isnan(b)
            out[i, j] = out[j, i] = pearson(a[both], b[both]) if both.sum() >= 2 else np.nan
    return out


@dataclass
class QuartileSummary:
    breakpoints: np.ndarray
    bins: list[np.ndarray]
    table: pd.DataFrame
    degenerate: bool


def residual_quartiles(residuals, attribute) -> QuartileSummary:
    """Bin residuals by attribute quartile: Q1 <= q25 < Q2 <= q50 < Q3 <= q75 < Q4."""
    res, att = _pair(residuals, attribute)
    q = np.quantile(att, [0.25, 0.5, 0.75])
    code = np.searchsorted(q, att, side="left")
    bins = [res[code == k] for k in range(4)]
    degenerate = sum(b.size > 0 for b in bins) < 4
    rows = []
    for k, b in enumerate(bins):
        if b.size:
            q1, med, q3 = np.quantile(b, [0.25, 0.5, 0.75])
        else:
            q1 = med = q3 = np.nan
        rows.append({"quartile": f"Q{k + 1}", "n": int(b.size), "median": float(med),
                     "q25": float(q1), "q75": float(q3), "iqr": float(q3 - q1)})
    return QuartileSummary(q, bins, pd.DataFrame(rows), degenerate)


def sga_by_latitude(sim: Grid, thresholds=(1.0, 5.0)) -> pd.DataFrame:
    """Shallow-groundwater area (km^2) per 1 degree band ``[k, k+1)``."""
    if any(t <= 0 for t in thresholds):
        raise ValueError("thresholds must be positive")
    lat = sim.lat_centers()
    band = np.floor(lat).astype(np.int64)
    area = sim.cell_area_km2()
    v = np.nan_to_num(sim.values, nan=np.inf)
    out = {"band_lower": np.unique(band)}
    for t in thresholds:
        per_row = np.where(v < t, area, 0.0).sum(axis=1)
        out[f"area_km2_wtd_lt_{t:g}"] = [per_row[band == b].sum() for b in out["band_lower"]]
    return pd.DataFrame(out).sort_values("band_lower", ascending=False, ignore_index=True)


# ---------------------------------------------------------------------------
# Report


@dataclass
class MetricsReport:
    """Long-form table: ``region, metric, model, value, n``."""

    rows: pd.DataFrame

    def wide(self, models=MODEL_COLUMNS) -> pd.DataFrame:
        """Pivot to the ``region,metric,<model>...`` layout."""
        if self.rows.empty:
            return pd.DataFrame(columns=["region", "metric", *models])
        w = self.rows.pivot_table(index=["region", "metric"], columns="model", values="value",
                                  aggfunc="first", sort=False)
        w = w.reindex(columns=list(models)).reset_index()
        w.columns.name = None
        return w


def score_model(model: str, region, obs_pred: np.ndarray | None, obs: np.ndarray | None,
                wb_pred: np.ndarray | None) -> list[dict]:
    rows = []
    if obs is not None and len(obs):
        rows.append(dict(region=region, metric="MAE-OBS", model=model, value=mae(obs_pred, obs), n=len(obs)))
        corr = pearson(obs_pred, obs) if len(obs) >= 2 else np.nan
        rows.append(dict(region=region, metric="Corr-OBS", model=model, value=corr, n=len(obs)))
    if wb_pred is not None and len(wb_pred):
        rows.append(dict(region=region, metric="MAE-WB", model=model, value=mae_wb(wb_pred), n=len(wb_pred)))
    return rows


def sample_grid(g: Grid, pixel_ids) -> np.ndarray:
    return g.values.ravel()[np.asarray(pixel_ids, dtype=np.int64)]


def evaluate_simulations(
    sims: dict[str, Grid],
    test_obs: pd.DataFrame,
    interior_ids,
    ecoregions: Grid | None = None,
    all_obs: pd.DataFrame | None = None,
    cv_predictions: dict[str, pd.DataFrame] | None = None,
) -> MetricsReport:
    """Overall and per-ecoregion MAE-OBS / Corr-OBS / MAE-WB.

    ML models (``v1``..``v3``) are scored on ``test_obs`` overall and on their
    out-of-fold predictions per region.  External grids (``fan``,
    ``degraaf``) are scored on ``all_obs`` everywhere, since they never saw
    the observations.  Observation frames hold ``pixel_id, observed``.
    """
    interior_ids = np.asarray(interior_ids, dtype=np.int64)
    all_obs = test_obs if all_obs is None else all_obs
    rows = []
    for name, g in sims.items():
        ml = name.startswith("v")
        obs = test_obs if ml else all_obs
        ids = obs["pixel_id"].to_numpy(np.int64)
        p = sample_grid(g, ids)
        ok = ~np.isnan(p)
        wb = sample_grid(g, interior_ids)
        rows += score_model(name, "all", p[ok], obs["observed"].to_numpy()[ok], wb[~np.isnan(wb)])
        if ecoregions is None:
            continue
        eco_wb = sample_grid(ecoregions, interior_ids)
        if ml and cv_predictions and name in cv_predictions:
            cv = cv_predictions[name]
            eco_obs = sample_grid(ecoregions, cv["pixel_id"])
            pred_obs, val_obs = cv["predicted"].to_numpy(), cv["observed"].to_numpy()
        else:
            ids_all = all_obs["pixel_id"].to_numpy(np.int64)
            eco_obs = sample_grid(ecoregions, ids_all)
            pred_obs = sample_grid(g, ids_all)
            val_obs = all_obs["observed"].to_numpy()
        for code in ECOREGION_CODES:
            sel = (eco_obs == code) & ~np.isnan(pred_obs)
            wsel = (eco_wb == code) & ~np.isnan(wb)
            rows += score_model(name, code, pred_obs[sel], val_obs[sel], wb[wsel])
    return MetricsReport(pd.DataFrame(rows, columns=["region", "metric", "model", "value", "n"]))
