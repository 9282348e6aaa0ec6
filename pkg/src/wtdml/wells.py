"""Raw well readings -> one unconfined static WTD observation per pixel.

Chain: sanity filter, aquifer classification, per-well minimum, per-pixel
(lower) median.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DataError, EmptySeries
from .grid import Grid

WELL_COLUMNS = ("well_id", "lon", "lat", "date", "wtd_m", "well_depth_m")

ARIDITY_SPLIT = 1.48
DRY_DEPTH_LIMIT = 241.0
WET_DEPTH_LIMIT = 19.0


class AquiferLabel(enum.Enum):
    CONFINED = "confined"
    UNCONFINED = "unconfined"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class WellConfig:
    max_plausible_depth: float = 1000.0
    aridity_split: float = ARIDITY_SPLIT
    dry_depth_limit: float = DRY_DEPTH_LIMIT
    wet_depth_limit: float = WET_DEPTH_LIMIT
    missing_depth: str = "drop"  # or "unconfined"


def read_wells(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"well_id": str, "date": str})
    missing = [c for c in WELL_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"{path}: well CSV lacks columns {missing}")
    return df.loc[:, list(WELL_COLUMNS)]


def sanity_filter(readings: pd.DataFrame, max_plausible_depth: float = 1000.0):
    """Drop negative, implausibly deep and unlocated readings.

    Returns the kept readings and a per-reason removal count.  Reasons are
    checked in the order coordinates, negative, implausible.
    """
    lon = readings["lon"].to_numpy(np.float64)
    lat = readings["lat"].to_numpy(np.float64)
    wtd = readings["wtd_m"].to_numpy(np.float64)
    no_coords = ~(np.isfinite(lon) & np.isfinite(lat))
    not_finite = ~np.isfinite(wtd) & ~no_coords
    negative = (wtd < 0) & ~no_coords
    deep = (wtd > max_plausible_depth) & ~no_coords & ~negative
    drop = no_coords | not_finite | negative | deep
    counts = {
        "missing_coordinates": int(no_coords.sum()),
        "non_finite": int(not_finite.sum()),
        "negative": int(negative.sum()),
        "implausible": int(deep.sum()),
    }
    return readings.loc[~drop].reset_index(drop=True), counts


def classify_aquifer(aridity: float, well_depth: float | None,
                     config: WellConfig = WellConfig()) -> AquiferLabel:
    if well_depth is None or not np.isfinite(well_depth):
        return AquiferLabel.UNKNOWN
    if aridity < 0 or well_depth <= 0:
        raise ValueError("aridity must be >= 0 and well depth > 0")
    limit = config.dry_depth_limit if aridity > config.aridity_split else config.wet_depth_limit
    return AquiferLabel.UNCONFINED if well_depth < limit else AquiferLabel.CONFINED


def classify_aquifer_array(aridity, well_depth, config: WellConfig = WellConfig()) -> np.ndarray:
    """Vectorised :func:`classify_aquifer`; returns label value strings."""
    ai = np.asarray(aridity, dtype=np.float64)
    depth = np.asarray(well_depth, dtype=np.float64)
    limit = np.where(ai > config.aridity_split, config.dry_depth_limit, config.wet_depth_limit)
    out = np.where(depth < limit, AquiferLabel.UNCONFINED.value, AquiferLabel.CONFINED.value)
    unknown = ~np.isfinite(depth) | ~np.isfinite(ai)
    return np.where(unknown, AquiferLabel.UNKNOWN.value, out).astype(object)


def representative_wtd(series) -> float:
    """Minimum reading of one well (least influenced by pumping)."""
    a = np.asarray(series, dtype=np.float64)
    if a.size == 0:
        raise EmptySeries("well has no readings")
    return float(a.min())


def pixel_aggregate(values) -> float:
    """Lower median, so the pixel value is always one of the observations."""
    a = np.sort(np.asarray(values, dtype=np.float64))
    if a.size == 0:
        raise EmptySeries("pixel has no wells")
    return float(a[(a.size - 1) // 2])


def process_wells(readings: pd.DataFrame, aridity: Grid, config: WellConfig = WellConfig()):
    """Full chain from raw readings to ``pixel_id, wtd_m, n_wells``.

    Returns the pixel table and a report dict of the counts dropped at each
    stage.
    """
    kept, report = sanity_filter(readings, config.max_plausible_depth)
    per_well = kept.groupby("well_id", sort=True).agg(
        lon=("lon", "first"),
        lat=("lat", "first"),
        wtd_m=("wtd_m", "min"),
        well_depth_m=("well_depth_m", "max"),
    )
    rows, cols = aridity.locate(per_well["lon"].to_numpy(), per_well["lat"].to_numpy())
    outside = rows < 0
    report["outside_grid"] = int(outside.sum())
    per_well = per_well.loc[~outside]
    rows, cols = rows[~outside], cols[~outside]
    ai = aridity.values[rows, cols]
    labels = classify_aquifer_array(ai, per_well["well_depth_m"].to_numpy(np.float64), config)
    tally = Counter(labels.tolist())
    report["confined"] = tally.get(AquiferLabel.CONFINED.value, 0)
    report["unknown"] = tally.get(AquiferLabel.UNKNOWN.value, 0)
    keep = labels == AquiferLabel.UNCONFINED.value
    if config.missing_depth == "unconfined":
        keep |= labels == AquiferLabel.UNKNOWN.value
    elif config.missing_depth != "drop":
        raise ValueError("missing_depth must be 'drop' or 'unconfined'")
    wells = pd.DataFrame({
        "pixel_id": rows[keep] * aridity.n_cols + cols[keep],
        "wtd_m": per_well["wtd_m"].to_numpy()[keep],
    })
    pixels = (
        wells.groupby("pixel_id", sort=True)["wtd_m"]
        .agg([pixel_aggregate, "size"])
        .reset_index()
        .rename(columns={"pixel_aggregate": "wtd_m", "size": "n_wells"})
    )
    report["wells_kept"] = int(keep.sum())
    report["pixels"] = len(pixels)
    return pixels, report
