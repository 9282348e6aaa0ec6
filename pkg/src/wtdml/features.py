"""Derived climate predictors, land-cover reclassification and the feature table."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import pandas as pd

from .errors import (
    AlignmentError,
    MissingMandatoryLayer,
    UnknownClassCode,
    ZeroPrecipitation,
)
from .grid import Grid, compute_slope, require_same_frame

# MODIS IGBP 17-class scheme -> 7 classes.
LANDCOVER_CLASSES = ("forest", "shrubland", "grassland", "cropland", "urban", "wetland", "barren")
LANDCOVER_MERGE = {
    1: 1, 2: 1, 3: 1, 4: 1, 5: 1,  # evergreen/deciduous needle/broadleaf, mixed
    6: 2, 7: 2,                    # closed / open shrublands
    8: 3, 9: 3, 10: 3,             # woody savannas, savannas, grasslands
    12: 4, 14: 4,                  # croplands, cropland/natural mosaic
    13: 5,                         # urban and built-up
    11: 6,                         # permanent wetlands
    15: 7, 16: 7, 17: 7,           # snow/ice, barren, water
}

NUMERIC_FEATURES = (
    "precipitation",
    "temperature",
    "january_temperature",
    "rainfall_intensity",
    "max_swe",
    "snow_fraction",
    "aridity_index",
    "precipitation_excess",
    "pet",
    "aet",
    "elevation",
    "slope",
    "topographic_index",
    "sand_shallow",
    "silt_shallow",
    "clay_shallow",
    "sand_deep",
    "silt_deep",
    "clay_deep",
    "depth_to_bedrock",
)
LANDCOVER_COLUMNS = tuple(f"lc_{name}" for name in LANDCOVER_CLASSES)
MODEL_FEATURES = NUMERIC_FEATURES + LANDCOVER_COLUMNS
TABLE_COLUMNS = ("pixel_id", "latitude") + MODEL_FEATURES

# Layers that must be supplied as grids; the rest can be derived.
MANDATORY_LAYERS = (
    "precipitation",
    "temperature",
    "january_temperature",
    "rainfall_intensity",
    "max_swe",
    "snow_fraction",
    "pet",
    "aet",
    "elevation",
    "topographic_index",
    "sand_shallow",
    "silt_shallow",
    "clay_shallow",
    "sand_deep",
    "silt_deep",
    "clay_deep",
    "depth_to_bedrock",
    "land_cover",
)

# Physically motivated monotone directions: +1 deeper water table as the
# feature grows, -1 shallower.
DEFAULT_DIRECTIONS = {
    "aridity_index": 1,
    "sand_shallow": 1,
    "sand_deep": 1,
    "precipitation": -1,
    "precipitation_excess": -1,
    "clay_shallow": -1,
    "clay_deep": -1,
    "topographic_index": -1,
}


@dataclass(frozen=True)
class DailyClimateSeries:
    dates: np.ndarray
    precipitation: np.ndarray
    temperature: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.precipitation, dtype=np.float64)
        t = np.asarray(self.temperature, dtype=np.float64)
        if not (len(p) == len(t) == len(self.dates)):
            raise ValueError("dates, precipitation and temperature differ in length")
        if (p < 0).any():
            raise ValueError("precipitation must be non-negative")
        object.__setattr__(self, "precipitation", p)
        object.__setattr__(self, "temperature", t)


def compute_aridity(pet: Grid, p: Grid) -> Grid:
    require_same_frame(pet, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        ai = np.where(p.values > 0, pet.values / p.values, np.nan)
    return p.with_values(ai)


def compute_precip_excess(p: Grid, aet: Grid) -> Grid:
    require_same_frame(p, aet)
    return p.with_values(p.values - aet.values)


def compute_snow_fraction(s: DailyClimateSeries) -> float:
    total = float(np.sum(s.precipitation))
    if not total > 0:
        raise ZeroPrecipitation("snow fraction undefined without precipitation")
    # T == 0 counts as rain: only strictly sub-zero days are snowfall.
    # subset sums can round past the total by an ulp
    return min(1.0, float(np.sum(s.precipitation[s.temperature < 0])) / total)


def compute_rainfall_intensity(s: DailyClimateSeries) -> float:
    wet = s.precipitation[s.precipitation > 1.0]
    if wet.size == 0:
        return float("nan")
    return float(np.mean(wet))


def snow_fraction_stack(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Cellwise snow fraction for daily stacks shaped ``(days, rows, cols)``."""
    total = p.sum(axis=0)
    snow = np.where(t < 0, p, 0.0).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(total > 0, np.minimum(snow / total, 1.0), np.nan)


def rainfall_intensity_stack(p: np.ndarray) -> np.ndarray:
    wet = p > 1.0
    n = wet.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(n > 0, np.where(wet, p, 0.0).sum(axis=0) / n, np.nan)


def max_swe(monthly_swe: np.ndarray) -> np.ndarray:
    """Mean over years of the within-year maximum SWE.

    ``monthly_swe`` is shaped ``(years, 12, rows, cols)`` or ``(years * 12, rows, cols)``.
    """
    a = np.asarray(monthly_swe, dtype=np.float64)
    if a.ndim == 3:
        if a.shape[0] % 12:
            raise ValueError("monthly series length must be a multiple of 12")
        a = a.reshape(a.shape[0] // 12, 12, *a.shape[1:])
    return a.max(axis=1).mean(axis=0)


def reclass_landcover(lc17: Grid) -> Grid:
    v = lc17.values
    ok = ~np.isnan(v)
    codes = v[ok]
    known = np.isin(codes, list(LANDCOVER_MERGE))
    if not known.all():
        bad = sorted(set(codes[~known].tolist()))
        raise UnknownClassCode(f"unknown land-cover codes {bad[:10]}")
    lut = np.zeros(max(LANDCOVER_MERGE) + 1)
    for src, dst in LANDCOVER_MERGE.items():
        lut[src] = dst
    out = np.full(v.shape, np.nan)
    out[ok] = lut[codes.astype(np.int64)]
    return lc17.with_values(out)


@dataclass
class FeatureTable:
    """Row-per-pixel predictor matrix.

    ``data`` holds :data:`TABLE_COLUMNS` in that order; ``dropped`` counts
    cells removed for nodata in a mandatory layer.
    """

    data: pd.DataFrame
    dropped: int = 0
    grid_shape: tuple[int, int] | None = None

    def __post_init__(self):
        missing = [c for c in TABLE_COLUMNS if c not in self.data.columns]
        if missing:
            raise MissingMandatoryLayer(f"feature table lacks columns {missing}")
        self.data = self.data.loc[:, list(TABLE_COLUMNS)].reset_index(drop=True)

    def __len__(self) -> int:
        return len(self.data)

    @property
    def pixel_ids(self) -> np.ndarray:
        return self.data["pixel_id"].to_numpy(np.int64)

    def matrix(self, columns=MODEL_FEATURES) -> np.ndarray:
        return self.data.loc[:, list(columns)].to_numpy(np.float64)

    def rows_for(self, pixel_ids) -> np.ndarray:
        """Row positions for ``pixel_ids``; -1 where absent."""
        index = pd.Index(self.pixel_ids)
        return index.get_indexer(np.asarray(pixel_ids, dtype=np.int64))

    def to_csv(self, path) -> None:
        self.data.to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path) -> "FeatureTable":
        dtypes = {c: np.float64 for c in TABLE_COLUMNS}
        dtypes["pixel_id"] = np.int64
        return cls(pd.read_csv(path, dtype=dtypes, float_precision="round_trip"))

    def replace(self, data: pd.DataFrame) -> "FeatureTable":
        return FeatureTable(data, self.dropped, self.grid_shape)


def assemble_features(grids: Mapping[str, Grid]) -> FeatureTable:
    """Stack aligned layers into a :class:`FeatureTable`.

    Aridity, precipitation excess and slope are derived when not given.
    ``land_cover`` may hold either 17-class or already merged 7-class codes
    (``land_cover_7`` key).
    """
    grids = dict(grids)
    have_lc7 = "land_cover_7" in grids
    required = [k for k in MANDATORY_LAYERS if not (k == "land_cover" and have_lc7)]
    missing = [k for k in required if k not in grids]
    if missing:
        raise MissingMandatoryLayer(f"missing layers: {', '.join(missing)}")
    ref = grids["elevation"]
    for name, g in grids.items():
        if not ref.same_frame(g):
            raise AlignmentError(f"layer {name!r} is not aligned to the reference frame")

    if "aridity_index" not in grids:
        grids["aridity_index"] = compute_aridity(grids["pet"], grids["precipitation"])
    if "precipitation_excess" not in grids:
        grids["precipitation_excess"] = compute_precip_excess(grids["precipitation"], grids["aet"])
    if "slope" not in grids:
        grids["slope"] = compute_slope(grids["elevation"])
    lc7 = grids["land_cover_7"] if have_lc7 else reclass_landcover(grids["land_cover"])

    stack = [grids[name].values for name in NUMERIC_FEATURES] + [lc7.values]
    valid = np.logical_and.reduce([~np.isnan(a) for a in stack])
    n_valid = int(valid.sum())
    columns = {
        "pixel_id": ref.pixel_ids()[valid],
        "latitude": np.broadcast_to(ref.lat_centers()[:, None], ref.shape)[valid],
    }
    for name in NUMERIC_FEATURES:
        columns[name] = grids[name].values[valid]
    classes = lc7.values[valid].astype(np.int64)
    for k, col in enumerate(LANDCOVER_COLUMNS, start=1):
        columns[col] = (classes == k).astype(np.float64)
    table = FeatureTable(pd.DataFrame(columns), dropped=int(ref.values.size - n_valid),
                         grid_shape=ref.shape)
    if n_valid == 0:
        raise MissingMandatoryLayer("no cell is valid in every mandatory layer")
    return table


def table_to_grid(table: FeatureTable, values: np.ndarray, template: Grid) -> Grid:
    """Scatter per-row ``values`` back into a grid shaped like ``template``."""
    out = np.full(template.values.size, np.nan)
    out[table.pixel_ids] = values
    return template.with_values(out.reshape(template.shape))
