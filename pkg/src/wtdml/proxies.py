"""Proxy WTD observations from surface-water occurrence and HAND.

Three sets are built:

* interior pixels of permanent water bodies (WOP > 95), WTD = 0, used for
  evaluation only;
* shoreline pixels, the peripheral ring of WOP > 75 components, WTD = 0,
  weight WOP/100, used for training;
* a random sample of steep-terrain pixels with HAND > 30 m, WTD = HAND,
  weight 0.75.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import ndimage

from .errors import DataError, EmptyEligibleSet
from .grid import Grid

INTERIOR_THRESHOLD = 95.0
SHORE_THRESHOLD = 75.0
HAND_THRESHOLD = 30.0
HAND_WEIGHT = 0.75
AREA_RANGE_HA = (30.0, 80000.0)

PROXY_COLUMNS = ("pixel_id", "target_wtd", "weight", "source")


def structure(connectivity: int) -> np.ndarray:
    if connectivity == 8:
        return np.ones((3, 3), dtype=bool)
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    raise ValueError("connectivity must be 4 or 8")


def label_components(mask: np.ndarray, connectivity: int = 8) -> tuple[np.ndarray, int]:
    labels, n = ndimage.label(mask, structure=structure(connectivity))
    return labels, n


def boundary_pixels(mask: np.ndarray, connectivity: int = 8) -> np.ndarray:
    """Mask pixels with at least one neighbour outside the mask.

    Components are maximal, so a neighbour outside a pixel's component is
    exactly a neighbour outside the mask.  Off-grid neighbours count as
    outside.
    """
    inner = ndimage.binary_erosion(mask, structure=structure(connectivity), border_value=0)
    return mask & ~inner


# ---------------------------------------------------------------------------
# Polygons


@dataclass(frozen=True)
class WaterBody:
    polygon_id: str
    area_ha: float
    ring: np.ndarray  # (k, 2) lon/lat, closed


@dataclass
class WaterBodyPolygonSet:
    polygons: list[WaterBody]

    def __len__(self):
        return len(self.polygons)

    @classmethod
    def from_rings(cls, items) -> "WaterBodyPolygonSet":
        out = []
        for pid, area, ring in items:
            ring = np.asarray(ring, dtype=np.float64)
            if len(ring) < 3:
                raise DataError(f"polygon {pid}: ring needs at least 3 vertices")
            if not np.array_equal(ring[0], ring[-1]):
                ring = np.vstack([ring, ring[:1]])
            if not area > 0:
                raise DataError(f"polygon {pid}: area must be positive")
            out.append(WaterBody(str(pid), float(area), ring))
        return cls(out)


def read_polygons(path) -> WaterBodyPolygonSet:
    """Parse ``polygon_id,area_ha,lon lat;lon lat;...`` lines."""
    items = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("polygon_id"):
            continue
        try:
            pid, area, coords = line.split(",", 2)
            ring = [tuple(map(float, pt.split())) for pt in coords.split(";") if pt.strip()]
            items.append((pid, float(area), ring))
        except ValueError as exc:
            raise DataError(f"{path}:{n}: malformed polygon line") from exc
    return WaterBodyPolygonSet.from_rings(items)


def write_polygons(polys: WaterBodyPolygonSet, path) -> None:
    lines = ["polygon_id,area_ha,ring"]
    for p in polys.polygons:
        coords = ";".join(f"{x!r} {y!r}" for x, y in p.ring.tolist())
        lines.append(f"{p.polygon_id},{p.area_ha!r},{coords}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def points_in_ring(x: np.ndarray, y: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Even-odd ray casting, vectorised over points."""
    inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    xs, ys = ring[:-1, 0], ring[:-1, 1]
    xe, ye = ring[1:, 0], ring[1:, 1]
    for x0, y0, x1, y1 in zip(xs, ys, xe, ye):
        if y0 == y1:
            continue
        crosses = (y0 > y) != (y1 > y)
        x_at = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < x_at)
    return inside


def polygon_masks(wop: Grid, polys: WaterBodyPolygonSet):
    """Yield ``(polygon, centre_inside, fully_inside)`` masks per polygon."""
    nr, nc = wop.shape
    cs = wop.cell_size
    for p in polys.polygons:
        lo_lon, lo_lat = p.ring.min(axis=0)
        hi_lon, hi_lat = p.ring.max(axis=0)
        c0 = max(0, int(np.floor((lo_lon - wop.origin_lon) / cs)))
        c1 = min(nc, int(np.ceil((hi_lon - wop.origin_lon) / cs)))
        r0 = max(0, int(np.floor((wop.origin_lat - hi_lat) / cs)))
        r1 = min(nr, int(np.ceil((wop.origin_lat - lo_lat) / cs)))
        centre = np.zeros((nr, nc), dtype=bool)
        full = np.zeros((nr, nc), dtype=bool)
        if r0 < r1 and c0 < c1:
            rows = np.arange(r0, r1)
            cols = np.arange(c0, c1)
            yc = wop.origin_lat - (rows + 0.5) * cs
            xc = wop.origin_lon + (cols + 0.5) * cs
            centre[r0:r1, c0:c1] = points_in_ring(xc[None, :], yc[:, None], p.ring)
            yk = wop.origin_lat - np.arange(r0, r1 + 1) * cs
            xk = wop.origin_lon + np.arange(c0, c1 + 1) * cs
            k = points_in_ring(xk[None, :], yk[:, None], p.ring)
            full[r0:r1, c0:c1] = k[:-1, :-1] & k[:-1, 1:] & k[1:, :-1] & k[1:, 1:]
        yield p, centre, full


# ---------------------------------------------------------------------------
# Delineation


def polygon_interior(
    wop: Grid,
    polys: WaterBodyPolygonSet,
    threshold: float = INTERIOR_THRESHOLD,
    area_range_ha: tuple[float, float] = AREA_RANGE_HA,
) -> tuple[np.ndarray, np.ndarray]:
    """Pixels above ``threshold`` fully inside an in-range polygon, plus the
    mask of pixel centres covered by any polygon."""
    wet = np.nan_to_num(wop.values, nan=-np.inf) > threshold
    lo, hi = area_range_ha
    selected = np.zeros(wop.shape, dtype=bool)
    covered = np.zeros(wop.shape, dtype=bool)
    for p, centre, full in polygon_masks(wop, polys):
        covered |= centre
        if lo <= p.area_ha <= hi:
            selected |= wet & full
    return selected, covered


def delineate_interior(
    wop: Grid,
    polys: WaterBodyPolygonSet,
    threshold: float = INTERIOR_THRESHOLD,
    area_range_ha: tuple[float, float] = AREA_RANGE_HA,
    connectivity: int = 8,
) -> np.ndarray:
    """Boolean mask of permanently wet interior pixels.

    Pixels above ``threshold`` lying fully inside an in-range polygon are
    selected.  Components above ``threshold`` that no polygon touches (by
    pixel centre) are kept whole when their own area is in range.
    """
    wet = np.nan_to_num(wop.values, nan=-np.inf) > threshold
    lo, hi = area_range_ha
    selected, covered = polygon_interior(wop, polys, threshold, area_range_ha)
    labels, n = label_components(wet, connectivity)
    if n:
        area_ha = wop.cell_area_km2() * 100.0
        comp_area = ndimage.sum_labels(area_ha, labels, index=np.arange(1, n + 1))
        touched = np.zeros(n + 1, dtype=bool)
        touched[np.unique(labels[covered & wet])] = True
        keep = np.zeros(n + 1, dtype=bool)
        keep[1:] = (~touched[1:]) & (comp_area >= lo) & (comp_area <= hi)
        selected |= keep[labels]
    return selected


def delineate_shoreline(
    wop: Grid,
    threshold: float = SHORE_THRESHOLD,
    connectivity: int = 8,
    exclude: np.ndarray | None = None,
) -> np.ndarray:
    """Boolean mask of the peripheral ring of every WOP > ``threshold`` component.

    ``exclude`` (normally the interior mask) is removed so the training and
    evaluation sets never share a pixel.
    """
    wet = np.nan_to_num(wop.values, nan=-np.inf) > threshold
    ring = boundary_pixels(wet, connectivity)
    if exclude is not None:
        ring &= ~exclude
    return ring


def mask_to_records(mask: np.ndarray, wop: Grid, source: str) -> pd.DataFrame:
    ids = wop.pixel_ids()[mask]
    if source == "SHORE":
        weight = wop.values[mask] / 100.0
    else:
        weight = np.ones(ids.size)
    return pd.DataFrame({
        "pixel_id": ids,
        "target_wtd": np.zeros(ids.size),
        "weight": weight,
        "source": source,
    })


def sample_hand(hand: Grid, fraction: float, seed: int,
                threshold: float = HAND_THRESHOLD, weight: float = HAND_WEIGHT) -> pd.DataFrame:
    """Uniform sample without replacement of ``round(fraction * N)`` eligible pixels."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    v = np.nan_to_num(hand.values, nan=-np.inf).ravel()
    eligible = np.flatnonzero(v > threshold)
    if eligible.size == 0:
        raise EmptyEligibleSet(f"no pixel has HAND > {threshold}")
    k = max(1, int(np.floor(fraction * eligible.size + 0.5)))
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(eligible, size=k, replace=False))
    return pd.DataFrame({
        "pixel_id": picked.astype(np.int64),
        "target_wtd": v[picked],
        "weight": np.full(k, weight),
        "source": "HAND",
    })


def build_proxies(wop: Grid, polys: WaterBodyPolygonSet, hand: Grid, *,
                  hand_fraction: float = 0.02, seed: int = 0,
                  interior_threshold: float = INTERIOR_THRESHOLD,
                  shore_threshold: float = SHORE_THRESHOLD,
                  area_range_ha=AREA_RANGE_HA, connectivity: int = 8,
                  hand_threshold: float = HAND_THRESHOLD, hand_weight: float = HAND_WEIGHT):
    """Return ``(interior, shoreline, hand)`` record frames."""
    interior = delineate_interior(wop, polys, interior_threshold, area_range_ha, connectivity)
    shore = delineate_shoreline(wop, shore_threshold, connectivity, exclude=interior)
    assert not (interior & shore).any(), "interior and shoreline sets overlap"
    return (
        mask_to_records(interior, wop, "INTERIOR"),
        mask_to_records(shore, wop, "SHORE"),
        sample_hand(hand, hand_fraction, seed, hand_threshold, hand_weight),
    )


def read_records(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"pixel_id": np.int64, "target_wtd": np.float64, "weight": np.float64,
                                  "source": str}, float_precision="round_trip")
    missing = [c for c in PROXY_COLUMNS if c not in df.columns]
    if missing:
        raise DataError(f"{path}: record CSV lacks columns {missing}")
    return df.loc[:, list(PROXY_COLUMNS)]


def write_records(df: pd.DataFrame, path) -> None:
    df.loc[:, list(PROXY_COLUMNS)].to_csv(path, index=False, float_format="%.17g")
