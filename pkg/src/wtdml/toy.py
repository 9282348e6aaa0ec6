"""Synthetic "toy continent" with a known water table.

The true WTD is a monotone function of aridity (+), topographic index (-),
sand (+) and clay (-), and is zero on water bodies.  Lakes sit in lowlands
and carry elevated topographic index, wells avoid their surroundings, and
the mountain belt in the west carries large HAND, so the three model
variants have the same qualitative roles as on real data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from scipy import ndimage

from .evaluator import ECOREGION_CODES
from .grid import Grid, write_ascii
from .proxies import WaterBodyPolygonSet, write_polygons

ORIGIN_LON = -100.0
ORIGIN_LAT = 55.0
CELL_SIZE = 0.02

LAYER_FILES = {
    "precipitation": "precipitation.asc",
    "temperature": "temperature.asc",
    "january_temperature": "january_temperature.asc",
    "rainfall_intensity": "rainfall_intensity.asc",
    "max_swe": "max_swe.asc",
    "snow_fraction": "snow_fraction.asc",
    "pet": "pet.asc",
    "aet": "aet.asc",
    "elevation": "elevation.asc",
    "topographic_index": "topographic_index.asc",
    "sand_shallow": "sand_shallow.asc",
    "silt_shallow": "silt_shallow.asc",
    "clay_shallow": "clay_shallow.asc",
    "sand_deep": "sand_deep.asc",
    "silt_deep": "silt_deep.asc",
    "clay_deep": "clay_deep.asc",
    "depth_to_bedrock": "depth_to_bedrock.asc",
    "land_cover": "land_cover.asc",
}


def true_wtd(aridity, ti, sand_shallow, sand_deep, clay_shallow, clay_deep):
    """Ground-truth land WTD (m); increasing in aridity and sand, decreasing in TI and clay."""
    sand = 0.5 * (sand_shallow + sand_deep)
    clay = 0.5 * (clay_shallow + clay_deep)
    raw = (
        3.0
        + 10.0 * np.log1p(np.maximum(aridity - 0.3, 0.0) * 2.0)
        + 0.12 * (sand - 35.0)
        - 0.10 * (clay - 20.0)
        - 1.2 * (ti - 8.0)
        + 8.0 * np.maximum(5.0 - ti, 0.0)
    )
    return np.maximum(raw, 0.5)


def _smooth(rng, shape, sigma):
    f = ndimage.gaussian_filter(rng.normal(size=shape), sigma, mode="reflect")
    f -= f.min()
    return f / max(f.max(), 1e-12)


@dataclass
class ToyContinent:
    layers: dict[str, Grid]
    truth: Grid
    wop: Grid
    hand: Grid
    focus: Grid
    ecoregions: Grid
    fan: Grid
    degraaf: Grid
    polygons: WaterBodyPolygonSet
    wells: pd.DataFrame
    seed: int
    lake_mask: np.ndarray = field(repr=False, default=None)

    def write(self, outdir) -> Path:
        """Write every input file plus a ready-to-run ``config.yaml``."""
        out = Path(outdir)
        (out / "grids").mkdir(parents=True, exist_ok=True)
        for name, fname in LAYER_FILES.items():
            write_ascii(self.layers[name], out / "grids" / fname)
        extras = {"wop": self.wop, "hand": self.hand, "focus": self.focus,
                  "ecoregions": self.ecoregions, "fan": self.fan, "degraaf": self.degraaf,
                  "truth": self.truth}
        for name, g in extras.items():
            write_ascii(g, out / "grids" / f"{name}.asc")
        write_polygons(self.polygons, out / "polygons.txt")
        self.wells.to_csv(out / "wells.csv", index=False, float_format="%.17g")
        config = toy_config(self.seed)
        (out / "config.yaml").write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
        return out / "config.yaml"


def toy_config(seed: int) -> dict:
    return {
        "seed": seed,
        "output_dir": "out",
        "layers": {k: f"grids/{v}" for k, v in LAYER_FILES.items()},
        "wells": "wells.csv",
        "wop": "grids/wop.asc",
        "polygons": "polygons.txt",
        "hand": "grids/hand.asc",
        "focus_mask": "grids/focus.asc",
        "ecoregions": "grids/ecoregions.asc",
        "comparison": {"fan": "grids/fan.asc", "degraaf": "grids/degraaf.asc"},
        "search": {"n_iterations": 6, "rounds": [60, 160], "max_depth": [3, 6],
                   "learning_rate": [0.05, 0.3], "l2_lambda": [0.3, 3.0],
                   "subsample": [0.7, 1.0], "colsample": [0.7, 1.0]},
        "cv": {"k": 10, "rounds": 80, "max_depth": 4, "learning_rate": 0.15},
    }


def make_toy_continent(seed: int = 0, size: int = 256, n_wells: int = 4000,
                       n_lakes: int = 45) -> ToyContinent:
    rng = np.random.default_rng(seed)
    shape = (size, size)
    rr, cc = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    x = cc / (size - 1)
    y = rr / (size - 1)  # 0 = north

    def grid(values):
        return Grid(ORIGIN_LON, ORIGIN_LAT, CELL_SIZE, values)

    s = [_smooth(rng, shape, size / 12) for _ in range(8)]
    ridge = np.exp(-(((x - 0.12) / 0.07) ** 2)) * (0.6 + 0.4 * s[0])
    elevation = 150.0 + 500.0 * s[1] + 2200.0 * ridge + 8.0 * _smooth(rng, shape, 1.5)
    low = ndimage.minimum_filter(ndimage.gaussian_filter(elevation, 2), size=21)
    hand = 25.0 * np.log1p(np.maximum(0.0, elevation - low) / 40.0)

    temperature = -4.0 + 10.0 * y + 4.0 * s[2] - 0.0065 * (elevation - 150.0)
    january = temperature - 20.0 + 6.0 * y
    precipitation = 300.0 + 900.0 * x + 250.0 * s[3] + 0.25 * (elevation - 150.0)
    pet = np.maximum(150.0, 520.0 + 30.0 * temperature + 150.0 * s[4])
    aet = np.minimum(0.9 * precipitation, 0.85 * pet)
    aridity = pet / precipitation
    snow_fraction = np.clip(0.45 - temperature / 18.0, 0.0, 1.0)
    rainfall_intensity = 2.0 + precipitation / 250.0 + 0.5 * s[5]
    max_swe = 400.0 * snow_fraction * precipitation / 1000.0

    sand_sh = 15.0 + 55.0 * s[6]
    clay_sh = 5.0 + 0.6 * (85.0 - sand_sh) * s[7]
    silt_sh = 100.0 - sand_sh - clay_sh
    sd, cd = _smooth(rng, shape, size / 10), _smooth(rng, shape, size / 10)
    sand_dp = np.clip(0.6 * sand_sh + 25.0 * sd, 5.0, 80.0)
    clay_dp = 5.0 + 0.6 * (90.0 - sand_dp) * cd
    silt_dp = 100.0 - sand_dp - clay_dp
    bedrock = 50.0 + 3000.0 * _smooth(rng, shape, size / 8) * (1.0 - 0.7 * ridge)

    # Lakes: discs in the lowlands, at least 12 cells apart.
    lowland = (ridge < 0.05) & (hand < 15)
    centres, radii = [], []
    candidates = np.argwhere(lowland[8:-8, 8:-8]) + 8
    for idx in rng.permutation(len(candidates)):
        if len(centres) >= n_lakes:
            break
        c = candidates[idx]
        r = float(rng.uniform(1.5, 6.5)) if len(centres) else 13.0
        if all(np.hypot(*(c - o)) > ro + r + 6 for o, ro in zip(centres, radii)):
            centres.append(c)
            radii.append(r)
    dist_norm = np.full(shape, np.inf)
    for (cr, ccol), r in zip(centres, radii):
        dist_norm = np.minimum(dist_norm, np.hypot(rr - cr, cc - ccol) / r)
    lake = dist_norm < 1.0
    wop = np.where(lake, np.clip(100.0 - 25.0 * dist_norm ** 4, 76.0, 100.0), 0.0)
    wop = np.where(lake & (dist_norm > 0.8), np.minimum(wop, rng.uniform(76.0, 94.0, shape)), wop)
    wop = np.where(~lake, np.round(rng.uniform(0, 1, shape) ** 6 * 70.0, 1), np.round(wop, 1))

    ti = 5.0 + 4.0 * _smooth(rng, shape, size / 16) - 7.0 * ridge
    ti = ti + 14.0 * np.clip(1.6 - dist_norm, 0.0, 1.6) / 1.6

    land_cover = np.select(
        [lake, ridge > 0.4, s[3] > 0.65, s[3] > 0.45, s[5] > 0.8, s[2] > 0.6],
        [17, 1, 12, 10, 13, 7], default=8,
    ).astype(np.float64)
    land_cover = np.where(~lake & (dist_norm < 1.4), 11.0, land_cover)

    truth = true_wtd(aridity, ti, sand_sh, sand_dp, clay_sh, clay_dp)
    truth = np.where(lake, 0.0, truth)

    # Wells: land pixels away from water.
    eligible = np.flatnonzero(((dist_norm > 2.0) & (wop < 75)).ravel())
    base_pix = rng.choice(eligible, size=int(n_wells * 0.85), replace=False)
    extra_pix = rng.choice(base_pix, size=n_wells - base_pix.size, replace=True)
    pix = np.concatenate([base_pix, extra_pix])
    wr, wc = np.divmod(pix, size)
    ai_w = aridity.ravel()[pix]
    t_w = truth.ravel()[pix]
    limit = np.where(ai_w > 1.48, 241.0, 19.0)
    kind = rng.uniform(size=pix.size)
    confined = kind < 0.10
    depth = np.where(
        confined,
        limit + rng.uniform(1.0, 200.0, pix.size),
        np.minimum(t_w + rng.uniform(2.0, 60.0, pix.size), limit - 0.5),
    )
    depth = np.where(kind > 0.98, np.nan, depth)
    records = []
    for i in range(pix.size):
        lon = ORIGIN_LON + (wc[i] + rng.uniform(0.05, 0.95)) * CELL_SIZE
        lat = ORIGIN_LAT - (wr[i] + rng.uniform(0.05, 0.95)) * CELL_SIZE
        n_read = int(rng.integers(1, 6))
        head = rng.uniform(0.0, 150.0) if confined[i] else t_w[i]
        for k in range(n_read):
            v = head * (1.0 + abs(rng.normal(0.0, 0.08))) if k else head * (1.0 + abs(rng.normal(0.0, 0.02)))
            u = rng.uniform()
            if u < 0.02:
                v = -abs(rng.normal(3.0, 1.0))
            elif u < 0.03:
                v = 5000.0
            records.append((f"W{i:05d}", lon, lat, f"{1980 + k}-06-01", v, depth[i]))
    wells = pd.DataFrame(records, columns=["well_id", "lon", "lat", "date", "wtd_m", "well_depth_m"])

    # Polygons for most lakes (a HydroLAKES stand-in); some lakes are left out.
    polys = []
    lat_c = ORIGIN_LAT - (np.array([c[0] for c in centres]) + 0.5) * CELL_SIZE
    for i, ((cr, ccol), r) in enumerate(zip(centres, radii)):
        if i % 4 == 3:
            continue
        ang = np.linspace(0.0, 2 * np.pi, 40)
        rad = (r + 0.3) * CELL_SIZE
        lon0 = ORIGIN_LON + (ccol + 0.5) * CELL_SIZE
        lat0 = ORIGIN_LAT - (cr + 0.5) * CELL_SIZE
        ring = np.column_stack([lon0 + rad * np.cos(ang), lat0 + rad * np.sin(ang)])
        ring[-1] = ring[0]
        side_km = CELL_SIZE * 111.32
        area_ha = np.pi * (r + 0.3) ** 2 * side_km * side_km * np.cos(np.radians(lat_c[i])) * 100.0
        polys.append((f"L{i:03d}", float(area_ha), ring))
    polygons = WaterBodyPolygonSet.from_rings(polys)

    # Arc-shaped focus zone.
    d_arc = np.hypot(rr - (-0.9 * size), cc - 0.5 * size)
    focus = ((d_arc > 1.05 * size) & (d_arc < 1.6 * size) & (x > 0.1) & (x < 0.9)).astype(np.float64)

    seeds = rng.uniform(0, size, (len(ECOREGION_CODES), 2))
    dseed = np.stack([np.hypot(rr - a, cc - b) for a, b in seeds])
    eco = np.array(ECOREGION_CODES, dtype=np.float64)[np.argmin(dseed, axis=0)]

    fan = np.maximum(0.0, 0.6 * truth + 2.0 + 4.0 * (s[4] - 0.5) + 0.02 * hand)
    degraaf = np.maximum(0.0, 0.4 * truth + 6.0 + 6.0 * (s[5] - 0.5))

    layers = {
        "precipitation": precipitation, "temperature": temperature,
        "january_temperature": january, "rainfall_intensity": rainfall_intensity,
        "max_swe": max_swe, "snow_fraction": snow_fraction, "pet": pet, "aet": aet,
        "elevation": elevation, "topographic_index": ti,
        "sand_shallow": sand_sh, "silt_shallow": silt_sh, "clay_shallow": clay_sh,
        "sand_deep": sand_dp, "silt_deep": silt_dp, "clay_deep": clay_dp,
        "depth_to_bedrock": bedrock, "land_cover": land_cover,
    }
    return ToyContinent(
        layers={k: grid(v) for k, v in layers.items()},
        truth=grid(truth), wop=grid(wop), hand=grid(hand), focus=grid(focus),
        ecoregions=grid(eco), fan=grid(fan), degraaf=grid(degraaf),
        polygons=polygons, wells=wells, seed=seed, lake_mask=lake,
    )
