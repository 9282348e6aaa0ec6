"""Geographic raster model and the grid-level operations built on it.

Conventions
- Coordinates are WGS84 degrees; ``origin_lon``/``origin_lat`` are the
  *upper-left corner* of the frame.  Row 0 is the northernmost row.
- ``values`` is a read-only 2D float64 array.  Nodata cells are stored as
  NaN internally; the ``nodata`` sentinel is only used for file I/O.
- A pixel id is ``row * n_cols + col``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AlignmentError,
    CellSizeMismatch,
    InsufficientCoverage,
    NonDivisibleShape,
    OffsetTooLarge,
)

log = logging.getLogger(__name__)

KM_PER_DEGREE = 111.32
M_PER_DEGREE = KM_PER_DEGREE * 1000.0
DEFAULT_NODATA = -9999.0


@dataclass(frozen=True, eq=False)
class Grid:
    origin_lon: float
    origin_lat: float
    cell_size: float
    values: np.ndarray
    nodata: float = DEFAULT_NODATA

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2:
            raise ValueError(f"grid values must be 2D, got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("grid needs at least one row and one column")
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        v[v == self.nodata] = np.nan
        v[~np.isfinite(v)] = np.nan
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def lat_centers(self) -> np.ndarray:
        return self.origin_lat - (np.arange(self.n_rows) + 0.5) * self.cell_size

    def lon_centers(self) -> np.ndarray:
        return self.origin_lon + (np.arange(self.n_cols) + 0.5) * self.cell_size

    def cell_area_km2(self) -> np.ndarray:
        """Per-cell physical area as a 2D array (latitude-corrected)."""
        side = self.cell_size * KM_PER_DEGREE
        per_row = side * side * np.cos(np.radians(self.lat_centers()))
        return np.repeat(per_row[:, None], self.n_cols, axis=1)

    def pixel_ids(self) -> np.ndarray:
        return np.arange(self.n_rows * self.n_cols, dtype=np.int64).reshape(self.shape)

    def locate(self, lon, lat):
        """Map coordinates to (row, col); cells outside the frame get -1."""
        lon = np.asarray(lon, dtype=np.float64)
        lat = np.asarray(lat, dtype=np.float64)
        col = np.floor((lon - self.origin_lon) / self.cell_size).astype(np.int64)
        row = np.floor((self.origin_lat - lat) / self.cell_size).astype(np.int64)
        inside = (row >= 0) & (row < self.n_rows) & (col >= 0) & (col < self.n_cols)
        inside &= np.isfinite(lon) & np.isfinite(lat)
        return np.where(inside, row, -1), np.where(inside, col, -1)

    def with_values(self, values) -> "Grid":
        return Grid(self.origin_lon, self.origin_lat, self.cell_size, values, self.nodata)

    def same_frame(self, other: "Grid", rtol: float = 1e-9) -> bool:
        tol = rtol * self.cell_size
        return (
            self.shape == other.shape
            and math.isclose(self.cell_size, other.cell_size, rel_tol=rtol)
            and abs(self.origin_lon - other.origin_lon) <= tol
            and abs(self.origin_lat - other.origin_lat) <= tol
        )

    def equals(self, other: "Grid") -> bool:
        return self.same_frame(other, rtol=0.0) and np.array_equal(
            self.values, other.values, equal_nan=True
        )


def require_same_frame(*grids: Grid) -> None:
    first = grids[0]
    for g in grids[1:]:
        if not first.same_frame(g):
            raise AlignmentError("grids are not aligned to the same frame")


# ---------------------------------------------------------------------------
# File I/O

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def read_ascii(path) -> Grid:
    """Read an ESRI-ASCII style grid."""
    header = {}
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    i = 0
    while i < len(lines) and len(header) < len(_HEADER_KEYS):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        key = parts[0].lower()
        if key not in _HEADER_KEYS:
            break
        header[key] = parts[1]
        i += 1
    missing = [k for k in _HEADER_KEYS if k not in header and k != "nodata_value"]
    if missing:
        raise AlignmentError(f"{path}: missing header keys {missing}")
    n_cols, n_rows = int(header["ncols"]), int(header["nrows"])
    cell = float(header["cellsize"])
    nodata = float(header.get("nodata_value", DEFAULT_NODATA))
    data = np.array(" ".join(lines[i:]).split(), dtype=np.float64)
    if data.size != n_rows * n_cols:
        raise AlignmentError(f"{path}: expected {n_rows * n_cols} values, found {data.size}")
    yll = float(header["yllcorner"])
    return Grid(float(header["xllcorner"]), yll + n_rows * cell, cell,
                data.reshape(n_rows, n_cols), nodata)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_ascii(grid: Grid, path) -> None:
    yll = grid.origin_lat - grid.n_rows * grid.cell_size
    nodata_s = _fmt(grid.nodata)
    out = [
        f"ncols {grid.n_cols}",
        f"nrows {grid.n_rows}",
        f"xllcorner {_fmt(grid.origin_lon)}",
        f"yllcorner {_fmt(yll)}",
        f"cellsize {_fmt(grid.cell_size)}",
        f"NODATA_value {nodata_s}",
    ]
    for row in grid.values:
        out.append(" ".join(nodata_s if np.isnan(v) else _fmt(v) for v in row.tolist()))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def read_geotiff(path) -> Grid:
    """Read band 1 of a GeoTIFF.  Needs the optional ``rasterio`` extra."""
    try:
        import rasterio
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise ImportError("GeoTIFF support requires `pip install rasterio`") from exc
    with rasterio.open(path) as src:
        t = src.transform
        if abs(abs(t.a) - abs(t.e)) > 1e-9 * abs(t.a):
            raise CellSizeMismatch("non-square pixels are not supported")
        nodata = src.nodata if src.nodata is not None else DEFAULT_NODATA
        return Grid(t.c, t.f, abs(t.a), src.read(1).astype(np.float64), nodata)


def read_grid(path) -> Grid:
    suffix = Path(path).suffix.lower()
    if suffix in (".tif", ".tiff"):
        return read_geotiff(path)
    return read_ascii(path)


# ---------------------------------------------------------------------------
# Alignment


@dataclass(frozen=True)
class GridAlignment:
    reference_origin: tuple[float, float]
    reference_cell_size: float
    max_offset_tolerance: float = 0.25

    def __post_init__(self):
        if not 0.0 <= self.max_offset_tolerance <= 0.5:
            raise ValueError("max_offset_tolerance must lie in [0, 0.5]")


def alignment_offset(g: Grid, a: GridAlignment) -> tuple[int, int, float, float]:
    """Whole-cell (row, col) shift onto the reference lattice plus the residuals."""
    if not math.isclose(g.cell_size, a.reference_cell_size, rel_tol=1e-9):
        raise CellSizeMismatch(
            f"cell size {g.cell_size} differs from reference {a.reference_cell_size}"
        )
    ref_lon, ref_lat = a.reference_origin
    fc = (ref_lon - g.origin_lon) / g.cell_size
    fr = (g.origin_lat - ref_lat) / g.cell_size
    kc, kr = int(round(fc)), int(round(fr))
    return kr, kc, fr - kr, fc - kc


def align_to_reference(g: Grid, a: GridAlignment) -> Grid:
    """Reframe ``g`` onto the reference lattice by a whole-cell shift.

    Output cell ``(r, c)`` takes ``g[r + kr, c + kc]``; cells whose source lies
    outside ``g`` become nodata.  The output keeps ``g``'s shape.
    """
    kr, kc, rr, rc = alignment_offset(g, a)
    slack = 1e-9
    if abs(rr) > a.max_offset_tolerance + slack or abs(rc) > a.max_offset_tolerance + slack:
        raise OffsetTooLarge(f"fractional offset ({rr:.3f}, {rc:.3f}) cells exceeds tolerance")
    if rr or rc:
        log.warning("snapping fractional offset (%.4f, %.4f) cells to nearest cell", rr, rc)
    out = np.full(g.shape, np.nan)
    nr, nc = g.shape
    dst_r = slice(max(0, -kr), min(nr, nr - kr))
    dst_c = slice(max(0, -kc), min(nc, nc - kc))
    src_r = slice(max(0, kr), min(nr, nr + kr))
    src_c = slice(max(0, kc), min(nc, nc + kc))
    if dst_r.start < dst_r.stop and dst_c.start < dst_c.stop:
        out[dst_r, dst_c] = g.values[src_r, src_c]
    ref_lon, ref_lat = a.reference_origin
    return Grid(ref_lon, ref_lat, a.reference_cell_size, out, g.nodata)


# ---------------------------------------------------------------------------
# Aggregation


def aggregate_max(fine: Grid, factor: int, pad: bool = False) -> Grid:
    """Block maximum over ``factor x factor`` cells, ignoring nodata."""
    if factor < 1:
        raise ValueError("factor must be a positive integer")
    v = fine.values
    nr, nc = v.shape
    if nr % factor or nc % factor:
        if not pad:
            raise NonDivisibleShape(f"shape {v.shape} not divisible by {factor}")
        pr, pc = (-nr) % factor, (-nc) % factor
        v = np.pad(v, ((0, pr), (0, pc)), constant_values=np.nan)
        nr, nc = v.shape
    blocks = v.reshape(nr // factor, factor, nc // factor, factor)
    any_valid = (~np.isnan(blocks)).any(axis=(1, 3))
    out = np.where(np.isnan(blocks), -np.inf, blocks).max(axis=(1, 3))
    out[~any_valid] = np.nan
    return Grid(fine.origin_lon, fine.origin_lat, fine.cell_size * factor, out, fine.nodata)


def coarse_elevation(coarse: Grid, dem_fine: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean fine elevation inside each coarse cell (by fine-cell centre).

    Returns the coarse-scale elevation array and the fractional coarse
    (row, col) coordinates of every fine cell centre, where coarse cell
    centres sit on integers.
    """
    u = (dem_fine.lon_centers() - coarse.origin_lon) / coarse.cell_size - 0.5
    w = (coarse.origin_lat - dem_fine.lat_centers()) / coarse.cell_size - 0.5
    ci = np.floor(u + 0.5).astype(np.int64)
    ri = np.floor(w + 0.5).astype(np.int64)
    if ci.min() < 0 or ci.max() >= coarse.n_cols or ri.min() < 0 or ri.max() >= coarse.n_rows:
        raise AlignmentError("coarse grid does not cover the fine DEM extent")
    idx = (ri[:, None] * coarse.n_cols + ci[None, :]).ravel()
    z = dem_fine.values.ravel()
    ok = ~np.isnan(z)
    n = coarse.n_rows * coarse.n_cols
    total = np.bincount(idx[ok], weights=z[ok], minlength=n)
    count = np.bincount(idx[ok], minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        zc = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return zc.reshape(coarse.shape), w, u


def _kernel(pos: np.ndarray, n: int, bandwidth: float) -> tuple[np.ndarray, np.ndarray]:
    d = pos[:, None] - np.arange(n)[None, :]
    inside = np.abs(d) <= 3.0 * bandwidth
    return np.where(inside, np.exp(-0.5 * (d / bandwidth) ** 2), 0.0), inside.astype(np.float64)


def _bilinear(values: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Bilinear interpolation at fractional cell-centre coordinates.

    Invalid corners are dropped and the remaining weights renormalised; a
    point with no valid corner takes its nearest valid cell.
    """
    from scipy import ndimage

    nr, nc = values.shape
    r0 = np.clip(np.floor(rows).astype(np.int64), 0, nr - 1)
    c0 = np.clip(np.floor(cols).astype(np.int64), 0, nc - 1)
    r1, c1 = np.minimum(r0 + 1, nr - 1), np.minimum(c0 + 1, nc - 1)
    fr = np.clip(rows - r0, 0.0, 1.0)
    fc = np.clip(cols - c0, 0.0, 1.0)
    acc = np.zeros(rows.shape)
    wsum = np.zeros(rows.shape)
    for rr, cc, ww in (
        (r0, c0, (1 - fr) * (1 - fc)),
        (r0, c1, (1 - fr) * fc),
        (r1, c0, fr * (1 - fc)),
        (r1, c1, fr * fc),
    ):
        v = values[rr, cc]
        ok = ~np.isnan(v)
        acc += np.where(ok, v * ww, 0.0)
        wsum += np.where(ok, ww, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = acc / wsum
    missing = ~(wsum > 0)
    if missing.any():
        _, (ir, ic) = ndimage.distance_transform_edt(np.isnan(values), return_indices=True)
        rn = np.clip(np.rint(rows).astype(np.int64), 0, nr - 1)
        cn = np.clip(np.rint(cols).astype(np.int64), 0, nc - 1)
        out[missing] = values[ir[rn, cn], ic[rn, cn]][missing]
    return out


def gwr_downscale(
    coarse: Grid,
    dem_fine: Grid,
    bandwidth_cells: float = 10.0,
    ridge: float = 1e-8,
    on_sparse: str = "bilinear",
) -> Grid:
    """Downscale ``coarse`` onto ``dem_fine`` by geographically weighted regression.

    At every fine cell a weighted least-squares line ``value ~ a + b * z`` is
    fitted over the coarse cells, using coarse-scale elevation ``z`` and a
    Gaussian kernel of ``bandwidth_cells`` (coarse cells, truncated at three
    bandwidths per axis).  The line is evaluated at the fine elevation.  The
    ridge term regularises the slope's normal equation.

    Fine cells with fewer than three valid coarse neighbours fall back to
    bilinear interpolation (``on_sparse="bilinear"``) or raise
    (``on_sparse="raise"``).  No valid neighbour at all always raises.
    """
    if bandwidth_cells <= 0:
        raise ValueError("bandwidth must be positive")
    if on_sparse not in ("bilinear", "raise"):
        raise ValueError("on_sparse must be 'bilinear' or 'raise'")
    zc, rows, cols = coarse_elevation(coarse, dem_fine)
    ok = ~np.isnan(coarse.values) & ~np.isnan(zc)
    z_ref = float(np.mean(zc[ok])) if ok.any() else 0.0
    z = np.where(ok, zc - z_ref, 0.0)
    y = np.where(ok, coarse.values, 0.0)
    f = ok.astype(np.float64)

    ky, my = _kernel(rows, coarse.n_rows, bandwidth_cells)
    kx, mx = _kernel(cols, coarse.n_cols, bandwidth_cells)

    def smooth(a):
        return ky @ a @ kx.T

    s0 = smooth(f)
    s1 = smooth(z)
    s2 = smooth(z * z)
    t0 = smooth(y)
    t1 = smooth(z * y)
    count = my @ f @ mx.T

    if (count < 0.5).any():
        raise InsufficientCoverage("some fine cells have no valid coarse cell within 3 bandwidths")
    sparse = count < 2.5
    if sparse.any() and on_sparse == "raise":
        raise InsufficientCoverage(f"{int(sparse.sum())} fine cells have fewer than 3 valid neighbours")

    with np.errstate(invalid="ignore", divide="ignore"):
        zbar = s1 / s0
        ybar = t0 / s0
        var = s2 / s0 - zbar * zbar
        cov = t1 / s0 - zbar * ybar
        slope = cov / (np.maximum(var, 0.0) + ridge)
    zf = dem_fine.values - z_ref
    out = ybar + slope * (zf - zbar)
    if sparse.any():
        rr, cc = np.meshgrid(rows, cols, indexing="ij")
        out = np.where(sparse, _bilinear(np.where(ok, coarse.values, np.nan), rr, cc), out)
    out = np.where(np.isnan(dem_fine.values), np.nan, out)
    return dem_fine.with_values(out)


# ---------------------------------------------------------------------------
# Terrain


def compute_slope(dem: Grid, spacing_m: tuple[float, float] | None = None) -> Grid:
    """Slope in degrees from the Horn 3x3 stencil.

    Cell spacing defaults to the latitude-corrected metric size of a
    geographic cell; pass ``spacing_m=(dx, dy)`` for projected data.  Border
    cells (and grids thinner than 3 cells) use first differences instead of
    the stencil.
    """
    z = dem.values
    hole = np.isnan(z)
    if hole.all():
        return dem.with_values(np.full(z.shape, np.nan))
    if hole.any():
        # Difference against the nearest valid neighbour so that a nodata
        # cell only blanks itself, not the stencils around it.
        from scipy import ndimage

        _, (ir, ic) = ndimage.distance_transform_edt(hole, return_indices=True)
        z = z[ir, ic]
    if spacing_m is None:
        dy = dem.cell_size * M_PER_DEGREE
        dx = (dy * np.cos(np.radians(dem.lat_centers())))[:, None]
    else:
        dx, dy = spacing_m
    dx = np.broadcast_to(np.asarray(dx, dtype=np.float64), (z.shape[0], 1))

    # an axis of length one contributes no gradient
    gy = np.gradient(z, axis=0) / dy if z.shape[0] > 1 else np.zeros_like(z)
    gx = np.gradient(z, axis=1) / dx if z.shape[1] > 1 else np.zeros_like(z)

    a, b, c = z[:-2, :-2], z[:-2, 1:-1], z[:-2, 2:]
    d, f = z[1:-1, :-2], z[1:-1, 2:]
    g, h, i = z[2:, :-2], z[2:, 1:-1], z[2:, 2:]
    gx[1:-1, 1:-1] = ((c + 2 * f + i) - (a + 2 * d + g)) / (8.0 * dx[1:-1])
    gy[1:-1, 1:-1] = ((g + 2 * h + i) - (a + 2 * b + c)) / (8.0 * dy)
    slope = np.degrees(np.arctan(np.hypot(gx, gy)))
    slope[hole] = np.nan
    return dem.with_values(slope)
