"""Dataset partitioning, V1/V2/V3 assembly, random search and ecoregion CV."""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .errors import AllFitsFailed, EmptyFocus, TooFewRecords, UnresolvedPixel, WtdError
from .features import MODEL_FEATURES, FeatureTable
from .gbdt import BoostedEnsemble, TrainConfig, TrainMatrix, fit, weighted_r2
from .grid import Grid
from .proxies import PROXY_COLUMNS

log = logging.getLogger(__name__)

SEARCH_LOG_COLUMNS = ("iter", "seed", "rounds", "eta", "depth", "lambda", "subsample",
                      "colsample", "valid_r2")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


class Variant(enum.Enum):
    V1 = "v1"
    V2 = "v2"
    V3 = "v3"

    @property
    def sources(self) -> tuple[str, ...]:
        return {"v1": ("REAL",), "v2": ("REAL", "SHORE"), "v3": ("REAL", "SHORE", "HAND")}[self.value]

    @classmethod
    def parse(cls, s) -> "Variant":
        return s if isinstance(s, cls) else cls(str(s).lower())


def real_records(pixels: pd.DataFrame) -> pd.DataFrame:
    """Well pixel table (``pixel_id, wtd_m, ...``) -> weight-1 REAL records."""
    return pd.DataFrame({
        "pixel_id": pixels["pixel_id"].to_numpy(np.int64),
        "target_wtd": pixels["wtd_m"].to_numpy(np.float64),
        "weight": np.ones(len(pixels)),
        "source": "REAL",
    })


# ---------------------------------------------------------------------------
# Partition


@dataclass(frozen=True, eq=False)
class Partition:
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    focus_mask: Grid

    def __post_init__(self):
        for a, b in ((self.train, self.valid), (self.train, self.test), (self.valid, self.test)):
            if np.intersect1d(a, b).size:
                raise ValueError("partition sets overlap")

    def split_of(self, pixel_ids) -> np.ndarray:
        ids = np.asarray(pixel_ids, dtype=np.int64)
        out = np.full(ids.shape, "", dtype=object)
        out[np.isin(ids, self.train)] = "train"
        out[np.isin(ids, self.valid)] = "valid"
        out[np.isin(ids, self.test)] = "test"
        return out

    def to_frame(self) -> pd.DataFrame:
        ids = np.concatenate([self.train, self.valid, self.test])
        split = ["train"] * len(self.train) + ["valid"] * len(self.valid) + ["test"] * len(self.test)
        return pd.DataFrame({"pixel_id": ids, "split": split}).sort_values("pixel_id", kind="stable")


def in_focus(pixel_ids, focus_mask: Grid) -> np.ndarray:
    flat = np.nan_to_num(focus_mask.values.ravel(), nan=0.0)
    return flat[np.asarray(pixel_ids, dtype=np.int64)] == 1


def make_partition(records: pd.DataFrame, focus_mask: Grid, seed: int) -> Partition:
    """Split record pixels: focus zone 1/3 train, 1/3 valid, 1/3 test;
    elsewhere 2/3 train, 1/3 valid."""
    ids = np.unique(records["pixel_id"].to_numpy(np.int64))
    focus = in_focus(ids, focus_mask)
    if not focus.any():
        raise EmptyFocus("no record lies inside the focus zone")
    rng = np.random.default_rng(seed)
    f_ids = rng.permutation(ids[focus])
    o_ids = rng.permutation(ids[~focus])
    n_f = f_ids.size
    a = _round_half_up(n_f / 3)
    b = a + _round_half_up(n_f / 3)
    c = _round_half_up(2 * o_ids.size / 3)
    return Partition(
        train=np.sort(np.concatenate([f_ids[:a], o_ids[:c]])),
        valid=np.sort(np.concatenate([f_ids[a:b], o_ids[c:]])),
        test=np.sort(f_ids[b:]),
        focus_mask=focus_mask,
    )


# ---------------------------------------------------------------------------
# Variant assembly


@dataclass
class VariantData:
    matrix: TrainMatrix
    records: pd.DataFrame
    dropped_duplicates: int
    dropped_unresolved: int


def assemble_variant(
    variant,
    real: pd.DataFrame,
    shore: pd.DataFrame | None,
    hand: pd.DataFrame | None,
    table: FeatureTable,
    features=MODEL_FEATURES,
    on_unresolved: str = "raise",
) -> VariantData:
    """Weighted training matrix for V1 (real), V2 (+shoreline) or V3 (+HAND).

    When a pixel appears in several sources the first of REAL, SHORE, HAND
    wins and the rest are counted as dropped.
    """
    variant = Variant.parse(variant)
    parts = {"REAL": real, "SHORE": shore, "HAND": hand}
    frames = []
    for src in variant.sources:
        df = parts[src]
        if df is None:
            raise ValueError(f"{variant.name} needs {src} records")
        frames.append(df.loc[:, list(PROXY_COLUMNS)].assign(source=src))
    recs = pd.concat(frames, ignore_index=True)
    dup = recs["pixel_id"].duplicated(keep="first")
    recs = recs.loc[~dup].reset_index(drop=True)

    rows = table.rows_for(recs["pixel_id"].to_numpy())
    missing = rows < 0
    if missing.any():
        if on_unresolved == "raise":
            bad = recs.loc[missing, "pixel_id"].head(5).tolist()
            raise UnresolvedPixel(f"{int(missing.sum())} record pixels lack features, e.g. {bad}")
        recs = recs.loc[~missing].reset_index(drop=True)
        rows = rows[~missing]
    X = table.matrix(features)[rows]
    m = TrainMatrix(X, recs["target_wtd"].to_numpy(np.float64),
                    recs["weight"].to_numpy(np.float64), features)
    return VariantData(m, recs, int(dup.sum()), int(missing.sum()))


# ---------------------------------------------------------------------------
# Random search


@dataclass(frozen=True)
class HyperSearchSpace:
    learning_rate: tuple[float, float] = (0.02, 0.3)
    l2_lambda: tuple[float, float] = (0.1, 10.0)
    max_depth: tuple[int, int] = (3, 8)
    rounds: tuple[int, int] = (50, 300)
    subsample: tuple[float, float] = (0.6, 1.0)
    colsample: tuple[float, float] = (0.6, 1.0)
    n_iterations: int = 20

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be at least 1")
        for name in ("learning_rate", "l2_lambda", "max_depth", "rounds", "subsample", "colsample"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"empty range for {name}")

    def sample(self, rng: np.random.Generator, base: TrainConfig) -> TrainConfig:
        def log_uniform(lo, hi):
            return float(np.exp(rng.uniform(np.log(lo), np.log(hi)))) if lo < hi else float(lo)

        def uniform(lo, hi):
            return float(rng.uniform(lo, hi)) if lo < hi else float(lo)

        def integer(lo, hi):
            return int(rng.integers(lo, hi + 1)) if lo < hi else int(lo)

        return replace(
            base,
            learning_rate=log_uniform(*self.learning_rate),
            l2_lambda=log_uniform(*self.l2_lambda),
            max_depth=integer(*self.max_depth),
            rounds=integer(*self.rounds),
            subsample=uniform(*self.subsample),
            colsample=uniform(*self.colsample),
            seed=int(rng.integers(0, 2**31 - 1)),
        )


@dataclass
class SearchResult:
    best: TrainConfig
    log: pd.DataFrame
    model: BoostedEnsemble


def _score(config, train, valid, directions, weighted):
    try:
        model = fit(train, config, directions)
    except WtdError as exc:
        log.warning("fit failed for %s: %s", config, exc)
        return float("nan")
    pred = model.predict(valid.X)
    return weighted_r2(valid.y, pred, valid.weight if weighted else None)


def random_search(
    space: HyperSearchSpace,
    train: TrainMatrix,
    valid: TrainMatrix,
    directions=None,
    seed: int = 0,
    base: TrainConfig = TrainConfig(),
    weighted: bool = True,
    n_jobs: int = 1,
) -> SearchResult:
    """Pick the config with the best validation R^2, then refit on train + valid.

    Configs are drawn sequentially from one generator; fits may run in
    threads but the log is kept in iteration order.
    """
    rng = np.random.default_rng(seed)
    configs = [space.sample(rng, base) for _ in range(space.n_iterations)]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            scores = list(pool.map(lambda c: _score(c, train, valid, directions, weighted), configs))
    else:
        scores = [_score(c, train, valid, directions, weighted) for c in configs]
    log_df = pd.DataFrame({
        "iter": np.arange(len(configs)),
        "seed": [c.seed for c in configs],
        "rounds": [c.rounds for c in configs],
        "eta": [c.learning_rate for c in configs],
        "depth": [c.max_depth for c in configs],
        "lambda": [c.l2_lambda for c in configs],
        "subsample": [c.subsample for c in configs],
        "colsample": [c.colsample for c in configs],
        "valid_r2": scores,
    })
    s = np.asarray(scores, dtype=np.float64)
    if np.isnan(s).all():
        raise AllFitsFailed("every search iteration failed")
    best = configs[int(np.nanargmax(s))]
    both = TrainMatrix(np.vstack([train.X, valid.X]), np.concatenate([train.y, valid.y]),
                       np.concatenate([train.weight, valid.weight]), train.feature_names)
    return SearchResult(best, log_df, fit(both, best, directions))


# ---------------------------------------------------------------------------
# Ecoregion cross-validation


def ecoregion_cv(
    real: pd.DataFrame,
    proxies: pd.DataFrame | None,
    table: FeatureTable,
    config: TrainConfig,
    directions=None,
    k: int = 10,
    seed: int = 0,
    features=MODEL_FEATURES,
) -> pd.DataFrame:
    """Out-of-fold predictions for the REAL records of one region.

    Only REAL records are folded; ``proxies`` always stay in training.
    Returns ``pixel_id, fold, observed, predicted``.
    """
    n = len(real)
    if n < k:
        raise TooFewRecords(f"{n} real records cannot be split into {k} folds")
    rng = np.random.default_rng(seed)
    fold = np.empty(n, dtype=np.int64)
    fold[rng.permutation(n)] = np.arange(n) % k

    real = real.loc[:, list(PROXY_COLUMNS)].reset_index(drop=True)
    rows = table.rows_for(real["pixel_id"].to_numpy())
    if (rows < 0).any():
        raise UnresolvedPixel("real records reference pixels missing from the feature table")
    Xr = table.matrix(features)[rows]
    yr = real["target_wtd"].to_numpy(np.float64)
    wr = real["weight"].to_numpy(np.float64)
    if proxies is not None and len(proxies):
        prow = table.rows_for(proxies["pixel_id"].to_numpy())
        keep = prow >= 0
        Xp = table.matrix(features)[prow[keep]]
        yp = proxies["target_wtd"].to_numpy(np.float64)[keep]
        wp = proxies["weight"].to_numpy(np.float64)[keep]
    else:
        Xp, yp, wp = np.empty((0, len(features))), np.empty(0), np.empty(0)

    pred = np.empty(n)
    for f in range(k):
        held = fold == f
        m = TrainMatrix(np.vstack([Xr[~held], Xp]), np.concatenate([yr[~held], yp]),
                        np.concatenate([wr[~held], wp]), features)
        pred[held] = fit(m, config, directions).predict(Xr[held])
    return pd.DataFrame({"pixel_id": real["pixel_id"].to_numpy(np.int64), "fold": fold,
                         "observed": yr, "predicted": pred})
