"""Gradient boosting for weighted squared error with monotone constraints."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Mapping, Sequence

import numpy as np

from ..errors import DegenerateData, WidthMismatch
from .binning import build_bins
from .split import SplitParams
from .tree import Tree, grow_tree


@dataclass(frozen=True)
class TrainConfig:
    rounds: int = 500
    learning_rate: float = 0.05
    max_depth: int = 6
    min_child_weight: float = 1.0
    l2_lambda: float = 1.0
    subsample: float = 1.0
    colsample: float = 1.0
    n_bins: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.min_child_weight < 0 or self.l2_lambda < 0:
            raise ValueError("min_child_weight and l2_lambda must be non-negative")
        if not (0 < self.subsample <= 1 and 0 < self.colsample <= 1):
            raise ValueError("subsample and colsample must lie in (0, 1]")
        if self.n_bins < 2:
            raise ValueError("n_bins must be at least 2")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrainConfig":
        types = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in d.items():
            if k not in types:
                raise ValueError(f"unknown training parameter {k!r}")
            out[k] = int(v) if types[k] in ("int", int) else float(v)
        return cls(**out)


def directions_vector(directions, feature_names: Sequence[str]) -> np.ndarray:
    """Normalise a name->direction mapping or a sequence to an int vector."""
    if isinstance(directions, Mapping):
        unknown = set(directions) - set(feature_names)
        if unknown:
            raise ValueError(f"directions name unknown features {sorted(unknown)}")
        vec = np.array([int(directions.get(n, 0)) for n in feature_names], dtype=np.int64)
    elif directions is None:
        vec = np.zeros(len(feature_names), dtype=np.int64)
    else:
        vec = np.asarray(directions, dtype=np.int64)
        if vec.shape != (len(feature_names),):
            raise ValueError("one direction per feature is required")
    if not np.isin(vec, (-1, 0, 1)).all():
        raise ValueError("directions must be -1, 0 or +1")
    return vec


@dataclass
class TrainMatrix:
    X: np.ndarray
    y: np.ndarray
    weight: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.feature_names = tuple(self.feature_names)
        n = self.X.shape[0]
        if self.y.shape != (n,) or self.weight.shape != (n,):
            raise ValueError("X, y and weight disagree on the number of rows")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("one feature name per column is required")
        if not np.isfinite(self.y).all():
            raise ValueError("targets must be finite")
        if (self.weight < 0).any() or not np.isfinite(self.weight).all():
            raise ValueError("weights must be finite and non-negative")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def subset(self, rows) -> "TrainMatrix":
        return TrainMatrix(self.X[rows], self.y[rows], self.weight[rows], self.feature_names)


@dataclass(eq=False)
class BoostedEnsemble:
    base_score: float
    learning_rate: float
    trees: list[Tree]
    directions: np.ndarray
    feature_names: tuple[str, ...]
    config: TrainConfig = field(default_factory=TrainConfig)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict(self, X, n_trees: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise WidthMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.zeros(X.shape[0])
        for tree in self.trees[:n_trees]:
            out += tree.predict(X)
        return self.base_score + self.learning_rate * out


def fit(matrix: TrainMatrix, config: TrainConfig = TrainConfig(), directions=None) -> BoostedEnsemble:
    """Boost ``config.rounds`` trees on ``matrix``.

    Every random draw (row subsample, column subsample) comes from a single
    generator seeded with ``config.seed``, so the result depends only on the
    data and config.
    """
    dirs = directions_vector(directions, matrix.feature_names)
    w = matrix.weight
    if matrix.n_rows < 2:
        raise DegenerateData("need at least two rows")
    if not w.sum() > 0:
        raise DegenerateData("all weights are zero")
    y = matrix.y
    base = float(np.sum(w * y) / np.sum(w))
    mapper, codes = build_bins(matrix.X, w, config.n_bins)
    params = SplitParams(config.l2_lambda, config.min_child_weight)
    rng = np.random.default_rng(config.seed)
    n, n_features = matrix.X.shape
    n_sub = max(2, int(math.ceil(config.subsample * n)))
    n_col = max(1, int(math.ceil(config.colsample * n_features)))
    raw = np.zeros(n)
    trees = []
    for _ in range(config.rounds):
        pred = base + config.learning_rate * raw
        g = w * (pred - y)
        rows = None
        if n_sub < n:
            rows = np.sort(rng.choice(n, size=n_sub, replace=False))
        mask = None
        if n_col < n_features:
            mask = np.zeros(n_features, dtype=bool)
            mask[rng.choice(n_features, size=n_col, replace=False)] = True
        tree = grow_tree(codes, mapper, g, w, dirs, config.max_depth, params, rows, mask)
        trees.append(tree)
        raw += tree.predict(matrix.X)
    return BoostedEnsemble(base, config.learning_rate, trees, dirs, matrix.feature_names, config)


def predict(ensemble: BoostedEnsemble, X) -> np.ndarray:
    return ensemble.predict(X)


def gain_importance(ensemble: BoostedEnsemble) -> dict[str, float]:
    """Mean split gain per feature, normalised to sum to one."""
    totals = np.zeros(ensemble.n_features)
    counts = np.zeros(ensemble.n_features)
    for tree in ensemble.trees:
        split = ~tree.is_leaf()
        np.add.at(totals, tree.feature[split], tree.gain[split])
        np.add.at(counts, tree.feature[split], 1)
    if counts.sum() == 0:
        return {}
    used = counts > 0
    mean = np.where(used, totals / np.maximum(counts, 1), 0.0)
    norm = mean.sum()
    return {ensemble.feature_names[j]: float(mean[j] / norm) for j in np.flatnonzero(used)}


def weighted_r2(y, pred, weight=None) -> float:
    y = np.asarray(y, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    w = np.ones_like(y) if weight is None else np.asarray(weight, dtype=np.float64)
    mean = np.sum(w * y) / np.sum(w)
    ss_tot = np.sum(w * (y - mean) ** 2)
    ss_res = np.sum(w * (y - pred) ** 2)
    if ss_tot == 0:
        return float("nan")
    return float(1.0 - ss_res / ss_tot)
