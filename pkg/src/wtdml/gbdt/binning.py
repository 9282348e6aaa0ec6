"""Weighted-quantile feature binning.

Each feature gets a sorted array of *edges*; bin ``b`` holds values in
``(edges[b-1], edges[b]]`` so a value equal to an edge lands in the lower
bin.  When a feature has no more distinct values than requested bins, every
distinct value gets its own bin (exact splits).  NaN is coded as the
reserved missing bin, the last column of every histogram.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class BinMapper:
    edges: tuple[np.ndarray, ...]
    max_bins: int

    @property
    def n_features(self) -> int:
        return len(self.edges)

    @property
    def width(self) -> int:
        """Histogram width: the largest bin count plus the missing bin."""
        return self.max_bins + 1

    @property
    def missing_code(self) -> int:
        return self.max_bins

    def n_bins(self, j: int) -> int:
        return len(self.edges[j]) + 1

    def bin_counts(self) -> np.ndarray:
        return np.array([len(e) + 1 for e in self.edges], dtype=np.int64)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        dtype = np.uint8 if self.width <= 256 else np.uint16
        codes = np.empty(X.shape, dtype=dtype)
        for j, e in enumerate(self.edges):
            col = X[:, j]
            c = np.searchsorted(e, col, side="left")
            c[np.isnan(col)] = self.missing_code
            codes[:, j] = c
        return codes

    def threshold(self, j: int, b: int) -> float:
        """Split value for 'bins <= b go left', i.e. ``x <= threshold``."""
        return float(self.edges[j][b])


def weighted_quantile_edges(values: np.ndarray, weights: np.ndarray, n_bins: int) -> np.ndarray:
    ok = ~np.isnan(values)
    v, w = values[ok], weights[ok]
    if v.size == 0:
        return np.empty(0)
    distinct = np.unique(v)
    if distinct.size <= n_bins:
        return distinct[:-1].copy()
    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    cum = np.cumsum(w)
    targets = cum[-1] * np.arange(1, n_bins) / n_bins
    idx = np.minimum(np.searchsorted(cum, targets, side="left"), v.size - 1)
    edges = np.unique(v[idx])
    return edges[edges < distinct[-1]]


def build_bins(X: np.ndarray, weights: np.ndarray | None = None, n_bins: int = 256):
    """Fit per-feature edges and return ``(mapper, codes)``.

    A constant feature gets a single bin and is never split.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    X = np.asarray(X, dtype=np.float64)
    w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    edges = tuple(weighted_quantile_edges(X[:, j], w, n_bins) for j in range(X.shape[1]))
    width = max([len(e) + 1 for e in edges] + [1])
    mapper = BinMapper(edges, width)
    return mapper, mapper.transform(X)
