"""Regression tree storage and depth-wise growth under propagated bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binning import BinMapper
from .split import SplitParams, best_split_from_histograms, build_histograms, leaf_value

LEAF = -1


@dataclass(eq=False)
class Tree:
    """Flat array tree.  Node 0 is the root; ``feature == -1`` marks a leaf.

    ``value`` is the node's own Newton value (the output for leaves),
    ``lower``/``upper`` the bounds inherited from constrained ancestors and
    ``gain`` the split gain (0 for leaves).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    default_left: np.ndarray
    value: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    gain: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self) -> np.ndarray:
        return self.feature == LEAF

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            nd = node[active]
            f = self.feature[nd]
            x = X[active, f]
            go_left = np.where(np.isnan(x), self.default_left[nd], x <= self.threshold[nd])
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] != LEAF]
        return self.value[node]

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())


class _Builder:
    def __init__(self):
        self.rows = []

    def add(self, value, lower, upper, cover):
        self.rows.append([LEAF, np.nan, -1, -1, False, value, lower, upper, 0.0, cover])
        return len(self.rows) - 1

    def make_split(self, node, feature, threshold, left, right, default_left, gain):
        r = self.rows[node]
        r[0], r[1], r[2], r[3], r[4], r[8] = feature, threshold, left, right, default_left, gain

    def finish(self) -> Tree:
        cols = list(zip(*self.rows))
        return Tree(
            feature=np.array(cols[0], dtype=np.int64),
            threshold=np.array(cols[1], dtype=np.float64),
            left=np.array(cols[2], dtype=np.int64),
            right=np.array(cols[3], dtype=np.int64),
            default_left=np.array(cols[4], dtype=bool),
            value=np.array(cols[5], dtype=np.float64),
            lower=np.array(cols[6], dtype=np.float64),
            upper=np.array(cols[7], dtype=np.float64),
            gain=np.array(cols[8], dtype=np.float64),
            cover=np.array(cols[9], dtype=np.float64),
        )


def child_bounds(direction: int, lower: float, upper: float, wl: float, wr: float):
    """Bounds for (left, right) children after a split.

    Under a constraint the midpoint of the two child values caps the lower
    side and floors the upper side, so no descendant can cross it.
    """
    if direction == 0:
        return (lower, upper), (lower, upper)
    mid = 0.5 * (wl + wr)
    if direction > 0:
        return (lower, mid), (mid, upper)
    return (mid, upper), (lower, mid)


def grow_tree(
    codes: np.ndarray,
    mapper: BinMapper,
    gradients: np.ndarray,
    hessians: np.ndarray,
    directions: np.ndarray,
    max_depth: int,
    params: SplitParams = SplitParams(),
    rows: np.ndarray | None = None,
    feature_mask: np.ndarray | None = None,
) -> Tree:
    """Grow one tree depth-wise on ``rows`` (all rows by default).

    Leaf values are ``-G / (H + lambda)`` clamped into the inherited bounds.
    Sibling histograms come from parent minus the smaller child.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    directions = np.asarray(directions, dtype=np.int64)
    bin_counts = mapper.bin_counts()
    lam = params.l2_lambda
    if rows is None:
        rows = np.arange(codes.shape[0], dtype=np.intp)
    rows = np.asarray(rows, dtype=np.intp)

    b = _Builder()
    G = float(np.sum(gradients[rows]))
    H = float(np.sum(hessians[rows]))
    root = b.add(leaf_value(G, H, lam), -np.inf, np.inf, H)
    hg, hh = build_histograms(codes, rows, gradients, hessians, mapper.width)
    frontier = [(root, rows, hg, hh, G, H, -np.inf, np.inf)]

    for _depth in range(max_depth):
        nxt = []
        for node, nrows, hg, hh, G, H, lo, hi in frontier:
            s = best_split_from_histograms(hg, hh, G, H, bin_counts, directions, (lo, hi),
                                           params, feature_mask)
            if s is None:
                continue
            j = s.feature
            col = codes[nrows, j]
            missing = col == mapper.missing_code
            go_left = np.where(missing, s.default_left, col <= s.bin)
            lrows, rrows = nrows[go_left], nrows[~go_left]
            (llo, lhi), (rlo, rhi) = child_bounds(int(directions[j]), lo, hi,
                                                  s.left_value, s.right_value)
            lval = float(np.clip(s.left_value, llo, lhi))
            rval = float(np.clip(s.right_value, rlo, rhi))
            li = b.add(lval, llo, lhi, s.left_hess)
            ri = b.add(rval, rlo, rhi, s.right_hess)
            b.make_split(node, j, mapper.threshold(j, s.bin), li, ri, s.default_left, s.gain)
            if _depth + 1 < max_depth:
                if lrows.size <= rrows.size:
                    lg, lh = build_histograms(codes, lrows, gradients, hessians, mapper.width)
                    rg, rh = hg - lg, hh - lh
                else:
                    rg, rh = build_histograms(codes, rrows, gradients, hessians, mapper.width)
                    lg, lh = hg - rg, hh - rh
                nxt.append((li, lrows, lg, lh, s.left_grad, s.left_hess, llo, lhi))
                nxt.append((ri, rrows, rg, rh, s.right_grad, s.right_hess, rlo, rhi))
        frontier = nxt
        if not frontier:
            break
    return b.finish()
