"""Histogram split search with monotone-constraint admissibility."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .binning import BinMapper


@dataclass(frozen=True)
class SplitParams:
    l2_lambda: float = 1.0
    min_child_weight: float = 1.0


@dataclass(frozen=True)
class SplitDecision:
    feature: int
    bin: int
    gain: float
    left_value: float
    right_value: float
    default_left: bool
    left_grad: float
    left_hess: float
    right_grad: float
    right_hess: float


def build_histograms(codes: np.ndarray, rows: np.ndarray, g: np.ndarray, h: np.ndarray,
                     width: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature gradient / hessian sums, shaped ``(n_features, width)``."""
    n_features = codes.shape[1]
    sub = codes[rows].astype(np.intp)
    sub += (np.arange(n_features, dtype=np.intp) * width)[None, :]
    flat = sub.ravel()
    size = n_features * width
    hg = np.bincount(flat, weights=np.repeat(g[rows], n_features), minlength=size)
    hh = np.bincount(flat, weights=np.repeat(h[rows], n_features), minlength=size)
    return hg.reshape(n_features, width), hh.reshape(n_features, width)


def leaf_value(G: float, H: float, l2_lambda: float) -> float:
    return -G / (H + l2_lambda)


def best_split_from_histograms(
    hist_g: np.ndarray,
    hist_h: np.ndarray,
    G: float,
    H: float,
    bin_counts: np.ndarray,
    directions: np.ndarray,
    bounds: tuple[float, float],
    params: SplitParams,
    feature_mask: np.ndarray | None = None,
) -> SplitDecision | None:
    """Best admissible ``(feature, bin)`` boundary or ``None`` (no split).

    Candidates are rejected when a child's weight is below
    ``min_child_weight``, when the two child values are out of order for a
    constrained feature, or when either child value leaves ``bounds``.
    Ties go to the lowest feature index, then the lowest bin.
    """
    lam = params.l2_lambda
    mcw = params.min_child_weight
    if H < 2.0 * mcw:
        return None
    n_features, width = hist_g.shape
    nb = width - 1
    cg = np.cumsum(hist_g[:, :nb], axis=1)
    ch = np.cumsum(hist_h[:, :nb], axis=1)
    mg = hist_g[:, nb:nb + 1]
    mh = hist_h[:, nb:nb + 1]
    hn = H - mh  # non-missing hessian per feature

    d = directions[:, None]
    # Missing values follow the heavier child; constrained features send them left.
    default_left = (ch >= hn - ch) | (d != 0)
    GL = np.where(default_left, cg + mg, cg)
    HL = np.where(default_left, ch + mh, ch)
    GR = G - GL
    HR = H - HL

    candidate = np.arange(nb)[None, :] < (bin_counts[:, None] - 1)
    if feature_mask is not None:
        candidate &= feature_mask[:, None]
    candidate &= (HL >= mcw) & (HR >= mcw)

    with np.errstate(divide="ignore", invalid="ignore"):
        wl = -GL / (HL + lam)
        wr = -GR / (HR + lam)
        gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam))
    lo, hi = bounds
    candidate &= (wl >= lo) & (wl <= hi) & (wr >= lo) & (wr <= hi)
    candidate &= ~((d > 0) & (wl > wr)) & ~((d < 0) & (wl < wr))
    candidate &= gain > 0

    if not candidate.any():
        return None
    scored = np.where(candidate, gain, -np.inf)
    flat = int(np.argmax(scored))
    j, b = divmod(flat, nb)
    return SplitDecision(
        feature=j,
        bin=b,
        gain=float(gain[j, b]),
        left_value=float(wl[j, b]),
        right_value=float(wr[j, b]),
        default_left=bool(default_left[j, b]),
        left_grad=float(GL[j, b]),
        left_hess=float(HL[j, b]),
        right_grad=float(GR[j, b]),
        right_hess=float(HR[j, b]),
    )


def find_best_split(
    codes: np.ndarray,
    rows: np.ndarray,
    gradients: np.ndarray,
    hessians: np.ndarray,
    mapper: BinMapper,
    directions,
    bounds: tuple[float, float] = (-np.inf, np.inf),
    params: SplitParams = SplitParams(),
    feature_mask: np.ndarray | None = None,
) -> SplitDecision | None:
    """Best split for the node made of ``rows``.

    Convenience wrapper around :func:`best_split_from_histograms`; the tree
    grower builds histograms itself so it can use the subtraction trick.
    """
    rows = np.asarray(rows, dtype=np.intp)
    hg, hh = build_histograms(codes, rows, gradients, hessians, mapper.width)
    G = float(np.sum(gradients[rows]))
    H = float(np.sum(hessians[rows]))
    return best_split_from_histograms(
        hg, hh, G, H, mapper.bin_counts(), np.asarray(directions, dtype=np.int64),
        bounds, params, feature_mask,
    )
