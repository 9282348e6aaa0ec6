"""Histogram gradient-boosted regression trees with global monotone constraints."""

from .binning import BinMapper, build_bins
from .boosting import (
    BoostedEnsemble,
    TrainConfig,
    TrainMatrix,
    directions_vector,
    fit,
    gain_importance,
    predict,
    weighted_r2,
)
from .io import load, loads, save, dumps
from .split import SplitDecision, SplitParams, find_best_split
from .tree import Tree, grow_tree

__all__ = [
    "BinMapper",
    "BoostedEnsemble",
    "SplitDecision",
    "SplitParams",
    "TrainConfig",
    "TrainMatrix",
    "Tree",
    "build_bins",
    "directions_vector",
    "dumps",
    "find_best_split",
    "fit",
    "gain_importance",
    "grow_tree",
    "load",
    "loads",
    "predict",
    "save",
    "weighted_r2",
]
