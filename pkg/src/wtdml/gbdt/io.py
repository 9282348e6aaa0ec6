"""Versioned plain-text ensemble format.

Layout::

    wtdml-ensemble 1
    base_score <float>
    learning_rate <float>
    config <key>=<value> ...
    n_features <F>
    feature <index> <name> <direction>      (F lines)
    n_trees <T>
    tree <t> <n_nodes>
    node <id> <kind> <feature> <threshold> <value> <lower> <upper> <left> <right> <default_left> <gain> <cover>
    ...
    end

Floats are written with 17 significant digits, so a save/load cycle is
bit-exact.  Leaf rows carry ``-`` in the split-only fields.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import DataError
from .boosting import BoostedEnsemble, TrainConfig
from .tree import LEAF, Tree

MAGIC = "wtdml-ensemble"
VERSION = 1


def _f(x: float) -> str:
    return format(float(x), ".17g")


def dumps(ens: BoostedEnsemble) -> str:
    out = [f"{MAGIC} {VERSION}", f"base_score {_f(ens.base_score)}",
           f"learning_rate {_f(ens.learning_rate)}"]
    cfg = " ".join(f"{k}={_f(v) if isinstance(v, float) else v}"
                   for k, v in ens.config.as_dict().items())
    out.append(f"config {cfg}")
    out.append(f"n_features {ens.n_features}")
    for j, (name, d) in enumerate(zip(ens.feature_names, ens.directions.tolist())):
        out.append(f"feature {j} {name} {int(d)}")
    out.append(f"n_trees {len(ens.trees)}")
    for t, tree in enumerate(ens.trees):
        out.append(f"tree {t} {tree.n_nodes}")
        for i in range(tree.n_nodes):
            common = (f"{_f(tree.value[i])} {_f(tree.lower[i])} {_f(tree.upper[i])}")
            if tree.feature[i] == LEAF:
                out.append(f"node {i} leaf - - {common} - - - - {_f(tree.cover[i])}")
            else:
                out.append(
                    f"node {i} split {int(tree.feature[i])} {_f(tree.threshold[i])} {common} "
                    f"{int(tree.left[i])} {int(tree.right[i])} {int(tree.default_left[i])} "
                    f"{_f(tree.gain[i])} {_f(tree.cover[i])}"
                )
    out.append("end")
    return "\n".join(out) + "\n"


def _expect(tokens, key):
    if not tokens or tokens[0] != key:
        raise DataError(f"malformed ensemble file: expected {key!r}, got {' '.join(tokens)!r}")
    return tokens[1:]


def loads(text: str) -> BoostedEnsemble:
    lines = iter(line.split() for line in text.splitlines() if line.strip())
    head = next(lines)
    if head[:1] != [MAGIC] or int(head[1]) != VERSION:
        raise DataError(f"unsupported ensemble header {' '.join(head)!r}")
    base = float(_expect(next(lines), "base_score")[0])
    lr = float(_expect(next(lines), "learning_rate")[0])
    cfg = dict(kv.split("=", 1) for kv in _expect(next(lines), "config"))
    config = TrainConfig.from_dict(cfg)
    n_features = int(_expect(next(lines), "n_features")[0])
    names, dirs = [], []
    for _ in range(n_features):
        _, _, name, d = next(lines)
        names.append(name)
        dirs.append(int(d))
    n_trees = int(_expect(next(lines), "n_trees")[0])
    trees = []
    for _ in range(n_trees):
        n_nodes = int(_expect(next(lines), "tree")[1])
        cols = {k: [] for k in ("feature", "threshold", "left", "right", "default_left",
                                "value", "lower", "upper", "gain", "cover")}
        for _ in range(n_nodes):
            tok = _expect(next(lines), "node")
            leaf = tok[1] == "leaf"
            cols["feature"].append(LEAF if leaf else int(tok[2]))
            cols["threshold"].append(np.nan if leaf else float(tok[3]))
            cols["value"].append(float(tok[4]))
            cols["lower"].append(float(tok[5]))
            cols["upper"].append(float(tok[6]))
            cols["left"].append(-1 if leaf else int(tok[7]))
            cols["right"].append(-1 if leaf else int(tok[8]))
            cols["default_left"].append(False if leaf else bool(int(tok[9])))
            cols["gain"].append(0.0 if leaf else float(tok[10]))
            cols["cover"].append(float(tok[11]))
        trees.append(Tree(
            feature=np.array(cols["feature"], dtype=np.int64),
            threshold=np.array(cols["threshold"], dtype=np.float64),
            left=np.array(cols["left"], dtype=np.int64),
            right=np.array(cols["right"], dtype=np.int64),
            default_left=np.array(cols["default_left"], dtype=bool),
            value=np.array(cols["value"], dtype=np.float64),
            lower=np.array(cols["lower"], dtype=np.float64),
            upper=np.array(cols["upper"], dtype=np.float64),
            gain=np.array(cols["gain"], dtype=np.float64),
            cover=np.array(cols["cover"], dtype=np.float64),
        ))
    _expect(next(lines), "end")
    return BoostedEnsemble(base, lr, trees, np.array(dirs, dtype=np.int64), tuple(names), config)


def save(ens: BoostedEnsemble, path) -> None:
    Path(path).write_text(dumps(ens), encoding="utf-8")


def load(path) -> BoostedEnsemble:
    return loads(Path(path).read_text(encoding="utf-8"))
