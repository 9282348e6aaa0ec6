"""Pipeline configuration: one YAML file plus ``WTD_*`` environment overrides.

Keys (paths are relative to the config file)::

    seed: 0                      # root seed; every random draw derives from it
    output_dir: out
    layers: {name: path, ...}    # see features.MANDATORY_LAYERS
    reference: {origin_lon, origin_lat, cell_size, max_offset_tolerance}   # optional
    wells: wells.csv
    wop: grids/wop.asc
    polygons: polygons.txt
    hand: grids/hand.asc
    focus_mask: grids/focus.asc
    ecoregions: grids/ecoregions.asc       # optional
    comparison: {fan: ..., degraaf: ...}   # optional external simulations
    thresholds: {...}            # see DEFAULT_THRESHOLDS
    connectivity: 8
    missing_depth: drop          # or "unconfined"
    variants: [v1, v2, v3]
    directions: {feature: +1/-1} # default: DEFAULT_DIRECTIONS
    features: [...]              # default: features.MODEL_FEATURES
    train: {min_child_weight, n_bins}
    search: {n_iterations, weighted, rounds: [lo, hi], max_depth, learning_rate, l2_lambda,
             subsample, colsample}
    cv: {k, rounds, max_depth, learning_rate, l2_lambda}
    stress: {delta_t, precip_scale, recompute_derived, tolerance}

Environment variables ``WTD_<KEY>`` override top-level keys and
``WTD_<SECTION>__<KEY>`` nested ones; values are parsed as YAML scalars.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .features import MANDATORY_LAYERS, MODEL_FEATURES, DEFAULT_DIRECTIONS

DEFAULT_THRESHOLDS = {
    "interior_wop": 95.0,
    "shore_wop": 75.0,
    "hand": 30.0,
    "hand_fraction": 0.02,
    "hand_weight": 0.75,
    "area_min_ha": 30.0,
    "area_max_ha": 80000.0,
    "max_plausible_depth": 1000.0,
    "aridity_split": 1.48,
    "dry_depth": 241.0,
    "wet_depth": 19.0,
}

DEFAULTS = {
    "seed": 0,
    "output_dir": "out",
    "connectivity": 8,
    "missing_depth": "drop",
    "variants": ["v1", "v2", "v3"],
    "thresholds": DEFAULT_THRESHOLDS,
    "train": {"min_child_weight": 1.0, "n_bins": 256},
    "search": {"n_iterations": 20, "weighted": True},
    "cv": {"k": 10, "rounds": 100, "max_depth": 4, "learning_rate": 0.1, "l2_lambda": 1.0},
    "stress": {"delta_t": 4.0, "precip_scale": 0.8, "recompute_derived": True, "tolerance": 1e-9},
}

REQUIRED_PATHS = ("wells", "wop", "polygons", "hand", "focus_mask")
OPTIONAL_PATHS = ("ecoregions",)
STAGES = ("partition", "search", "hand", "cv")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _env_overrides(environ) -> dict:
    over: dict = {}
    for key, raw in sorted(environ.items()):
        if not key.startswith("WTD_"):
            continue
        path = key[4:].lower().split("__")
        node = over
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = yaml.safe_load(raw)
    return over


@dataclass
class PipelineConfig:
    raw: dict
    base_dir: Path
    digest: str

    @classmethod
    def load(cls, path, environ=None) -> "PipelineConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
            user = yaml.safe_load(text) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a mapping")
        env = _env_overrides(os.environ if environ is None else environ)
        raw = _merge(_merge(DEFAULTS, user), env)
        digest = hashlib.sha256(
            (text + json.dumps(env, sort_keys=True)).encode("utf-8")
        ).hexdigest()
        cfg = cls(raw, path.resolve().parent, digest)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.raw[key]

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def path(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def output_dir(self) -> Path:
        return self.path(self.raw["output_dir"])

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def stage_seed(self, stage: str, extra: int = 0) -> int:
        """Child seed for one pipeline stage, derived from the root seed."""
        ss = np.random.SeedSequence([self.seed, STAGES.index(stage), extra])
        return int(ss.generate_state(1)[0])

    @property
    def directions(self) -> dict:
        d = self.raw.get("directions")
        return dict(DEFAULT_DIRECTIONS if d is None else d)

    @property
    def features(self) -> tuple[str, ...]:
        return tuple(self.raw.get("features") or MODEL_FEATURES)

    @property
    def thresholds(self) -> dict:
        return self.raw["thresholds"]

    def validate(self) -> None:
        layers = self.raw.get("layers")
        if not isinstance(layers, dict):
            raise ConfigError("config needs a 'layers' mapping")
        if "land_cover" not in layers and "land_cover_7" not in layers:
            raise ConfigError("config needs a land_cover layer")
        missing = [k for k in MANDATORY_LAYERS if k != "land_cover" and k not in layers]
        if missing:
            raise ConfigError(f"layers missing: {', '.join(missing)}")
        paths = list(layers.values())
        for key in REQUIRED_PATHS:
            if key not in self.raw:
                raise ConfigError(f"config key {key!r} is required")
            paths.append(self.raw[key])
        paths += [self.raw[k] for k in OPTIONAL_PATHS if self.raw.get(k)]
        paths += list((self.raw.get("comparison") or {}).values())
        absent = [str(p) for p in paths if not self.path(p).exists()]
        if absent:
            raise ConfigError(f"missing input files: {', '.join(absent[:5])}")
        for k, v in self.thresholds.items():
            if not float(v) > 0:
                raise ConfigError(f"threshold {k} must be positive")
        if int(self.raw["connectivity"]) not in (4, 8):
            raise ConfigError("connectivity must be 4 or 8")
        unknown = set(self.directions) - set(self.features)
        if unknown:
            raise ConfigError(f"directions reference unknown features {sorted(unknown)}")
        for v in self.raw["variants"]:
            if str(v).lower() not in ("v1", "v2", "v3"):
                raise ConfigError(f"unknown variant {v!r}")
