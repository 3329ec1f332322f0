"""JSON run configuration with strict key checking and defaults."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grid import GridError, build_grid
from .model import ModelParams, ParameterError, ThetaWeight

VERIFIERS = ("lyapunov", "semigroup_lyapunov", "nash", "weighted_sobolev", "ultracontractivity",
             "kernel_constant", "longtime", "groundstate")

TOP_KEYS = {"model", "theta", "grid", "l_max", "t_small", "t_large", "seed", "verify", "out_dir"}
MODEL_KEYS = {"N", "alpha", "beta"}
GRID_KEYS = {"r_max", "m", "grading"}


class ConfigError(ValueError):
    pass


def _default_t_small():
    return np.logspace(-2, 0, 5).tolist()


def _default_t_large():
    return np.geomspace(0.5, 20, 12).tolist()


@dataclass
class RunConfig:
    params: ModelParams
    theta: list = field(default_factory=lambda: [3.0, 4.0, 5.0])
    r_max: float = 20.0
    m: int = 1600
    grading: float = 1.5
    l_max: int = 32
    t_small: list = field(default_factory=_default_t_small)
    t_large: list = field(default_factory=_default_t_large)
    seed: int = 0
    verify: list = field(default_factory=lambda: list(VERIFIERS))
    out_dir: str = "out"

    def weights(self):
        return [ThetaWeight(th, self.params) for th in self.theta]

    def grid(self, refine=False):
        return build_grid(self.r_max, 2 * self.m if refine else self.m, self.grading)

    def to_dict(self):
        return {"model": self.params.as_dict(), "theta": list(self.theta),
                "grid": {"r_max": self.r_max, "m": self.m, "grading": self.grading},
                "l_max": self.l_max, "t_small": list(self.t_small), "t_large": list(self.t_large),
                "seed": self.seed, "verify": list(self.verify), "out_dir": self.out_dir}


def _reject_unknown(given, allowed, where):
    extra = sorted(set(given) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _float_list(value, name):
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{name} must be a non-empty list of numbers")
    try:
        out = [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must contain only numbers") from exc
    if any(v <= 0 for v in out):
        raise ConfigError(f"{name} entries must be positive")
    return out


def config_from_dict(doc: dict) -> RunConfig:
    """Validate a parsed JSON document and fill defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    _reject_unknown(doc, TOP_KEYS, "config")
    if "model" not in doc:
        raise ConfigError("missing required key: model")
    model = doc["model"]
    if not isinstance(model, dict):
        raise ConfigError("model must be an object")
    _reject_unknown(model, MODEL_KEYS, "model")
    missing = sorted(MODEL_KEYS - set(model))
    if missing:
        raise ConfigError(f"model is missing key(s): {', '.join(missing)}")
    try:
        params = ModelParams(model["N"], model["alpha"], model["beta"])
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc

    cfg = RunConfig(params=params)
    if "theta" in doc:
        cfg.theta = _float_list(doc["theta"], "theta")
    grid = doc.get("grid", {})
    if not isinstance(grid, dict):
        raise ConfigError("grid must be an object")
    _reject_unknown(grid, GRID_KEYS, "grid")
    cfg.r_max = float(grid.get("r_max", cfg.r_max))
    cfg.m = grid.get("m", cfg.m)
    cfg.grading = float(grid.get("grading", cfg.grading))
    if "l_max" in doc:
        cfg.l_max = doc["l_max"]
        if not isinstance(cfg.l_max, int) or cfg.l_max < 0:
            raise ConfigError("l_max must be a nonnegative integer")
    if "t_small" in doc:
        cfg.t_small = _float_list(doc["t_small"], "t_small")
    if "t_large" in doc:
        cfg.t_large = _float_list(doc["t_large"], "t_large")
    if "seed" in doc:
        cfg.seed = doc["seed"]
        if not isinstance(cfg.seed, int) or cfg.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
    if "verify" in doc:
        sel = doc["verify"]
        if not isinstance(sel, list):
            raise ConfigError("verify must be a list of verifier names")
        bad = [v for v in sel if v not in VERIFIERS]
        if bad:
            raise ConfigError(f"unknown verifier(s): {', '.join(map(str, bad))}")
        cfg.verify = list(sel)
    if "out_dir" in doc:
        cfg.out_dir = str(doc["out_dir"])

    # re-validate derived objects with their own messages
    try:
        cfg.weights()
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    if not isinstance(cfg.m, int):
        raise ConfigError("grid.m must be an integer")
    try:
        cfg.grid()
    except GridError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc)
