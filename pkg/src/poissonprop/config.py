"""Experiment configuration: JSON schema, dotted overrides, typed view."""

from dataclasses import dataclass, field
import json
from pathlib import Path

import jsonschema

from .errors import ConfigError, ParameterError
from . import fading as fading_mod
from . import path_loss as path_loss_mod

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "required": ["pattern", "path_loss", "fading", "tau", "r_max", "n_reps", "seed"],
    "properties": {
        "pattern": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["square", "triangular", "hexagonal", "poisson",
                                  "cox-mixture", "ginibre", "points"]},
                "s": _POS, "lambda": _POS, "lambda1": _POS, "lambda2": _POS,
                "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "c": _POS,
                "method": {"enum": ["eigen", "kostlan"]},
                "points": {"type": "array", "items": {"type": "array", "items": _NUM,
                                                      "minItems": 2, "maxItems": 2}},
                "radii": {"type": "array", "items": _POS},
            },
        },
        "path_loss": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["power-law", "exp-power", "multi-slope", "tabulated"]}},
        },
        "fading": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["lognormal", "exponential", "deterministic", "product",
                                  "suzuki", "shared-factor"]},
                "sigma": {"oneOf": [{"type": "number", "minimum": 0},
                                    {"type": "array", "items": {"type": "number", "minimum": 0},
                                     "minItems": 1}]},
            },
        },
        "tau": _POS,
        "r_max": _POS,
        "n_reps": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": (1 << 64) - 1},
        "output_dir": {"type": "string"},
        "far_field": {"type": "boolean"},
        "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "t_grid": {"type": "array", "items": _POS, "minItems": 1},
        "r_grid": {"type": "array", "items": _POS, "minItems": 1},
        "u_grid": {"type": "array", "items": _POS, "minItems": 1},
        "mc_samples": {"type": "integer", "minimum": 100},
        "compare": {"type": "array", "items": {"type": "object", "required": ["kind"]}},
        "data": {"type": "string"},
    },
}


def _path_of(err):
    if err.validator == "required":
        missing = err.message.split("'")[1]
        return ".".join([*map(str, err.absolute_path), missing])
    return ".".join(map(str, err.absolute_path)) or "<root>"


def validate(raw):
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        path = _path_of(err)
        msg = "required field missing" if err.validator == "required" else err.message
        raise ConfigError(msg, path)


def parse_value(text):
    """Override values are JSON when they parse as JSON, else plain strings."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw, overrides):
    """Set dotted-path fields in order; later entries win."""
    out = json.loads(json.dumps(raw))
    for path, value in overrides:
        keys = path.split(".")
        node = out
        for k in keys[:-1]:
            nxt = node.get(k)
            if not isinstance(nxt, dict):
                nxt = node[k] = {}
            node = nxt
        node[keys[-1]] = value
    return out


@dataclass
class ExperimentConfig:
    pattern: dict
    path_loss: dict
    fading: dict
    tau: float
    r_max: float
    n_reps: int
    seed: int
    output_dir: str = "out"
    far_field: bool = True
    level: float = 0.01
    t_grid: list = None
    r_grid: list = None
    u_grid: list = None
    mc_samples: int = 100_000
    compare: list = None
    data: str = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def sigmas(self):
        """The σ sweep, or ``[None]`` when the fading law has no σ."""
        s = self.fading.get("sigma")
        if s is None:
            return [None]
        return list(s) if isinstance(s, list) else [s]

    def fading_for(self, sigma):
        spec = dict(self.fading)
        if sigma is not None:
            spec["sigma"] = sigma
        else:
            spec.pop("sigma", None)
        return fading_mod.from_dict(spec)

    def build_path_loss(self):
        return path_loss_mod.from_dict(self.path_loss)


def from_dict(raw):
    validate(raw)
    cfg = ExperimentConfig(**{k: raw[k] for k in raw if k in ExperimentConfig.__dataclass_fields__},
                           raw=raw)
    try:
        cfg.build_path_loss()
    except ParameterError as exc:
        raise ConfigError(str(exc), "path_loss") from None
    for sigma in cfg.sigmas:
        try:
            cfg.fading_for(sigma)
        except ParameterError as exc:
            raise ConfigError(str(exc), "fading") from None
    return cfg


def load(path, overrides=()):
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", str(path)) from None
    return from_dict(apply_overrides(raw, overrides))
