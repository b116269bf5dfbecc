"""Training configuration: defaults, validation, JSON round-trip.

The JSON key for the loss weight is "lambda" (a reserved word in Python, so
the attribute is ``loss_lambda``). Unknown keys are rejected rather than
ignored so typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .errors import ConfigError
from .monotone import SUPPORTED_DEPTHS


@dataclass(frozen=True)
class TrainConfig:
    lr_regressor: float = 3e-5
    lr_transformer: float = 3e-4
    batch_size: int = 32
    loss_lambda: float = 1.0
    epochs: int = 50
    patience: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    cfcl_depth: int = 5
    cfcl_widths: tuple[int, ...] | None = None
    head_h1: int = 128
    head_h2: int = 64
    normalize_pooled: bool = False
    allow_any_depth: bool = False

    def validate(self) -> "TrainConfig":
        if self.lr_regressor <= 0 or self.lr_transformer <= 0:
            raise ConfigError(
                f"learning rates must be > 0, got {self.lr_regressor}/{self.lr_transformer}"
            )
        if self.loss_lambda < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.loss_lambda}")
        if self.batch_size < 2:
            raise ConfigError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.cfcl_depth not in SUPPORTED_DEPTHS and not self.allow_any_depth:
            raise ConfigError(
                f"cfcl_depth {self.cfcl_depth} outside the grid {SUPPORTED_DEPTHS} "
                f"(set allow_any_depth to override)"
            )
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError(f"betas must lie in [0, 1), got ({self.beta1}, {self.beta2})")
        return self


_JSON_KEYS = {
    "lr_regressor": "lr_regressor",
    "lr_transformer": "lr_transformer",
    "batch_size": "batch_size",
    "lambda": "loss_lambda",
    "epochs": "epochs",
    "patience": "patience",
    "beta1": "beta1",
    "beta2": "beta2",
    "adam_eps": "adam_eps",
    "seed": "seed",
    "cfcl_depth": "cfcl_depth",
    "cfcl_widths": "cfcl_widths",
    "head_h1": "head_h1",
    "head_h2": "head_h2",
    "normalize_pooled": "normalize_pooled",
    "allow_any_depth": "allow_any_depth",
}


def config_from_dict(doc: dict) -> TrainConfig:
    unknown = doc.keys() - _JSON_KEYS.keys()
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    kwargs = {}
    for json_key, attr in _JSON_KEYS.items():
        if json_key in doc:
            value = doc[json_key]
            if attr == "cfcl_widths" and value is not None:
                value = tuple(int(v) for v in value)
            kwargs[attr] = value
    return TrainConfig(**kwargs).validate()


def config_to_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["lambda"] = d.pop("loss_lambda")
    if d["cfcl_widths"] is not None:
        d["cfcl_widths"] = list(d["cfcl_widths"])
    return d


def load_config(path: str | Path) -> TrainConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"missing config file {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"unparseable config {path}: {e}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return config_from_dict(doc)


def with_seed(cfg: TrainConfig, seed: int | None) -> TrainConfig:
    return cfg if seed is None else replace(cfg, seed=seed).validate()
