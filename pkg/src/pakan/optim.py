"""Adam with bias correction and the stepwise learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigError, ContractError
from .tensorgraph import ParamStore


@dataclass
class TrainConfig:
    """Training hyperparameters and variant flags.

    ``epochs`` defaults to the desk-scale 60; the reference protocol value is
    500 and can be set via config file or CLI flag.  Config files hold
    ``key = value`` lines whose keys are exactly these field names.
    """

    epochs: int = 60
    batch_size: int = 32
    lr: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0
    step_size: int = 100
    gamma: float = 0.7
    seed: int = 0
    dataset: str = ""
    bands: int = 4
    feature_width: int = 16
    depth: int = 2
    pa: bool = True
    kan: bool = True
    use_1d: bool = True
    use_2d: bool = True

    def __post_init__(self):
        for name in ("epochs", "batch_size", "step_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("lr", "gamma"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")


def parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config_text(text: str) -> TrainConfig:
    """Parse ``key = value`` lines; unknown keys are errors."""
    spec = {f.name: f.type for f in fields(TrainConfig)}
    kw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, eq, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not eq:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if key not in spec:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        kind = spec[key]
        if kind == "bool":
            kw[key] = parse_bool(value)
        elif kind == "int":
            kw[key] = int(value)
        elif kind == "float":
            kw[key] = float(value)
        else:
            kw[key] = value
    return TrainConfig(**kw)


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """Stepped decay: lr * gamma^floor(epoch / step_size)."""
    if epoch < 0:
        raise ConfigError("epoch must be >= 0")
    return cfg.lr * cfg.gamma ** (epoch // cfg.step_size)


@dataclass
class AdamState:
    """First/second moment estimates per trainable parameter."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ParamStore, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8,
                   weight_decay: float = 0.0) -> "AdamState":
        state = cls(beta1, beta2, eps, weight_decay)
        for name, p in params.trainable_items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state


def adam_step(params: ParamStore, state: AdamState, lr: float) -> None:
    """One bias-corrected update; clears all gradients afterwards."""
    if not params.has_fresh_grads():
        raise ContractError(
            "adam_step called without a backward pass since the last step "
            "(stale gradients)")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.trainable_items():
        g = p.grad
        if state.weight_decay != 0.0:
            g = g + state.weight_decay * p.data
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    params.zero_grad()
