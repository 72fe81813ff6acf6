"""Plain gradient descent and Adam-style updates over ``ParamSet``."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .model import ConfigurationError, ParamSet


@dataclass(frozen=True)
class OptimizerConfig:
    kind: Literal["plain-gd", "adaptive-moment"] = "adaptive-moment"
    learning_rate: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("plain-gd", "adaptive-moment"):
            raise ConfigurationError(f"unknown optimizer kind {self.kind!r}")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError("moment decay rates must lie in (0, 1)")
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")


@dataclass
class OptimizerState:
    m: Optional[ParamSet] = None
    v: Optional[ParamSet] = None
    step: int = 0


def reset_state(state: OptimizerState) -> None:
    state.m = None
    state.v = None
    state.step = 0


def _check(params: ParamSet, grad: ParamSet) -> None:
    if params.weight.shape != grad.weight.shape or params.bias.shape != grad.bias.shape:
        raise ConfigurationError("gradient shape does not match parameters")


def step(params: ParamSet, grad: ParamSet, state: OptimizerState, cfg: OptimizerConfig) -> ParamSet:
    """Return updated parameters; ``state`` is advanced in place."""
    _check(params, grad)
    state.step += 1
    lr = cfg.learning_rate
    if cfg.kind == "plain-gd":
        return ParamSet(params.weight - lr * grad.weight, params.bias - lr * grad.bias)

    if state.m is None:
        state.m = ParamSet.zeros(params.d, params.C)
        state.v = ParamSet.zeros(params.d, params.C)
    b1, b2, t = cfg.beta1, cfg.beta2, state.step
    out = []
    for p, g, m, v in (
        (params.weight, grad.weight, state.m.weight, state.v.weight),
        (params.bias, grad.bias, state.m.bias, state.v.bias),
    ):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        out.append(p - lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon))
    return ParamSet(*out)


@dataclass
class Optimizer:
    """Config and state bundled together; what the controllers hold."""

    cfg: OptimizerConfig = field(default_factory=OptimizerConfig)
    state: OptimizerState = field(default_factory=OptimizerState)

    def step(self, params: ParamSet, grad: ParamSet) -> ParamSet:
        return step(params, grad, self.state, self.cfg)

    def reset(self) -> None:
        reset_state(self.state)
