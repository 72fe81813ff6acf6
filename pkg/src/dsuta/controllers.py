"""Online test-time adaptation controllers.

Every controller consumes one utterance at a time through ``step(x)`` and
returns a :class:`StepOutcome`:

* :class:`SourceModel` decodes with the pre-trained parameters.
* :class:`SUTA` adapts a fresh copy of the source parameters on each sample.
* :class:`CSUTA` adapts one parameter set continually, never resetting.
* :class:`DSUTA` keeps slow meta-parameters ``phi_t``; each sample is decoded
  after ``N`` fast steps starting from ``phi_t``, and every ``M`` samples the
  buffered utterances drive one meta-update of ``phi_t``. A
  :class:`~dsuta.reset.ResetStrategy` may send ``phi_t`` back to the source.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .counters import StepCounters
from .model import ConfigurationError, ParamSet, forward, greedy_ctc_decode, restore, snapshot
from .objective import (
    DEFAULT_ALPHA,
    DEFAULT_TEMPERATURE,
    batched_suta_loss_grad,
    loss_from_logits,
    suta_loss_grad,
)
from .optim import Optimizer, OptimizerConfig
from .reset import ResetStrategy


class AdaptationError(RuntimeError):
    """Non-finite loss or parameters during adaptation."""


@dataclass(frozen=True)
class AdaptConfig:
    N: int = 10
    M: int = 5
    alpha: float = DEFAULT_ALPHA
    temperature: float = DEFAULT_TEMPERATURE
    fast_optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    slow_optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    # False replaces the slow update with the identity map
    update_enabled: bool = True
    blank: int = 0

    def __post_init__(self):
        if self.N < 0:
            raise ConfigurationError("N must be >= 0")
        if self.M < 1:
            raise ConfigurationError("M must be >= 1")
        if self.temperature <= 0 or not 0 <= self.alpha <= 1:
            raise ConfigurationError("need temperature > 0 and alpha in [0, 1]")


@dataclass
class StepOutcome:
    prediction: list
    adapted_loss_trace: list
    meta_updated: bool = False
    reset_fired: bool = False
    lii: Optional[float] = None
    z: Optional[float] = None


def _checked(loss: float, where: str, t: int) -> float:
    if not np.isfinite(loss):
        raise AdaptationError(f"non-finite loss {loss!r} during {where} at sample t={t}")
    return loss


def _adapt(
    phi_start: ParamSet,
    x: np.ndarray,
    cfg: AdaptConfig,
    opt: Optimizer,
    counters: Optional[StepCounters] = None,
    t: int = 0,
) -> tuple[ParamSet, list, np.ndarray]:
    """N fast steps; returns final params, loss trace and final logits."""
    phi = phi_start
    trace = []
    for _ in range(cfg.N):
        loss, grad = suta_loss_grad(phi, x, cfg.alpha, cfg.temperature)
        trace.append(_checked(loss.total, "fast adaptation", t))
        phi = opt.step(phi, grad)
        if counters is not None:
            counters.add(1, 1)
    logits = forward(phi, x)
    # the decoding forward is only tallied when no adaptation pass preceded it
    if counters is not None and cfg.N == 0:
        counters.add(1, 0)
    trace.append(_checked(loss_from_logits(logits, cfg.alpha, cfg.temperature).total, "decode", t))
    return phi, trace, logits


def suta_adapt(phi_start: ParamSet, x: np.ndarray, cfg: AdaptConfig) -> ParamSet:
    """N steps from a copy of ``phi_start`` with a fresh fast optimizer."""
    phi, _, _ = _adapt(snapshot(phi_start), x, cfg, Optimizer(cfg.fast_optimizer))
    return phi


class Controller:
    method = "abstract"

    def __init__(self, phi_pre: ParamSet, cfg: AdaptConfig, counters: Optional[StepCounters] = None):
        self.phi_pre = snapshot(phi_pre)
        self.cfg = cfg
        self.counters = counters if counters is not None else StepCounters()
        self.t = 0

    def step(self, x: np.ndarray) -> StepOutcome:  # pragma: no cover
        raise NotImplementedError


class SourceModel(Controller):
    method = "source"

    def step(self, x):
        self.t += 1
        logits = forward(self.phi_pre, x)
        self.counters.add(1, 0)
        loss = loss_from_logits(logits, self.cfg.alpha, self.cfg.temperature).total
        return StepOutcome(greedy_ctc_decode(logits, self.cfg.blank), [loss])


class SUTA(Controller):
    method = "suta"

    def step(self, x):
        self.t += 1
        opt = Optimizer(self.cfg.fast_optimizer)
        _, trace, logits = _adapt(self.phi_pre, x, self.cfg, opt, self.counters, self.t)
        return StepOutcome(greedy_ctc_decode(logits, self.cfg.blank), trace)


class CSUTA(Controller):
    """Continual SUTA; the optimizer state persists along with the parameters."""

    method = "csuta"

    def __init__(self, phi_pre, cfg, counters=None):
        super().__init__(phi_pre, cfg, counters)
        self.phi = snapshot(self.phi_pre)
        self.opt = Optimizer(cfg.fast_optimizer)

    def step(self, x):
        self.t += 1
        self.phi, trace, logits = _adapt(self.phi, x, self.cfg, self.opt, self.counters, self.t)
        return StepOutcome(greedy_ctc_decode(logits, self.cfg.blank), trace)


class DSUTA(Controller):
    """Fast-slow SUTA with an optional reset strategy.

    The meta-update on sample ``t`` (when ``t % M == 0``) happens after the
    prediction for ``t`` and uses the current ``phi_t`` on the raw buffered
    utterances. A reset at ``t`` restores ``phi_pre``, drops the buffer without
    a meta-update, and zeroes the slow optimizer. The batched meta-gradient is
    still evaluated at every ``M``-th sample before the reset decision is
    applied, so compute per ``M`` samples is the same with or without resets.
    """

    method = "dsuta"

    def __init__(self, phi_pre, cfg, counters=None, reset: Optional[ResetStrategy] = None):
        super().__init__(phi_pre, cfg, counters)
        self.phi_t = snapshot(self.phi_pre)
        self.buffer: list = []
        self.slow_opt = Optimizer(cfg.slow_optimizer)
        self.reset_strategy = reset if reset is not None else ResetStrategy()
        self.last_z: Optional[float] = None

    def reset_to_source(self) -> None:
        restore(self.phi_t, self.phi_pre)
        self.buffer.clear()
        self.slow_opt.reset()

    def step(self, x):
        self.t += 1
        t, cfg = self.t, self.cfg
        self.last_z = None
        strategy = self.reset_strategy
        strategy.begin(t, self)

        opt = Optimizer(cfg.fast_optimizer)
        _, trace, logits = _adapt(self.phi_t, x, cfg, opt, self.counters, t)
        out = StepOutcome(greedy_ctc_decode(logits, cfg.blank), trace)

        self.buffer.append(x)
        out.lii = strategy.observe(t, x, self)
        out.reset_fired = strategy.should_reset(t, self)
        out.z = self.last_z
        grad = None
        if t % cfg.M == 0 and cfg.update_enabled and self.buffer:
            # evaluated on schedule even when a reset then discards it
            loss, grad = batched_suta_loss_grad(self.phi_t, self.buffer, cfg.alpha, cfg.temperature)
            self.counters.add(1, 1)
        if out.reset_fired:
            self.reset_to_source()
        elif t % cfg.M == 0:
            if grad is not None:
                _checked(loss, "meta-update", t)
                self.phi_t = self.slow_opt.step(self.phi_t, grad)
                out.meta_updated = True
            self.buffer.clear()
        strategy.end(t, self, out.reset_fired)
        return out


METHODS = {c.method: c for c in (SourceModel, SUTA, CSUTA, DSUTA)}
