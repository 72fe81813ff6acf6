"""Model-reset strategies for the fast-slow controller.

Three strategies share one small hook interface (``begin``, ``observe``,
``should_reset``, ``end``) called by :class:`dsuta.controllers.DSUTA` once per
sample, in stream order:

* :class:`FixedReset` resets every ``freq`` samples.
* :class:`OracleReset` resets at known domain boundaries.
* :class:`DynamicReset` builds a base domain from ``K`` samples after each
  reset and then runs a right-tailed z-test on buffer-averaged Loss
  Improvement Index values every ``M`` samples, resetting after ``P``
  consecutive exceedances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Optional, Sequence

import numpy as np

from .model import ConfigurationError, ParamSet, snapshot
from .objective import DEFAULT_ALPHA, DEFAULT_TEMPERATURE, suta_loss

if TYPE_CHECKING:  # pragma: no cover
    from .controllers import DSUTA

Z_THRESHOLD = 2.0
SIGMA_FLOOR = 1e-12


def lii(
    phi_d: ParamSet,
    phi_pre: ParamSet,
    x: np.ndarray,
    alpha: float = DEFAULT_ALPHA,
    T: float = DEFAULT_TEMPERATURE,
) -> float:
    """Loss Improvement Index ``L(phi_d, x) - L(phi_pre, x)`` (two forwards)."""
    return suta_loss(phi_d, x, alpha, T).total - suta_loss(phi_pre, x, alpha, T).total


@dataclass(frozen=True)
class GaussianStats:
    mu: float
    sigma: float
    n_samples: int


def fit_gaussian(values: Sequence[float]) -> GaussianStats:
    """Sample mean and (n-1) standard deviation, sigma floored at 1e-12."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ConfigurationError(
            f"need at least 2 LII values to fit statistics, got {v.size} (K too small)"
        )
    return GaussianStats(float(v.mean()), max(float(v.std(ddof=1)), SIGMA_FLOOR), int(v.size))


def shift_z(liis: Sequence[float], stats: GaussianStats) -> float:
    """z-score of the window mean: ``(mean - mu) * sqrt(M) / sigma``."""
    v = np.asarray(liis, dtype=np.float64)
    return float((v.mean() - stats.mu) * math.sqrt(v.size) / stats.sigma)


class ResetStrategy:
    """No-op base class: never resets."""

    name = "none"

    def begin(self, t: int, ctrl: "DSUTA") -> None:
        pass

    def observe(self, t: int, x: np.ndarray, ctrl: "DSUTA") -> Optional[float]:
        return None

    def should_reset(self, t: int, ctrl: "DSUTA") -> bool:
        return False

    def end(self, t: int, ctrl: "DSUTA", reset: bool) -> None:
        pass

    def describe(self) -> dict:
        return {"variant": self.name}


NoReset = ResetStrategy


def fixed_reset_step(freq: int, t: int) -> bool:
    if freq < 1:
        raise ConfigurationError("reset frequency must be >= 1")
    return t % freq == 0


def oracle_reset_step(boundaries: Iterable[int], t: int) -> bool:
    return t in boundaries


class FixedReset(ResetStrategy):
    name = "fixed"

    def __init__(self, freq: int = 50):
        if freq < 1:
            raise ConfigurationError("reset frequency must be >= 1")
        self.freq = freq

    def should_reset(self, t, ctrl):
        return fixed_reset_step(self.freq, t)

    def describe(self):
        return {"variant": self.name, "freq": self.freq}


class OracleReset(ResetStrategy):
    name = "oracle"

    def __init__(self, boundaries: Iterable[int]):
        self.boundaries = frozenset(int(b) for b in boundaries)

    def should_reset(self, t, ctrl):
        return oracle_reset_step(self.boundaries, t)

    def describe(self):
        return {"variant": self.name, "n_boundaries": len(self.boundaries)}


@dataclass
class DetectorState:
    K: int
    P: int
    k: int
    phase: str = "construction"
    last_reset: int = 0
    patience_counter: int = 0
    phi_d: Optional[ParamSet] = None
    collected_liis: list = field(default_factory=list)
    stats: Optional[GaussianStats] = None
    # LII of every sample currently sitting in the controller's buffer
    window_liis: list = field(default_factory=list)

    def clear(self, r: int) -> None:
        self.phase = "construction"
        self.last_reset = r
        self.patience_counter = 0
        self.phi_d = None
        self.collected_liis = []
        self.stats = None
        self.window_liis = []


class DynamicReset(ResetStrategy):
    """Domain construction followed by windowed z-test shift detection.

    Before the domain snapshot exists, the indicator is still evaluated
    against the current meta-parameters and logged, so every sample costs
    exactly two extra forwards. Those provisional values never enter the
    statistics or the test.
    """

    name = "dynamic"

    def __init__(self, K: int = 100, P: int = 2):
        if K < 4:
            raise ConfigurationError("K must leave at least 2 LII values for fitting")
        if P < 1:
            raise ConfigurationError("patience must be >= 1")
        self.state = DetectorState(K=K, P=P, k=K // 2)
        self.events: list[dict] = []

    @property
    def r(self) -> int:
        return self.state.last_reset

    def begin(self, t, ctrl):
        s = self.state
        if t == s.last_reset + s.k:
            s.phi_d = snapshot(ctrl.phi_t)

    def observe(self, t, x, ctrl):
        s = self.state
        ref = s.phi_d if s.phi_d is not None else ctrl.phi_t
        value = lii(ref, ctrl.phi_pre, x, ctrl.cfg.alpha, ctrl.cfg.temperature)
        ctrl.counters.add(forwards=2)
        if s.phi_d is None:
            return value
        s.window_liis.append(value)
        if s.last_reset + s.k < t <= s.last_reset + s.K:
            s.collected_liis.append(value)
        return value

    def should_reset(self, t, ctrl):
        s = self.state
        if t % ctrl.cfg.M != 0:
            return False
        window, s.window_liis = s.window_liis, []
        if s.phase != "detection" or t <= s.last_reset + s.K:
            return False
        z = shift_z(window[-ctrl.cfg.M:], s.stats)
        s.patience_counter = s.patience_counter + 1 if z > Z_THRESHOLD else 0
        fired = s.patience_counter >= s.P
        self.events.append({"t": t, "z": z, "patience_counter": s.patience_counter, "fired": fired})
        ctrl.last_z = z
        return fired

    def end(self, t, ctrl, reset):
        s = self.state
        if reset:
            s.clear(t)
            return
        if t == s.last_reset + s.K:
            s.stats = fit_gaussian(s.collected_liis)
            s.phase = "detection"

    def describe(self):
        return {"variant": self.name, "K": self.state.K, "P": self.state.P}


def make_strategy(spec: Optional[dict], boundaries: Iterable[int] = ()) -> ResetStrategy:
    """Build a strategy from a config mapping such as ``{"variant": "fixed", "freq": 50}``."""
    if not spec or spec.get("variant", "none") == "none":
        return ResetStrategy()
    variant = spec["variant"]
    if variant == "fixed":
        return FixedReset(int(spec.get("freq", 50)))
    if variant == "oracle":
        return OracleReset(spec.get("boundaries", boundaries))
    if variant == "dynamic":
        return DynamicReset(int(spec.get("K", 100)), int(spec.get("P", 2)))
    raise ConfigurationError(f"unknown reset variant {variant!r}")
