"""Per-frame linear sequence classifier and greedy CTC decoding.

The toy model maps a feature sequence ``x`` of shape ``(L, d)`` to logits of
shape ``(L, C)`` with ``x @ weight + bias``. It stands in for a CTC acoustic
model: every adaptation routine in this package treats it as an opaque
parameter set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConfigurationError(ValueError):
    """Raised for shape mismatches and invalid hyper-parameters."""


@dataclass
class ParamSet:
    """All adaptable parameters: ``weight`` (d, C) and ``bias`` (C,)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ConfigurationError(
                f"incompatible shapes weight={self.weight.shape} bias={self.bias.shape}"
            )

    @property
    def d(self) -> int:
        return self.weight.shape[0]

    @property
    def C(self) -> int:
        return self.weight.shape[1]

    @classmethod
    def zeros(cls, d: int, C: int) -> "ParamSet":
        return cls(np.zeros((d, C)), np.zeros(C))

    @classmethod
    def random(cls, d: int, C: int, rng: np.random.Generator, scale: float = 1.0) -> "ParamSet":
        return cls(scale * rng.standard_normal((d, C)), scale * rng.standard_normal(C))

    def copy(self) -> "ParamSet":
        return ParamSet(self.weight.copy(), self.bias.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weight.ravel(), self.bias])

    def equals(self, other: "ParamSet") -> bool:
        """Bit-exact equality."""
        return np.array_equal(self.weight, other.weight) and np.array_equal(self.bias, other.bias)

    # linear combinations, used by property tests and optimizers
    def __add__(self, other: "ParamSet") -> "ParamSet":
        return ParamSet(self.weight + other.weight, self.bias + other.bias)

    def __mul__(self, a: float) -> "ParamSet":
        return ParamSet(a * self.weight, a * self.bias)

    __rmul__ = __mul__


def _check_frames(params: ParamSet, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ConfigurationError(f"features must be a non-empty (L, d) matrix, got {x.shape}")
    if x.shape[1] != params.d:
        raise ConfigurationError(f"feature dim {x.shape[1]} != model dim {params.d}")
    return x


def forward(params: ParamSet, x: np.ndarray) -> np.ndarray:
    """Logits ``x @ weight + bias`` with shape (L, C)."""
    x = _check_frames(params, x)
    return x @ params.weight + params.bias


def greedy_ctc_decode(logits: np.ndarray, blank: int = 0) -> list[int]:
    """Best-path decoding: frame argmax, merge repeats, drop blanks.

    ``np.argmax`` returns the first maximal index, so ties go to the lowest
    class id.
    """
    logits = np.asarray(logits)
    if not 0 <= blank < logits.shape[1]:
        raise ConfigurationError(f"blank id {blank} outside [0, {logits.shape[1]})")
    path = np.argmax(logits, axis=1)
    keep = np.ones(len(path), dtype=bool)
    keep[1:] = path[1:] != path[:-1]
    return [int(c) for c in path[keep] if c != blank]


def snapshot(params: ParamSet) -> ParamSet:
    """Deep value copy."""
    return params.copy()


def restore(dst: ParamSet, src: ParamSet) -> None:
    """Overwrite ``dst`` in place with the values of ``src``."""
    if dst.weight.shape != src.weight.shape or dst.bias.shape != src.bias.shape:
        raise ConfigurationError("cannot restore parameters of a different shape")
    np.copyto(dst.weight, src.weight)
    np.copyto(dst.bias, src.bias)
