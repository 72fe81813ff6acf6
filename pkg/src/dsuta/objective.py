"""Unsupervised SUTA objective for the linear model and its analytic gradient.

The loss mixes frame-averaged entropy with minimum class confusion computed on
temperature-smoothed probabilities::

    total = alpha * em + (1 - alpha) * mcc

The gradient is written out by hand: upstream gradient w.r.t. the
probabilities, the softmax Jacobian-vector product, a division by the
temperature, then the linear layer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import entr

from .model import ConfigurationError, ParamSet, forward

DEFAULT_ALPHA = 0.3
DEFAULT_TEMPERATURE = 2.5


@dataclass(frozen=True)
class LossBreakdown:
    em: float
    mcc: float
    total: float
    alpha: float
    temperature: float


def _check_hparams(alpha: float, T: float) -> None:
    if T <= 0:
        raise ConfigurationError(f"temperature must be positive, got {T}")
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")


def _log_softmax(logits: np.ndarray, T: float) -> np.ndarray:
    s = logits / T
    s = s - s.max(axis=1, keepdims=True)
    return s - np.log(np.exp(s).sum(axis=1, keepdims=True))


def temperature_softmax(logits: np.ndarray, T: float = DEFAULT_TEMPERATURE) -> np.ndarray:
    """Row-wise ``softmax(logits / T)`` with max subtraction."""
    if T <= 0:
        raise ConfigurationError(f"temperature must be positive, got {T}")
    return np.exp(_log_softmax(np.asarray(logits, dtype=np.float64), T))


def entropy_loss(P: np.ndarray) -> float:
    """Mean per-frame Shannon entropy (nats), with ``0 log 0 = 0``."""
    P = np.asarray(P, dtype=np.float64)
    return float(entr(P).sum() / P.shape[0])


def mcc_loss(P: np.ndarray) -> float:
    """Sum of ``P[:, j] . P[:, j']`` over ordered pairs ``j != j'``.

    Uses the identity ``sum_{j, j'} P_j^T P_j' = sum_i (row sum_i)^2`` and
    subtracts the diagonal ``||P||_F^2``.
    """
    P = np.asarray(P, dtype=np.float64)
    full = float(np.square(P.sum(axis=1)).sum())
    diag = float(np.square(P).sum())
    return max(full - diag, 0.0)


def _breakdown(P, logP, alpha, T):
    L = P.shape[0]
    em = float(-(P * logP).sum() / L)
    rows = P.sum(axis=1)
    mcc = max(float(np.square(rows).sum() - np.square(P).sum()), 0.0)
    return LossBreakdown(em, mcc, alpha * em + (1.0 - alpha) * mcc, alpha, T), rows


def loss_from_logits(
    logits: np.ndarray, alpha: float = DEFAULT_ALPHA, T: float = DEFAULT_TEMPERATURE
) -> LossBreakdown:
    _check_hparams(alpha, T)
    logP = _log_softmax(np.asarray(logits, dtype=np.float64), T)
    return _breakdown(np.exp(logP), logP, alpha, T)[0]


def suta_loss(
    params: ParamSet,
    x: np.ndarray,
    alpha: float = DEFAULT_ALPHA,
    T: float = DEFAULT_TEMPERATURE,
) -> LossBreakdown:
    return loss_from_logits(forward(params, x), alpha, T)


def suta_loss_grad(
    params: ParamSet,
    x: np.ndarray,
    alpha: float = DEFAULT_ALPHA,
    T: float = DEFAULT_TEMPERATURE,
) -> tuple[LossBreakdown, ParamSet]:
    """Loss and gradient w.r.t. every entry of ``params``."""
    _check_hparams(alpha, T)
    x = np.asarray(x, dtype=np.float64)
    logP = _log_softmax(forward(params, x), T)
    P = np.exp(logP)
    loss, rows = _breakdown(P, logP, alpha, T)
    L = P.shape[0]
    # d/dP of each term; row-constant parts vanish under the softmax JVP
    # but are kept so the expression matches the loss literally.
    g = (-alpha / L) * (logP + 1.0) + (2.0 * (1.0 - alpha)) * (rows[:, None] - P)
    dlogits = P * (g - (P * g).sum(axis=1, keepdims=True)) / T
    grad = ParamSet(x.T @ dlogits, dlogits.sum(axis=0))
    return loss, grad


def batched_suta_loss_grad(
    params: ParamSet,
    batch: Sequence[np.ndarray],
    alpha: float = DEFAULT_ALPHA,
    T: float = DEFAULT_TEMPERATURE,
) -> tuple[float, ParamSet]:
    """Mean loss and mean gradient over a list of utterances."""
    if len(batch) == 0:
        raise ValueError("batched loss needs at least one sample")
    total = 0.0
    gw = np.zeros_like(params.weight)
    gb = np.zeros_like(params.bias)
    for x in batch:
        loss, g = suta_loss_grad(params, x, alpha, T)
        total += loss.total
        gw += g.weight
        gb += g.bias
    n = len(batch)
    return total / n, ParamSet(gw / n, gb / n)
