"""Shift-indicator comparison on a two-domain setup.

A domain-specialized model is trained by running the fast-slow controller
(no resets) on in-domain samples for a fixed number of meta-steps. Held-out
in-domain and out-of-domain samples are then scored with several candidate
indicators, and each indicator's separation is the standardized mean
difference between the two groups of window-averaged scores.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import presets
from .controllers import DSUTA, AdaptConfig, suta_adapt
from .harness import source_model
from .model import ParamSet
from .objective import suta_loss
from .optim import OptimizerConfig
from .stream import DomainSpec, TaskSpec, gen_utterance


def window_means(values: Sequence[float], window: int) -> np.ndarray:
    """Means over consecutive non-overlapping windows; a ragged tail is dropped."""
    v = np.asarray(values, dtype=np.float64)
    n = v.size // window
    return v[: n * window].reshape(n, window).mean(axis=1)


def standardized_gap(inside: Sequence[float], outside: Sequence[float]) -> float:
    """``(mean(outside) - mean(inside)) / pooled_sd`` (Cohen's d)."""
    a, b = np.asarray(inside, dtype=np.float64), np.asarray(outside, dtype=np.float64)
    pooled = ((a.size - 1) * a.var(ddof=1) + (b.size - 1) * b.var(ddof=1)) / (a.size + b.size - 2)
    return float((b.mean() - a.mean()) / np.sqrt(pooled))


@dataclass
class SeparationResult:
    gaps: dict
    scores: dict = field(repr=False)
    n_meta_steps: int = 0


def mean_gaps(results: Sequence[SeparationResult]) -> dict:
    return {k: float(np.mean([r.gaps[k] for r in results])) for k in results[0].gaps}


def _default_adapt() -> AdaptConfig:
    a = presets.method_adapt("dsuta")
    return AdaptConfig(N=a["N"], M=a["M"], fast_optimizer=OptimizerConfig(**a["fast_optimizer"]),
                       slow_optimizer=OptimizerConfig(**a["slow_optimizer"]))


def separation_experiment(
    in_domain: Optional[DomainSpec] = None,
    out_domains: Optional[Sequence[DomainSpec]] = None,
    meta_steps: int = 100,
    n_eval: int = 400,
    windows: Sequence[int] = (1, 5, 20),
    seed: int = 0,
    adapt: Optional[AdaptConfig] = None,
    task: Optional[TaskSpec] = None,
) -> SeparationResult:
    """Score held-in vs out-of-domain samples with each candidate indicator.

    Gap keys: ``lii_w{w}`` for each window, ``unnormalized_w5`` for the raw
    loss under the specialized model and ``post_adapt_w5`` for the LII taken
    after fast adaptation of both models.
    """
    pair = [DomainSpec.from_dict(d) for d in presets.separation_domains()]
    in_domain = in_domain or pair[0]
    out_domains = list(out_domains or pair[1:])
    adapt = adapt or _default_adapt()
    task = task or TaskSpec(frame_noise=presets.FRAME_NOISE)
    rng = np.random.default_rng([seed, 7919])
    phi_pre = source_model(task)

    ctrl = DSUTA(phi_pre, adapt)
    for _ in range(meta_steps * adapt.M):
        ctrl.step(gen_utterance(task, in_domain, rng).features)
    phi_d: ParamSet = ctrl.phi_t.copy()

    held_in = [gen_utterance(task, in_domain, rng).features for _ in range(n_eval)]
    picks = rng.integers(len(out_domains), size=n_eval)
    held_out = [gen_utterance(task, out_domains[i], rng).features for i in picks]

    def loss(p, x):
        return suta_loss(p, x, adapt.alpha, adapt.temperature).total

    def score(xs):
        lii, raw, post = [], [], []
        for x in xs:
            ld, lp = loss(phi_d, x), loss(phi_pre, x)
            lii.append(ld - lp)
            raw.append(ld)
            post.append(loss(suta_adapt(phi_d, x, adapt), x) - loss(suta_adapt(phi_pre, x, adapt), x))
        return {"lii": lii, "unnormalized": raw, "post_adapt": post}

    s_in, s_out = score(held_in), score(held_out)
    gaps = {f"lii_w{w}": standardized_gap(window_means(s_in["lii"], w), window_means(s_out["lii"], w))
            for w in windows}
    for key in ("unnormalized", "post_adapt"):
        gaps[f"{key}_w5"] = standardized_gap(window_means(s_in[key], 5), window_means(s_out[key], 5))
    return SeparationResult(gaps, {"in": s_in, "out": s_out}, meta_steps)
