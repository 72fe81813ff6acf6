"""Shipped stream and run configurations.

Every domain composes a rotation shared by all domains (the part of the shift
that transfers between domains) with a domain-specific rotation. Easy
domains use smaller angles than hard ones. The long pool mixes all ten.
"""
from __future__ import annotations

import copy

from .model import ConfigurationError

SHARED_SEED = 100
SHARED_ANGLE = 1.4
HARD_ANGLE = 0.8
EASY_SHARED_ANGLE = 0.9
EASY_ANGLE = 0.5
FRAME_NOISE = 0.35
SEPARATION_ANGLE = 1.6

HARD_IDS = [f"hard{i}" for i in range(5)]
EASY_IDS = [f"easy{i}" for i in range(5)]


def _domain(id: str, shared: float, specific: float, seed: int) -> dict:
    return {
        "id": id,
        "severity": 1.0,
        "corruptions": [
            {"kind": "channel_mix", "scale": shared, "seed": SHARED_SEED},
            {"kind": "channel_mix", "scale": specific, "seed": seed},
        ],
    }


def hard_domains() -> list:
    return [_domain(id, SHARED_ANGLE, HARD_ANGLE, 200 + i) for i, id in enumerate(HARD_IDS)]


def easy_domains() -> list:
    return [_domain(id, EASY_SHARED_ANGLE, EASY_ANGLE, 300 + i) for i, id in enumerate(EASY_IDS)]


def stationary_domain() -> dict:
    """Single mildly rotated domain used for detector calibration runs."""
    return _domain("stationary", 0.6, 0.3, 400)


def separation_domains() -> list:
    """Two domains for indicator comparisons: same shared part, distinct specific parts."""
    return [_domain(id, SHARED_ANGLE, SEPARATION_ANGLE, 500 + i) for i, id in enumerate(("sepA", "sepB"))]


def _task() -> dict:
    return {"frame_noise": FRAME_NOISE}


def md_hard(segment_length: int = 500) -> dict:
    return {"name": f"md-hard-s{segment_length}", "task": _task(), "domains": hard_domains(),
            "order": HARD_IDS, "segment_length": segment_length, "total": 2500}


def md_easy(segment_length: int = 500) -> dict:
    return {"name": f"md-easy-s{segment_length}", "task": _task(), "domains": easy_domains(),
            "order": EASY_IDS, "segment_length": segment_length, "total": 2500}


def md_long(total: int = 10000) -> dict:
    return {"name": "md-long", "task": _task(), "domains": easy_domains() + hard_domains(),
            "long": {"total": total, "min_len": 20, "max_len": 500}}


def stationary(total: int = 2000, shift_at: int = 0, factor: float = 5.0) -> dict:
    """One domain; with ``shift_at`` the severity jumps by ``factor`` after that sample."""
    dom = stationary_domain()
    if not shift_at:
        return {"name": "stationary", "task": _task(), "domains": [dom], "segments": [[dom["id"], total]]}
    shifted = copy.deepcopy(dom)
    shifted["id"] = f"{dom['id']}x{factor:g}"
    shifted["severity"] = dom["severity"] * factor
    return {"name": f"stationary-shift{shift_at}", "task": _task(), "domains": [dom, shifted],
            "segments": [[dom["id"], shift_at], [shifted["id"], total - shift_at]]}


PRESETS = {
    "md-hard": md_hard,
    "md-easy": md_easy,
    "md-long": md_long,
    "stationary": stationary,
}


def stream_config(name: str) -> dict:
    """Preset by name; ``md-hard-s20`` style suffixes set the segment length."""
    base, _, suffix = name.rpartition("-s")
    if base in ("md-hard", "md-easy") and suffix.isdigit():
        return PRESETS[base](int(suffix))
    if name not in PRESETS:
        raise ConfigurationError(f"unknown stream preset {name!r}; known: {sorted(PRESETS)}")
    return PRESETS[name]()


def method_adapt(method: str) -> dict:
    """Adaptation settings per method: N=10 for SUTA, N=1 for CSUTA, (M, N)=(5, 5) for DSUTA."""
    fast = {"kind": "adaptive-moment", "learning_rate": 1e-2}
    slow = {"kind": "adaptive-moment", "learning_rate": 4e-3}
    N = {"source": 0, "suta": 10, "csuta": 1, "dsuta": 5}[method]
    return {"N": N, "M": 5, "fast_optimizer": fast, "slow_optimizer": slow}


def run_config(method: str, stream: str, reset: dict | None = None, seeds=(0, 1, 2), name: str = "") -> dict:
    cfg = {"method": method, "stream": {"preset": stream}, "adapt": method_adapt(method),
           "reset": reset or {"variant": "none"}, "seeds": list(seeds)}
    if name:
        cfg["name"] = name
    return cfg
