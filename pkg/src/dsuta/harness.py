"""Experiment runner: stream x controller x reset strategy, over seeds.

A run produces a :class:`RunReport` holding one record per sample and seed,
per-seed and mean-over-seed aggregates, step counters and the detector event
log. Reports are written to a directory as ``records.jsonl``,
``summary.json`` and ``curve.csv``.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import presets
from .controllers import DSUTA, METHODS, AdaptationError, AdaptConfig
from .counters import StepCounters
from .metrics import edit_distance, smooth_curve
from .model import ConfigurationError, ParamSet
from .optim import OptimizerConfig
from .reset import make_strategy
from .stream import TaskSpec, build_stream, fit_source_model, stream_spec_from_config

log = logging.getLogger(__name__)

CURVE_WINDOW = 100


@dataclass(frozen=True)
class RunConfig:
    method: str
    stream: dict
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    reset: Optional[dict] = None
    seeds: tuple = (0, 1, 2)
    source: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; expected one of {sorted(METHODS)}")
        variant = (self.reset or {}).get("variant", "none")
        if variant != "none" and self.method != "dsuta":
            raise ConfigurationError("reset strategies only apply to method 'dsuta'")
        if not self.seeds:
            raise ConfigurationError("need at least one seed")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        variant = (self.reset or {}).get("variant", "none")
        return self.method if variant == "none" else f"{self.method}+{variant}"

    def to_dict(self) -> dict:
        a = dataclasses.asdict(self.adapt)
        return {
            "name": self.label,
            "method": self.method,
            "reset": self.reset or {"variant": "none"},
            "adapt": a,
            "stream": self.stream,
            "seeds": list(self.seeds),
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        a = dict(d.get("adapt", {}))
        for key in ("fast_optimizer", "slow_optimizer"):
            if key in a:
                a[key] = OptimizerConfig(**a[key])
        return cls(
            method=d["method"],
            stream=d["stream"],
            adapt=AdaptConfig(**a),
            reset=d.get("reset"),
            seeds=tuple(int(s) for s in d.get("seeds", (0, 1, 2))),
            source=dict(d.get("source", {})),
            name=d.get("name", ""),
        )


def resolve_stream_config(stream) -> dict:
    """Expand ``{"preset": name, ...overrides}`` or a bare preset name."""
    if isinstance(stream, str):
        return presets.stream_config(stream)
    if "preset" in stream:
        base = presets.stream_config(stream["preset"])
        base.update({k: v for k, v in stream.items() if k != "preset"})
        return base
    return stream


@lru_cache(maxsize=16)
def _source_model(task: TaskSpec, n_utterances: int, l2: float, seed: int) -> ParamSet:
    return fit_source_model(task, n_utterances, seed, l2)


def source_model(task: TaskSpec, source: Optional[dict] = None) -> ParamSet:
    """Pre-trained parameters for ``task``; always a fresh copy."""
    s = source or {}
    return _source_model(task, int(s.get("n_utterances", 300)), float(s.get("l2", 1e-2)),
                         int(s.get("seed", 0))).copy()


@dataclass
class SeedResult:
    seed: int
    records: list
    counters: dict
    events: list
    failed: bool = False
    diagnostic: str = ""

    @property
    def edits(self) -> int:
        return sum(r["edits"] for r in self.records)

    @property
    def ref_tokens(self) -> int:
        return sum(r["ref_len"] for r in self.records)

    def aggregate(self) -> dict:
        errs = [r["token_error"] for r in self.records]
        return {
            "seed": self.seed,
            "token_error_rate": self.edits / self.ref_tokens if self.ref_tokens else float("nan"),
            "mean_sample_error": float(np.mean(errs)) if errs else float("nan"),
            "n_samples": len(self.records),
            "n_resets": sum(1 for r in self.records if r["reset_fired"]),
            "counters": self.counters,
            "failed": self.failed,
        }


@dataclass
class RunReport:
    config: dict
    stream_fingerprint: str
    seeds: list

    @property
    def failed(self) -> bool:
        return any(s.failed for s in self.seeds)

    @property
    def label(self) -> str:
        return self.config["name"]

    def summary(self) -> dict:
        per_seed = [s.aggregate() for s in self.seeds]
        return {
            "config": self.config,
            "stream_fingerprint": self.stream_fingerprint,
            "aggregate_definition": "token_error_rate = total edits / total reference tokens (micro-average)",
            "per_seed": per_seed,
            "token_error_rate": float(np.mean([p["token_error_rate"] for p in per_seed])),
            "mean_sample_error": float(np.mean([p["mean_sample_error"] for p in per_seed])),
            "n_resets": float(np.mean([p["n_resets"] for p in per_seed])),
            "failed": self.failed,
            "diagnostics": [s.diagnostic for s in self.seeds if s.failed],
        }

    @property
    def token_error_rate(self) -> float:
        return self.summary()["token_error_rate"]

    def sample_errors(self) -> np.ndarray:
        """Per-sample error, averaged over seeds (shape (T,))."""
        T = min(len(s.records) for s in self.seeds)
        return np.mean([[r["token_error"] for r in s.records[:T]] for s in self.seeds], axis=0)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.summary(), sort_keys=True).encode())
        for s in self.seeds:
            for r in s.records:
                h.update(json.dumps(r, sort_keys=True).encode())
        return h.hexdigest()

    # -- persistence
    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "records.jsonl", "w") as fh:
            for s in self.seeds:
                for r in s.records:
                    fh.write(json.dumps({"seed": s.seed, **r}) + "\n")
        with open(out / "events.jsonl", "w") as fh:
            for s in self.seeds:
                for e in s.events:
                    fh.write(json.dumps({"seed": s.seed, **e}) + "\n")
        summary = self.summary()
        summary["digest"] = self.digest()
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
        errs = self.sample_errors()
        smooth = smooth_curve(errs, CURVE_WINDOW)
        with open(out / "curve.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "token_error", f"smoothed_{CURVE_WINDOW}"])
            for t, (e, s) in enumerate(zip(errs, smooth), 1):
                w.writerow([t, repr(float(e)), repr(float(s))])
        return out

    @classmethod
    def read(cls, out_dir) -> "RunReport":
        out = Path(out_dir)
        summary = json.loads((out / "summary.json").read_text())
        by_seed: dict = {}
        with open(out / "records.jsonl") as fh:
            for line in fh:
                r = json.loads(line)
                by_seed.setdefault(r.pop("seed"), []).append(r)
        events: dict = {}
        ev_path = out / "events.jsonl"
        if ev_path.exists():
            with open(ev_path) as fh:
                for line in fh:
                    e = json.loads(line)
                    events.setdefault(e.pop("seed"), []).append(e)
        seeds = []
        for p in summary["per_seed"]:
            seeds.append(SeedResult(p["seed"], by_seed.get(p["seed"], []), p["counters"],
                                    events.get(p["seed"], []), p["failed"]))
        for s, diag in zip([s for s in seeds if s.failed], summary.get("diagnostics", [])):
            s.diagnostic = diag
        return cls(summary["config"], summary["stream_fingerprint"], seeds)


def _fingerprint(stream_cfg: dict, seeds: Sequence[int]) -> str:
    blob = json.dumps({"stream": stream_cfg, "seeds": list(seeds)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_seed(cfg: RunConfig, seed: int, stream_cfg: Optional[dict] = None) -> SeedResult:
    stream_cfg = stream_cfg or resolve_stream_config(cfg.stream)
    spec = stream_spec_from_config(stream_cfg, seed)
    stream = build_stream(spec)
    phi_pre = source_model(spec.task, cfg.source)
    counters = StepCounters()
    if cfg.method == "dsuta":
        strategy = make_strategy(cfg.reset, stream.boundaries)
        ctrl = DSUTA(phi_pre, cfg.adapt, counters, strategy)
    else:
        strategy = None
        ctrl = METHODS[cfg.method](phi_pre, cfg.adapt, counters)
    records = []
    for u in stream:
        try:
            out = ctrl.step(u.features)
        except AdaptationError as exc:
            log.error("seed %d aborted: %s", seed, exc)
            return SeedResult(seed, records, counters.as_dict(),
                              list(getattr(strategy, "events", [])), True, str(exc))
        edits = edit_distance(out.prediction, u.reference)
        records.append({
            "t": u.t,
            "domain_id": u.domain_id,
            "edits": edits,
            "ref_len": len(u.reference),
            "token_error": edits / len(u.reference),
            "reset_fired": out.reset_fired,
            "meta_updated": out.meta_updated,
            "z": out.z,
            "lii": out.lii,
        })
    return SeedResult(seed, records, counters.as_dict(), list(getattr(strategy, "events", [])))


def run_experiment(cfg: RunConfig) -> RunReport:
    stream_cfg = resolve_stream_config(cfg.stream)
    seeds = [run_seed(cfg, s, stream_cfg) for s in cfg.seeds]
    return RunReport(cfg.to_dict(), _fingerprint(stream_cfg, cfg.seeds), seeds)


def compare_report(reports: Sequence[RunReport], window: int = CURVE_WINDOW) -> dict:
    """Aggregate table plus smoothed per-sample error differences vs the source run.

    Rows are ordered by run label. The baseline is the ``source`` run when
    present, otherwise the first row.
    """
    if len(reports) < 2:
        raise ValueError("comparison needs at least two reports")
    fps = {r.stream_fingerprint for r in reports}
    if len(fps) != 1:
        raise ConfigurationError("reports were produced on different streams")
    ordered = sorted(reports, key=lambda r: r.label)
    base = next((r for r in ordered if r.config["method"] == "source"), ordered[0])
    base_err = base.sample_errors()
    rows, curves = [], {}
    for r in ordered:
        s = r.summary()
        rows.append({
            "name": r.label,
            "token_error_rate": s["token_error_rate"],
            "mean_sample_error": s["mean_sample_error"],
            "n_resets": s["n_resets"],
            "forwards": float(np.mean([p["counters"]["forwards"] for p in s["per_seed"]])),
            "backwards": float(np.mean([p["counters"]["backwards"] for p in s["per_seed"]])),
            "failed": s["failed"],
        })
        curves[r.label] = smooth_curve(r.sample_errors() - base_err, window)
    return {"baseline": base.label, "rows": rows, "curves": curves}


def format_table(comparison: dict) -> str:
    lines = [f"{'name':<24}{'TER':>10}{'mean err':>10}{'resets':>9}{'#fwd':>10}{'#bwd':>10}"]
    for row in comparison["rows"]:
        lines.append(
            f"{row['name']:<24}{100 * row['token_error_rate']:>9.2f}%{100 * row['mean_sample_error']:>9.2f}%"
            f"{row['n_resets']:>9.1f}{row['forwards']:>10.0f}{row['backwards']:>10.0f}"
            + ("  FAILED" if row["failed"] else "")
        )
    return "\n".join(lines)


def write_curves(comparison: dict, path) -> None:
    names = list(comparison["curves"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"{n}-minus-{comparison['baseline']}" for n in names])
        for i, vals in enumerate(zip(*(comparison["curves"][n] for n in names)), 1):
            w.writerow([i] + [repr(float(v)) for v in vals])
