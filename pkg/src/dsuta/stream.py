"""Synthetic multi-domain utterance streams.

A *task* fixes the label alphabet, feature dimension and one prototype vector
per class. An utterance is a random token sequence expanded into CTC-style
frames (tokens repeated 1-3 frames, blanks interleaved); each frame is the
prototype of its frame label plus isotropic noise, then passed through the
corruptions of its domain. Streams are concatenations of domain segments.
"""
from __future__ import annotations

import csv
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from .model import ConfigurationError, ParamSet


@dataclass(frozen=True)
class TaskSpec:
    C: int = 12
    d: int = 16
    blank: int = 0
    min_tokens: int = 5
    max_tokens: int = 20
    max_repeat: int = 3
    prototype_scale: float = 3.0
    frame_noise: float = 0.35
    seed: int = 0
    # drop utterances longer than this many frames (None keeps everything)
    max_frames: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.blank < self.C or self.C < 3:
            raise ConfigurationError("need C >= 3 and a blank id inside [0, C)")
        if not 1 <= self.min_tokens <= self.max_tokens:
            raise ConfigurationError("token length range is empty")

    def prototypes(self) -> np.ndarray:
        """Class prototypes, one row per class; orthogonal when d >= C."""
        rng = np.random.default_rng([self.seed, 7919])
        A = rng.standard_normal((max(self.d, self.C), self.d))
        if self.d >= self.C:
            q, _ = np.linalg.qr(A.T)
            return self.prototype_scale * q[:, : self.C].T
        return self.prototype_scale * A[: self.C] / np.linalg.norm(A[: self.C], axis=1, keepdims=True)


def _unit(seed, d: int) -> np.ndarray:
    u = np.random.default_rng(seed).standard_normal(d)
    return u / np.linalg.norm(u)


@lru_cache(maxsize=256)
def _rotation(seed: int, d: int, angle: float) -> np.ndarray:
    A = np.random.default_rng([seed, 3]).standard_normal((d, d))
    S = A - A.T
    S /= np.max(np.abs(np.linalg.eigvals(S)))
    R = expm(angle * S)
    R.flags.writeable = False
    return R


@dataclass(frozen=True)
class Corruption:
    """One feature-space corruption.

    ``kind`` is ``additive_noise`` (per-frame Gaussian noise of std ``scale``
    along a seeded unit direction, plus ``isotropic`` std in every
    dimension), ``feature_shift`` (constant offset of norm ``scale`` along a
    seeded direction, or an explicit ``offset``) or ``channel_scale``
    (per-dimension gains drawn as ``exp(scale * N(0,1))``, or explicit
    ``gains``) or ``channel_mix`` (a seeded rotation of the feature space
    whose largest plane angle is ``scale`` radians). All magnitudes are
    multiplied by the domain severity.
    """

    kind: str
    scale: float = 0.0
    seed: int = 0
    isotropic: float = 0.0
    offset: Optional[tuple] = None
    gains: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("additive_noise", "feature_shift", "channel_scale", "channel_mix"):
            raise ConfigurationError(f"unknown corruption kind {self.kind!r}")

    def direction(self, d: int) -> np.ndarray:
        return _unit([self.seed, 1], d)

    def rotation(self, d: int, severity: float = 1.0) -> np.ndarray:
        return _rotation(self.seed, d, severity * self.scale)

    def apply(self, frames: np.ndarray, severity: float, rng: np.random.Generator) -> np.ndarray:
        L, d = frames.shape
        if self.kind == "channel_mix":
            return frames @ self.rotation(d, severity)
        if self.kind == "additive_noise":
            z = rng.standard_normal(L)
            iso = rng.standard_normal((L, d))
            return frames + severity * (self.scale * z[:, None] * self.direction(d) + self.isotropic * iso)
        if self.kind == "feature_shift":
            off = np.asarray(self.offset, dtype=np.float64) if self.offset is not None else self.scale * self.direction(d)
            return frames + severity * off
        if self.gains is not None:
            gains = np.asarray(self.gains, dtype=np.float64)
        else:
            gains = np.exp(self.scale * np.random.default_rng([self.seed, 2]).standard_normal(d))
        return frames * (1.0 + severity * (gains - 1.0))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "scale": self.scale, "seed": self.seed}
        if self.isotropic:
            out["isotropic"] = self.isotropic
        if self.offset is not None:
            out["offset"] = list(self.offset)
        if self.gains is not None:
            out["gains"] = list(self.gains)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Corruption":
        d = dict(d)
        for key in ("offset", "gains"):
            if d.get(key) is not None:
                d[key] = tuple(float(v) for v in d[key])
        return cls(**d)


@dataclass(frozen=True)
class DomainSpec:
    id: str
    corruptions: tuple = ()
    severity: float = 1.0

    def __post_init__(self):
        if self.severity < 0:
            raise ConfigurationError("severity must be >= 0")

    def scaled(self, factor: float, id: Optional[str] = None) -> "DomainSpec":
        return DomainSpec(id or f"{self.id}x{factor:g}", self.corruptions, self.severity * factor)

    def to_dict(self) -> dict:
        return {"id": self.id, "severity": self.severity, "corruptions": [c.to_dict() for c in self.corruptions]}

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        return cls(
            str(d["id"]),
            tuple(Corruption.from_dict(c) for c in d.get("corruptions", ())),
            float(d.get("severity", 1.0)),
        )


CLEAN = DomainSpec("clean")


@dataclass
class Utterance:
    features: np.ndarray
    reference: list
    domain_id: str
    t: int = 0
    labels: Optional[np.ndarray] = field(default=None, repr=False)  # per-frame labels


def sample_alignment(task: TaskSpec, rng: np.random.Generator) -> tuple[list, np.ndarray]:
    """Random token sequence and its frame-level label path."""
    n = int(rng.integers(task.min_tokens, task.max_tokens + 1))
    symbols = [c for c in range(task.C) if c != task.blank]
    tokens = [symbols[i] for i in rng.integers(0, len(symbols), size=n)]
    path = [task.blank] * int(rng.integers(0, 3))
    for i, tok in enumerate(tokens):
        # a blank between equal neighbours keeps the repeat from merging
        if i > 0 and (tok == tokens[i - 1] or rng.random() < 0.5):
            path.append(task.blank)
        path.extend([tok] * int(rng.integers(1, task.max_repeat + 1)))
    path.extend([task.blank] * int(rng.integers(0, 3)))
    return tokens, np.asarray(path)


def gen_utterance(task: TaskSpec, domain: DomainSpec, rng: np.random.Generator, t: int = 0) -> Utterance:
    tokens, path = sample_alignment(task, rng)
    protos = task.prototypes()
    frames = protos[path] + task.frame_noise * rng.standard_normal((len(path), task.d))
    for c in domain.corruptions:
        frames = c.apply(frames, domain.severity, rng)
    return Utterance(frames, tokens, domain.id, t, path)


@dataclass(frozen=True)
class StreamSpec:
    """Ordered ``(domain id, length)`` segments over a pool of domains."""

    segments: tuple
    domains: tuple
    seed: int = 0
    task: TaskSpec = field(default_factory=TaskSpec)
    name: str = "stream"

    def __post_init__(self):
        ids = [d.id for d in self.domains]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("domain ids must be unique")
        for dom, n in self.segments:
            if dom not in ids:
                raise ConfigurationError(f"segment references undefined domain {dom!r}")
            if int(n) < 1:
                raise ConfigurationError("segment lengths must be >= 1")

    @property
    def length(self) -> int:
        return sum(int(n) for _, n in self.segments)

    def domain(self, id: str) -> DomainSpec:
        return next(d for d in self.domains if d.id == id)

    def with_seed(self, seed: int) -> "StreamSpec":
        return StreamSpec(self.segments, self.domains, seed, self.task, self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "task": {k: getattr(self.task, k) for k in self.task.__dataclass_fields__},
            "domains": [d.to_dict() for d in self.domains],
            "segments": [[dom, int(n)] for dom, n in self.segments],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StreamSpec":
        return cls(
            tuple((str(dom), int(n)) for dom, n in d["segments"]),
            tuple(DomainSpec.from_dict(x) for x in d["domains"]),
            int(d.get("seed", 0)),
            TaskSpec(**d.get("task", {})),
            d.get("name", "stream"),
        )


@dataclass
class Stream:
    utterances: list
    boundaries: frozenset
    spec: StreamSpec

    def __len__(self):
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)


def segment_boundaries(segments: Sequence) -> frozenset:
    """Cumulative segment ends, excluding the end of the last segment."""
    ends = np.cumsum([int(n) for _, n in segments])
    return frozenset(int(e) for e in ends[:-1])


def build_stream(spec: StreamSpec) -> Stream:
    rng = np.random.default_rng([spec.seed, 104729])
    task = spec.task
    out = []
    for dom_id, n in spec.segments:
        dom = spec.domain(dom_id)
        for _ in range(int(n)):
            u = gen_utterance(task, dom, rng, len(out) + 1)
            while task.max_frames is not None and len(u.features) > task.max_frames:
                u = gen_utterance(task, dom, rng, len(out) + 1)
            out.append(u)
    return Stream(out, segment_boundaries(spec.segments), spec)


def repeated_order(order: Sequence[str], seg_len: int, total: int) -> tuple:
    """Cycle ``order`` with segments of ``seg_len`` until ``total`` samples."""
    if total % seg_len:
        raise ConfigurationError("total must be a multiple of the segment length")
    n = total // seg_len
    return tuple((order[i % len(order)], seg_len) for i in range(n))


def long_segments(domain_ids: Sequence[str], rng: np.random.Generator, total: int,
                  min_len: int = 20, max_len: int = 500) -> tuple:
    """Random domains (repeats allowed) with lengths in [min_len, max_len].

    The last segment is truncated so lengths sum to ``total``.
    """
    if total < 1:
        raise ConfigurationError("total must be >= 1")
    segs, used = [], 0
    while used < total:
        dom = domain_ids[int(rng.integers(0, len(domain_ids)))]
        n = min(int(rng.integers(min_len, max_len + 1)), total - used)
        segs.append((dom, n))
        used += n
    return tuple(segs)


def build_long_stream(domains: Sequence[DomainSpec], seed: int, total: int = 10000,
                      task: Optional[TaskSpec] = None, name: str = "long") -> Stream:
    if len(domains) < 1:
        raise ConfigurationError("need at least one domain")
    rng = np.random.default_rng([seed, 15485863])
    segs = long_segments([d.id for d in domains], rng, total)
    return build_stream(StreamSpec(segs, tuple(domains), seed, task or TaskSpec(), name))


# -- pre-trained source model --------------------------------------------------

def fit_source_model(task: TaskSpec, n_utterances: int = 300, seed: int = 0, l2: float = 1e-2) -> ParamSet:
    """L2-regularised softmax regression on clean frames with frame labels.

    Drawn from a generator independent of every stream seed, so the source
    data never overlaps a test stream.
    """
    rng = np.random.default_rng([seed, 2147483647])
    X, y = [], []
    for _ in range(n_utterances):
        u = gen_utterance(task, CLEAN, rng)
        X.append(u.features)
        y.append(u.labels)
    X = np.concatenate(X)
    y = np.concatenate(y)
    n, d, C = len(y), task.d, task.C
    Y = np.eye(C)[y]

    def objective(theta):
        W = theta[: d * C].reshape(d, C)
        b = theta[d * C:]
        Z = X @ W + b
        Z = Z - Z.max(axis=1, keepdims=True)
        logp = Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))
        nll = -(Y * logp).sum() / n + 0.5 * l2 * (W * W).sum()
        G = (np.exp(logp) - Y) / n
        return nll, np.concatenate([(X.T @ G + l2 * W).ravel(), G.sum(axis=0)])

    res = minimize(objective, np.zeros(d * C + C), jac=True, method="L-BFGS-B",
                   options={"maxiter": 500, "gtol": 1e-8})
    return ParamSet(res.x[: d * C].reshape(d, C), res.x[d * C:])


# -- export ----------------------------------------------------------------------

def write_stream_csv(stream: Stream, path) -> None:
    """One row per utterance: t, domain_id, L, d, features, reference."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "domain_id", "L", "d", "features", "reference"])
        for u in stream:
            L, d = u.features.shape
            w.writerow([u.t, u.domain_id, L, d,
                        " ".join(repr(float(v)) for v in u.features.ravel()),
                        " ".join(str(v) for v in u.reference)])


def read_stream_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            L, d = int(row["L"]), int(row["d"])
            feats = np.array([float(v) for v in row["features"].split()]).reshape(L, d)
            ref = [int(v) for v in row["reference"].split()]
            out.append(Utterance(feats, ref, row["domain_id"], int(row["t"])))
    return out


# -- config files ------------------------------------------------------------------

def stream_spec_from_config(cfg: dict, seed: Optional[int] = None) -> StreamSpec:
    """Resolve a stream config mapping into a concrete :class:`StreamSpec`.

    Segments come from exactly one of ``segments`` (explicit list of
    ``[domain, length]``), ``order`` + ``segment_length`` + ``total``
    (cyclic order) or ``long`` (random segments drawn from ``seed``).
    """
    seed = int(cfg.get("seed", 0) if seed is None else seed)
    task = TaskSpec(**cfg.get("task", {}))
    domains = tuple(DomainSpec.from_dict(d) for d in cfg["domains"])
    ids = [d.id for d in domains]
    if "segments" in cfg:
        segs = tuple((str(a), int(n)) for a, n in cfg["segments"])
    elif "order" in cfg:
        segs = repeated_order(cfg["order"], int(cfg["segment_length"]), int(cfg["total"]))
    elif "long" in cfg:
        lc = cfg["long"]
        pool = lc.get("domains", ids)
        rng = np.random.default_rng([seed, 15485863])
        segs = long_segments(pool, rng, int(lc.get("total", 10000)),
                             int(lc.get("min_len", 20)), int(lc.get("max_len", 500)))
    else:
        raise ConfigurationError("stream config needs 'segments', 'order' or 'long'")
    return StreamSpec(segs, domains, seed, task, cfg.get("name", "stream"))
