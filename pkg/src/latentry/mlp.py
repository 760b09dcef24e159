"""8 -> 16 -> 16 -> 2 ReLU network trained with full-batch Adam on MSE.

Weights follow the ``(out, in)`` convention: a layer computes
``x @ w.T + b``.  Initialization draws from a SplitMix64 stream in a fixed
order (w1 row-major, then w2, then w3) so that a seed gives the same
parameters on every platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DivergedLoss, EmptyBatch, SessionMismatch
from .labels import Condition, Session
from .pairing import N_INPUTS, design, model_inputs
from .preprocess import LatentPoint, latent_array

HIDDEN = (16, 16)
N_OUTPUTS = 2
SCHEMA_VERSION = 1

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood).  Pure Python, portable."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def below(self, n: int) -> int:
        """Integer in [0, n) by rejection, free of modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n


@dataclass(frozen=True)
class ModelParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, n) for n in self.NAMES)

    def map(self, fn: Callable[..., np.ndarray], *others: "ModelParams") -> "ModelParams":
        return ModelParams(*(fn(a, *(getattr(o, n) for o in others)) for n, a in zip(self.NAMES, self.arrays())))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def from_flat(self, vec: np.ndarray) -> "ModelParams":
        out, i = [], 0
        for a in self.arrays():
            out.append(np.asarray(vec[i:i + a.size], dtype=float).reshape(a.shape).copy())
            i += a.size
        return ModelParams(*out)

    @classmethod
    def zeros(cls) -> "ModelParams":
        h1, h2 = HIDDEN
        return cls(
            np.zeros((h1, N_INPUTS)), np.zeros(h1),
            np.zeros((h2, h1)), np.zeros(h2),
            np.zeros((N_OUTPUTS, h2)), np.zeros(N_OUTPUTS),
        )

    def to_dict(self) -> dict:
        return {n: a.tolist() for n, a in zip(self.NAMES, self.arrays())}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(*(np.array(d[n], dtype=float) for n in cls.NAMES))


def init_params(seed: int) -> ModelParams:
    """Glorot-uniform weights from SplitMix64(seed), zero biases."""
    rng = SplitMix64(seed)
    sizes = (N_INPUTS, *HIDDEN, N_OUTPUTS)
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = np.array([(2.0 * rng.uniform() - 1.0) * limit for _ in range(fan_in * fan_out)])
        layers += [w.reshape(fan_out, fan_in), np.zeros(fan_out)]
    return ModelParams(*layers)


@dataclass
class _Cache:
    x: np.ndarray
    a1: np.ndarray
    h1: np.ndarray
    a2: np.ndarray
    h2: np.ndarray


def _forward(p: ModelParams, x: np.ndarray) -> tuple[np.ndarray, _Cache]:
    a1 = x @ p.w1.T + p.b1
    h1 = np.maximum(a1, 0.0)
    a2 = h1 @ p.w2.T + p.b2
    h2 = np.maximum(a2, 0.0)
    y = h2 @ p.w3.T + p.b3
    return y, _Cache(x, a1, h1, a2, h2)


def forward(p: ModelParams, x: np.ndarray) -> np.ndarray:
    """Network output for one input vector (8,) or a batch (n, 8)."""
    x = np.asarray(x, dtype=float)
    y, _ = _forward(p, np.atleast_2d(x))
    return y[0] if x.ndim == 1 else y


def _as_batch(pairs) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(pairs, tuple) and len(pairs) == 2 and isinstance(pairs[0], np.ndarray):
        x, y = pairs
    else:
        x, y = design(list(pairs))
    if x.shape[0] == 0:
        raise EmptyBatch("loss needs at least one pair")
    return x, y


def mse(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over rows of the squared Euclidean error."""
    return float(np.mean(np.sum((pred - target) ** 2, axis=1)))


def loss(p: ModelParams, pairs) -> float:
    """MSE over a batch: mean over pairs, summed over the two outputs.

    ``pairs`` is a sequence of :class:`TrainingPair` or an ``(x, y)`` tuple of
    arrays as returned by :func:`latentry.pairing.design`.
    """
    x, y = _as_batch(pairs)
    pred, _ = _forward(p, x)
    return mse(pred, y)


def loss_and_grad(p: ModelParams, x: np.ndarray, y: np.ndarray) -> tuple[float, ModelParams]:
    pred, c = _forward(p, x)
    n = x.shape[0]
    diff = pred - y
    value = float(np.mean(np.sum(diff ** 2, axis=1)))
    d_y = 2.0 * diff / n
    g_w3 = d_y.T @ c.h2
    g_b3 = d_y.sum(axis=0)
    d_a2 = (d_y @ p.w3) * (c.a2 > 0)
    g_w2 = d_a2.T @ c.h1
    g_b2 = d_a2.sum(axis=0)
    d_a1 = (d_a2 @ p.w2) * (c.a1 > 0)
    g_w1 = d_a1.T @ c.x
    g_b1 = d_a1.sum(axis=0)
    return value, ModelParams(g_w1, g_b1, g_w2, g_b2, g_w3, g_b3)


def backward(p: ModelParams, pairs) -> ModelParams:
    """Exact gradient of :func:`loss`; ReLU'(0) is taken as 0."""
    x, y = _as_batch(pairs)
    return loss_and_grad(p, x, y)[1]


@dataclass(frozen=True)
class AdamState:
    step: int
    m: ModelParams
    v: ModelParams
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, like: ModelParams, lr: float = 0.001, **kw) -> "AdamState":
        zeros = like.map(np.zeros_like)
        return cls(0, zeros, zeros, lr, **kw)


def adam_update(theta, g, m, v, t: int, lr: float, beta1: float, beta2: float, eps: float):
    """One bias-corrected Adam update on a single array (or scalar)."""
    m = beta1 * m + (1.0 - beta1) * g
    v = beta2 * v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    return theta - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


def adam_step(p: ModelParams, g: ModelParams, s: AdamState) -> tuple[ModelParams, AdamState]:
    t = s.step + 1
    new_p, new_m, new_v = [], [], []
    for theta, gi, mi, vi in zip(p.arrays(), g.arrays(), s.m.arrays(), s.v.arrays()):
        th, mm, vv = adam_update(theta, gi, mi, vi, t, s.lr, s.beta1, s.beta2, s.eps)
        new_p.append(th)
        new_m.append(mm)
        new_v.append(vv)
    return ModelParams(*new_p), replace(s, step=t, m=ModelParams(*new_m), v=ModelParams(*new_v))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 800
    seed: int = 42
    lr: float = 0.001

    def header(self) -> dict:
        return {"seed": self.seed, "epochs": self.epochs, "lr": self.lr, "batch": "full"}


def train(pairs, cfg: TrainConfig = TrainConfig()) -> tuple[ModelParams, list[float]]:
    """Full-batch Adam from ``init_params(cfg.seed)``.

    ``history[i]`` is the loss evaluated before update ``i``; its length is
    ``cfg.epochs``.
    """
    x, y = _as_batch(pairs)
    p = init_params(cfg.seed)
    state = AdamState.fresh(p, lr=cfg.lr)
    history: list[float] = []
    for epoch in range(cfg.epochs):
        # overflow shows up as a non-finite loss, reported below
        with np.errstate(over="ignore", invalid="ignore"):
            value, g = loss_and_grad(p, x, y)
        if not math.isfinite(value):
            raise DivergedLoss(f"loss is {value} at epoch {epoch}")
        history.append(value)
        p, state = adam_step(p, g, state)
    if not all(np.isfinite(a).all() for a in p.arrays()):
        raise DivergedLoss("parameters became non-finite")
    return p, history


def predict_m2(p: ModelParams, points: Sequence[LatentPoint], c: Condition) -> list[LatentPoint]:
    for q in points:
        if q.session is not Session.M1 or q.condition is not c:
            raise SessionMismatch(f"expected {c}/M1 points, got {q.condition}/{q.session}")
    pred = predict_coords(p, latent_array(points), c)
    return [LatentPoint(float(a), float(b), c, Session.M2) for a, b in pred]


def predict_coords(p: ModelParams, m1: np.ndarray, c: Condition) -> np.ndarray:
    """Predicted M2 coordinates (n, 2) for M1 coordinates (n, 2) of ``c``."""
    m1 = np.asarray(m1, dtype=float).reshape(-1, 2)
    if m1.shape[0] == 0:
        return np.zeros((0, 2))
    return _forward(p, model_inputs(m1, c))[0]


def save_params(p: ModelParams, cfg: TrainConfig, path) -> None:
    doc = {"schema_version": SCHEMA_VERSION, **cfg.header(), "params": p.to_dict()}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_params(path) -> tuple[ModelParams, TrainConfig]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    cfg = TrainConfig(epochs=doc["epochs"], seed=doc["seed"], lr=doc["lr"])
    return ModelParams.from_dict(doc["params"]), cfg
