"""Centroids, displacement distances and rankings in the latent plane."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConditionMismatch, MissingReference, NoObservations, SessionMismatch, UnknownCondition
from .labels import Condition, Session
from .preprocess import LatentPoint

# OC3 vs OC3P differ by 0.01 in the observed six-probe run and are read as one
# group; 0.05 latent units covers that with margin.
DEFAULT_TIE_TOL = 0.05


@dataclass(frozen=True)
class Centroid:
    condition: Condition
    session: Session
    pc1: float
    pc2: float
    n: int

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.pc1, self.pc2])


@dataclass(frozen=True)
class DisplacementRecord:
    condition: Condition
    d_obs: float
    d_pred: float | None = None
    e_centroid: float | None = None
    rmse: float | None = None
    n_eval: int | None = None


def centroid(points: Iterable[LatentPoint], c: Condition, s: Session) -> Centroid:
    xs = [(p.pc1, p.pc2) for p in points if p.condition is c and p.session is s]
    if not xs:
        raise NoObservations(f"no latent points for {c}/{s}")
    return centroid_of(np.array(xs), c, s)


def centroid_of(coords: np.ndarray, c: Condition, s: Session) -> Centroid:
    """Centroid of an (n, 2) coordinate array already restricted to one cell."""
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    if coords.shape[0] == 0:
        raise NoObservations(f"no latent points for {c}/{s}")
    m = coords.mean(axis=0)
    return Centroid(c, s, float(m[0]), float(m[1]), int(coords.shape[0]))


def _dist(a: Centroid, b: Centroid) -> float:
    return math.hypot(a.pc1 - b.pc1, a.pc2 - b.pc2)


def observed_displacement(m1: Centroid, m2: Centroid) -> float:
    """d_obs = |centroid(M2) - centroid(M1)| for one condition."""
    if m1.condition is not m2.condition:
        raise ConditionMismatch(f"{m1.condition} vs {m2.condition}")
    if {m1.session, m2.session} != {Session.M1, Session.M2}:
        raise SessionMismatch("displacement needs one M1 and one M2 centroid")
    return _dist(m1, m2)


def centroid_error(pred: Centroid, obs: Centroid) -> float:
    if pred.condition is not obs.condition:
        raise ConditionMismatch(f"{pred.condition} vs {obs.condition}")
    if pred.session is not Session.M2 or obs.session is not Session.M2:
        raise SessionMismatch("centroid error compares M2 centroids")
    return _dist(pred, obs)


def within_session_distances(centroids: Sequence[Centroid], s: Session) -> list[tuple[Condition, float]]:
    """Distance of every probe centroid in session ``s`` to that session's ONL centroid."""
    in_session = sorted((c for c in centroids if c.session is s), key=lambda c: c.condition.order)
    ref = next((c for c in in_session if c.condition is Condition.ONL), None)
    if ref is None:
        raise MissingReference(f"no ONL centroid in session {s}")
    return [(c.condition, 0.0 if c is ref else _dist(c, ref)) for c in in_session]


@dataclass(frozen=True)
class Ranking:
    """Ascending ordering of per-condition values.

    ``tie_groups`` partitions the conditions: consecutive entries whose values
    differ by less than the tie tolerance are chained into one group.
    """

    ordered: tuple[tuple[Condition, float], ...]
    tie_groups: tuple[frozenset[Condition], ...]

    @property
    def conditions(self) -> tuple[Condition, ...]:
        return tuple(c for c, _ in self.ordered)

    def position(self, c: Condition) -> int:
        """1-based position in the ordering."""
        for i, (cc, _) in enumerate(self.ordered):
            if cc is c:
                return i + 1
        raise UnknownCondition(f"{c} not in ranking")

    def group_index(self, c: Condition) -> int:
        for i, g in enumerate(self.tie_groups):
            if c in g:
                return i
        raise UnknownCondition(f"{c} not in ranking")

    def __str__(self) -> str:
        parts = []
        for g in self.tie_groups:
            names = [str(c) for c, _ in self.ordered if c in g]
            parts.append(" ~ ".join(names))
        return " < ".join(parts)


def rank(values: Iterable[tuple[Condition, float]], tie_tol: float = 0.0) -> Ranking:
    items = list(values)
    if any(math.isnan(v) for _, v in items):
        raise ValueError("cannot rank NaN values")
    if tie_tol < 0:
        raise ValueError("tie_tol must be non-negative")
    # exact value ties fall back to enumeration order
    items.sort(key=lambda cv: (cv[1], cv[0].order))
    groups: list[set[Condition]] = []
    prev = None
    for c, v in items:
        if prev is not None and v - prev < tie_tol:
            groups[-1].add(c)
        elif prev is not None and v == prev:
            groups[-1].add(c)
        else:
            groups.append({c})
        prev = v
    return Ranking(tuple((c, float(v)) for c, v in items), tuple(frozenset(g) for g in groups))


def hierarchy_satisfied(r: Ranking, expected: Sequence[Condition]) -> bool:
    """True iff ``expected`` is a strictly increasing subsequence of ``r``.

    Two expected conditions sharing a tie group do not satisfy a strict
    expectation.
    """
    groups = [r.group_index(c) for c in expected]
    return all(a < b for a, b in zip(groups, groups[1:]))


def positions(r: Ranking) -> dict[Condition, int]:
    return {c: i + 1 for i, (c, _) in enumerate(r.ordered)}
