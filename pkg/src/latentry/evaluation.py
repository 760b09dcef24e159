"""Internal evaluation protocols: full-dataset, held-out M2, leave-condition-out
and the within-session hierarchy.

Every protocol fits standardization and PCA on the subset of conditions it
analyses (held-out rows included) and never reads rows of other conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyDataset, LengthMismatch, MissingReference, TooFewPairs
from .ingest import Dataset, subset_conditions
from .labels import CORE_HIERARCHY, Condition, Session, hierarchy_key
from .metrics import (
    DEFAULT_TIE_TOL,
    DisplacementRecord,
    Ranking,
    centroid_of,
    hierarchy_satisfied,
    positions,
    rank,
    within_session_distances,
)
from .mlp import ModelParams, SplitMix64, TrainConfig, predict_coords, train
from .pairing import TrainingPair, design, pairs_for
from .preprocess import LatentSet, PcaProjection, fit_projection, latent_array, project_dataset


@dataclass(frozen=True)
class SplitSpec:
    """Per-condition held-out rule: ``ceil(holdout_fraction * n_pairs)`` pairs.

    ``rule`` is ``"random"`` (seeded draw without replacement) or ``"last"``
    (the last pairs in recording order).
    """

    holdout_fraction: float = 0.2
    seed: int = 42
    rule: str = "random"

    def __post_init__(self):
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        if self.rule not in ("random", "last"):
            raise ValueError(f"unknown split rule {self.rule!r}")

    def heldout_count(self, n_pairs: int) -> int:
        # exact rational arithmetic: 0.2 * 55 must give 11, not 12
        frac = Fraction(str(self.holdout_fraction))
        return math.ceil(frac * n_pairs)

    def describe(self) -> str:
        return f"ceil({self.holdout_fraction:g}*n_pairs) {self.rule} seed={self.seed}"


@dataclass(frozen=True)
class WithinSessionRow:
    condition: Condition
    m1_dist: float
    m1_rank: int
    m2_dist: float
    m2_rank: int
    displacement: float
    long_rank: int


@dataclass
class EvaluationReport:
    protocol: str
    rows: list[DisplacementRecord]
    observed_ranking: Ranking
    predicted_ranking: Ranking | None = None
    hierarchy_flags: dict[str, bool] = field(default_factory=dict)
    global_rmse: float | None = None
    withheld: Condition | None = None
    within: list[WithinSessionRow] | None = None
    final_loss: float | None = None
    model: ModelParams | None = field(default=None, repr=False, compare=False)

    @property
    def conditions(self) -> tuple[Condition, ...]:
        return tuple(r.condition for r in self.rows)

    def row(self, c: Condition) -> DisplacementRecord:
        for r in self.rows:
            if r.condition is c:
                return r
        raise KeyError(str(c))


@dataclass(frozen=True)
class Analysis:
    """Projection and pairs for one analysis subset, shared across protocols."""

    conditions: tuple[Condition, ...]
    dataset: Dataset
    projection: PcaProjection
    latent: LatentSet
    pairs: dict[Condition, list[TrainingPair]]

    @classmethod
    def fit(cls, ds: Dataset, conditions: Iterable[Condition] | None = None) -> "Analysis":
        conds = tuple(c for c in Condition if c in set(conditions)) if conditions is not None else ds.present_conditions
        if not conds:
            raise EmptyDataset("no conditions to analyse")
        sub = subset_conditions(ds, conds)
        for c in conds:
            for s in Session:
                if sub.count(c, s) == 0:
                    raise EmptyDataset(f"no {c}/{s} observations")
        projection = fit_projection(sub)
        latent = project_dataset(sub, projection)
        return cls(conds, sub, projection, latent, pairs_for(latent, conds))

    def cell(self, c: Condition, s: Session) -> np.ndarray:
        return self.latent.select(c, s)


def _analysis(ds_or_analysis, conditions) -> Analysis:
    if isinstance(ds_or_analysis, Analysis):
        if conditions is not None and set(conditions) != set(ds_or_analysis.conditions):
            raise ValueError("conditions do not match the prepared analysis")
        return ds_or_analysis
    return Analysis.fit(ds_or_analysis, conditions)


def _flat(pairs_by_cond: dict[Condition, list[TrainingPair]], conds: Sequence[Condition]) -> list[TrainingPair]:
    return [p for c in conds for p in pairs_by_cond[c]]


def pointwise_rmse(pred, target) -> float:
    """sqrt(mean squared Euclidean error) between index-aligned point sets."""
    a = latent_array(pred) if not isinstance(pred, np.ndarray) else pred.reshape(-1, 2)
    b = latent_array(target) if not isinstance(target, np.ndarray) else target.reshape(-1, 2)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.shape[0]} predictions vs {b.shape[0]} targets")
    if a.shape[0] == 0:
        raise LengthMismatch("empty point sets")
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


def _record(c: Condition, m1: np.ndarray, m2: np.ndarray, pred: np.ndarray, rmse: bool) -> DisplacementRecord:
    """Displacement metrics from M1, observed M2 and predicted M2 coordinate sets."""
    z1 = centroid_of(m1, c, Session.M1).xy
    z2 = centroid_of(m2, c, Session.M2).xy
    zp = centroid_of(pred, c, Session.M2).xy
    return DisplacementRecord(
        condition=c,
        d_obs=float(np.linalg.norm(z2 - z1)),
        d_pred=float(np.linalg.norm(zp - z1)),
        e_centroid=float(np.linalg.norm(zp - z2)),
        rmse=pointwise_rmse(pred, m2) if rmse else None,
        n_eval=int(m2.shape[0]) if rmse else None,
    )


def expected_hierarchies(conditions: Sequence[Condition], extra: Iterable[Sequence[Condition]] = ()) -> list[tuple[Condition, ...]]:
    present = set(conditions)
    out = []
    for h in (CORE_HIERARCHY, *extra):
        h = tuple(h)
        if len(h) >= 2 and set(h) <= present and h not in out:
            out.append(h)
    return out


def _flags(observed: Ranking, predicted: Ranking | None, hierarchies) -> dict[str, bool]:
    flags = {}
    for h in hierarchies:
        key = hierarchy_key(h)
        flags[f"observed:{key}"] = hierarchy_satisfied(observed, h)
        if predicted is not None:
            flags[f"predicted:{key}"] = hierarchy_satisfied(predicted, h)
    return flags


def _rankings(rows, tie_tol):
    observed = rank([(r.condition, r.d_obs) for r in rows], tie_tol)
    predicted = rank([(r.condition, r.d_pred) for r in rows], tie_tol)
    return observed, predicted


def eval_full(ds, conditions: Iterable[Condition] | None = None, cfg: TrainConfig = TrainConfig(),
              tie_tol: float = DEFAULT_TIE_TOL, expect: Iterable[Sequence[Condition]] = ()) -> EvaluationReport:
    """Train once on every pair and predict M2 from every M1 observation."""
    a = _analysis(ds, conditions)
    params, history = train(design(_flat(a.pairs, a.conditions)), cfg)
    rows = []
    for c in a.conditions:
        m1 = a.cell(c, Session.M1)
        rows.append(_record(c, m1, a.cell(c, Session.M2), predict_coords(params, m1, c), rmse=False))
    observed, predicted = _rankings(rows, tie_tol)
    return EvaluationReport(
        protocol="full",
        rows=rows,
        observed_ranking=observed,
        predicted_ranking=predicted,
        hierarchy_flags=_flags(observed, predicted, expected_hierarchies(a.conditions, expect)),
        final_loss=history[-1] if history else None,
        model=params,
    )


def split_held_out(pairs: dict[Condition, list[TrainingPair]], spec: SplitSpec = SplitSpec()
                   ) -> tuple[dict[Condition, list[TrainingPair]], dict[Condition, list[TrainingPair]]]:
    train_part, held = {}, {}
    for c, plist in pairs.items():
        n = len(plist)
        k = spec.heldout_count(n)
        if n < 2 or not 1 <= k < n:
            raise TooFewPairs(f"{c}: cannot hold out {k} of {n} pairs")
        if spec.rule == "last":
            chosen = set(range(n - k, n))
        else:
            # partial Fisher-Yates on an independent stream per condition
            rng = SplitMix64((spec.seed << 8) + c.order)
            idx = list(range(n))
            for i in range(k):
                j = i + rng.below(n - i)
                idx[i], idx[j] = idx[j], idx[i]
            chosen = set(idx[:k])
        held[c] = [p for i, p in enumerate(plist) if i in chosen]
        train_part[c] = [p for i, p in enumerate(plist) if i not in chosen]
    return train_part, held


def _pair_arrays(plist: Sequence[TrainingPair]) -> tuple[np.ndarray, np.ndarray]:
    m1 = np.array([p.input_latent for p in plist], dtype=float).reshape(-1, 2)
    m2 = np.array([p.target_latent for p in plist], dtype=float).reshape(-1, 2)
    return m1, m2


def eval_held_out(ds, conditions: Iterable[Condition] | None = None, cfg: TrainConfig = TrainConfig(),
                  spec: SplitSpec = SplitSpec(), tie_tol: float = DEFAULT_TIE_TOL,
                  expect: Iterable[Sequence[Condition]] = ()) -> EvaluationReport:
    """Train without the held-out pairs and score predictions on them.

    Centroid metrics use only the held-out pairs: their M1 inputs, their
    observed M2 targets and the predictions.
    """
    a = _analysis(ds, conditions)
    train_part, held = split_held_out(a.pairs, spec)
    params, history = train(design(_flat(train_part, a.conditions)), cfg)
    rows, preds, targets = [], [], []
    for c in a.conditions:
        m1, m2 = _pair_arrays(held[c])
        pred = predict_coords(params, m1, c)
        rows.append(_record(c, m1, m2, pred, rmse=True))
        preds.append(pred)
        targets.append(m2)
    observed, predicted = _rankings(rows, tie_tol)
    return EvaluationReport(
        protocol="held_out",
        rows=rows,
        observed_ranking=observed,
        predicted_ranking=predicted,
        hierarchy_flags=_flags(observed, predicted, expected_hierarchies(a.conditions, expect)),
        global_rmse=pointwise_rmse(np.vstack(preds), np.vstack(targets)),
        final_loss=history[-1] if history else None,
        model=params,
    )


def eval_leave_condition_out(ds, conditions: Iterable[Condition] | None = None,
                             cfg: TrainConfig = TrainConfig(), tie_tol: float = DEFAULT_TIE_TOL
                             ) -> list[EvaluationReport]:
    """One fold per condition, trained on the pairs of all the others.

    Metrics for the withheld condition are computed on its computational
    pairs so that the pointwise RMSE and centroid error share one point set.
    """
    a = _analysis(ds, conditions)
    if len(a.conditions) < 2:
        raise EmptyDataset("leave-condition-out needs at least two conditions")
    reports = []
    for c in a.conditions:
        others = [k for k in a.conditions if k is not c]
        train_pairs = _flat(a.pairs, others)
        assert all(p.condition is not c for p in train_pairs)
        params, history = train(design(train_pairs), cfg)
        m1, m2 = _pair_arrays(a.pairs[c])
        pred = predict_coords(params, m1, c)
        row = _record(c, m1, m2, pred, rmse=True)
        observed, predicted = _rankings([row], tie_tol)
        reports.append(EvaluationReport(
            protocol="leave_condition_out",
            rows=[row],
            observed_ranking=observed,
            predicted_ranking=predicted,
            global_rmse=row.rmse,
            withheld=c,
            final_loss=history[-1] if history else None,
            model=params,
        ))
    return reports


def eval_within_session(ds, conditions: Iterable[Condition] | None = None,
                        tie_tol: float = DEFAULT_TIE_TOL,
                        expect: Iterable[Sequence[Condition]] = ()) -> EvaluationReport:
    """ONL-relative distances per session plus longitudinal displacement."""
    a = _analysis(ds, conditions)
    if Condition.ONL not in a.conditions:
        raise MissingReference("within-session analysis needs ONL in both sessions")
    cents = [centroid_of(a.cell(c, s), c, s) for c in a.conditions for s in Session]
    by = {(k.condition, k.session): k for k in cents}
    dist = {s: dict(within_session_distances(cents, s)) for s in Session}
    r1 = rank(dist[Session.M1].items(), tie_tol)
    r2 = rank(dist[Session.M2].items(), tie_tol)
    disp = {c: float(np.linalg.norm(by[c, Session.M2].xy - by[c, Session.M1].xy)) for c in a.conditions}
    rl = rank(disp.items(), tie_tol)
    p1, p2, pl = positions(r1), positions(r2), positions(rl)
    within = [
        WithinSessionRow(c, dist[Session.M1][c], p1[c], dist[Session.M2][c], p2[c], disp[c], pl[c])
        for c in a.conditions
    ]
    rows = [DisplacementRecord(c, disp[c]) for c in a.conditions]
    return EvaluationReport(
        protocol="within_session",
        rows=rows,
        observed_ranking=rl,
        hierarchy_flags=_flags(rl, None, expected_hierarchies(a.conditions, expect)),
        within=within,
    )


def inequality_violations(report: EvaluationReport, tol: float = 1e-9) -> list[str]:
    """Check e_centroid <= d_obs + d_pred and RMSE >= e_centroid on every row."""
    bad = []
    for r in report.rows:
        if r.d_pred is not None and r.e_centroid is not None and r.e_centroid > r.d_obs + r.d_pred + tol:
            bad.append(f"{report.protocol}/{r.condition}: e_centroid {r.e_centroid} > d_obs + d_pred")
        if r.rmse is not None and r.e_centroid is not None and r.rmse + tol < r.e_centroid:
            bad.append(f"{report.protocol}/{r.condition}: rmse {r.rmse} < e_centroid {r.e_centroid}")
    return bad
