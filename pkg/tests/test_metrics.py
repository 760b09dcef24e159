import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latentry.errors import ConditionMismatch, MissingReference, NoObservations, SessionMismatch, UnknownCondition
from latentry.labels import CORE_HIERARCHY, Condition, Session
from latentry.metrics import (
    Centroid,
    centroid,
    centroid_error,
    centroid_of,
    hierarchy_satisfied,
    observed_displacement,
    positions,
    rank,
    within_session_distances,
)
from latentry.preprocess import LatentPoint

C = Condition
M1, M2 = Session.M1, Session.M2


def test_centroid_and_displacement():
    pts = [LatentPoint(0.0, 0.0, C.ONL, M1), LatentPoint(2.0, 0.0, C.ONL, M1), LatentPoint(9, 9, C.OC3, M1)]
    c1 = centroid(pts, C.ONL, M1)
    assert (c1.pc1, c1.pc2, c1.n) == (1.0, 0.0, 2)
    c2 = Centroid(C.ONL, M2, 4.0, 4.0, 3)
    assert observed_displacement(c1, c2) == 5.0
    assert observed_displacement(c2, c1) == 5.0
    with pytest.raises(NoObservations):
        centroid(pts, C.OBL, M1)
    with pytest.raises(ConditionMismatch):
        observed_displacement(c1, Centroid(C.OC3, M2, 0, 0, 1))
    with pytest.raises(SessionMismatch):
        observed_displacement(c1, c1)


def test_centroid_error_requires_m2():
    a = Centroid(C.ONL, M2, 0.0, 0.0, 1)
    assert centroid_error(a, Centroid(C.ONL, M2, 0.0, 0.5, 1)) == 0.5
    with pytest.raises(SessionMismatch):
        centroid_error(a, Centroid(C.ONL, M1, 0, 0, 1))


def test_within_session_distances():
    cents = [Centroid(C.OC3, M1, 3.0, 4.0, 1), Centroid(C.ONL, M1, 0.0, 0.0, 1), Centroid(C.ONL, M2, 9, 9, 1)]
    assert within_session_distances(cents, M1) == [(C.ONL, 0.0), (C.OC3, 5.0)]
    with pytest.raises(MissingReference):
        within_session_distances([Centroid(C.OC3, M1, 0, 0, 1)], M1)


def test_rank_core_order():
    r = rank([(C.OC3, 5.35), (C.ONL, 5.73), (C.OC25, 6.39)])
    assert r.conditions == (C.OC3, C.ONL, C.OC25)
    assert hierarchy_satisfied(r, CORE_HIERARCHY)


def test_rank_ties():
    r = rank([(C.OC3P, 5.78), (C.OC3, 5.77)], tie_tol=0.05)
    assert len(r.tie_groups) == 1
    assert r.conditions == (C.OC3, C.OC3P)
    assert not hierarchy_satisfied(r, [C.OC3, C.OC3P])
    # exact equality falls back to enum order
    assert rank([(C.OC3, 1.0), (C.ONL, 1.0)]).conditions == (C.ONL, C.OC3)


def test_rank_rejects_bad_input():
    with pytest.raises(ValueError):
        rank([(C.ONL, math.nan)])
    with pytest.raises(ValueError):
        rank([(C.ONL, 1.0)], tie_tol=-1)


def test_hierarchy_edge_cases():
    r = rank([(C.ONL, 1.0), (C.OC3, 2.0), (C.OC25, 3.0)])
    assert not hierarchy_satisfied(r, CORE_HIERARCHY)
    assert hierarchy_satisfied(r, [C.OC3])
    with pytest.raises(UnknownCondition):
        hierarchy_satisfied(r, [C.OBL])


values = st.dictionaries(st.sampled_from(list(Condition)), st.floats(0, 20, allow_nan=False), min_size=1)


@settings(max_examples=100, deadline=None)
@given(values, st.sampled_from([0.0, 0.05, 0.5]), st.randoms())
def test_rank_is_permutation_invariant(vals, tol, rnd):
    items = list(vals.items())
    shuffled = items[:]
    rnd.shuffle(shuffled)
    a, b = rank(items, tol), rank(shuffled, tol)
    assert a.conditions == b.conditions
    assert sorted(a.conditions) == sorted(vals)
    assert sorted(positions(a).values()) == list(range(1, len(vals) + 1))


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2 * math.pi), st.booleans())
def test_distances_isometry_invariant(angle, reflect):
    rng = np.random.default_rng(3)
    pts = {k: rng.normal(size=(5, 2)) for k in ("a", "b")}
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    if reflect:
        rot = rot @ np.diag([1.0, -1.0])

    def disp(tf):
        c1 = centroid_of(pts["a"] @ tf.T, C.ONL, M1)
        c2 = centroid_of(pts["b"] @ tf.T, C.ONL, M2)
        return observed_displacement(c1, c2)

    assert abs(disp(rot) - disp(np.eye(2))) < 1e-9
