import numpy as np
import pytest

from latentry.errors import ConfigError
from latentry.evaluation import Analysis
from latentry.labels import ALL_CONDITIONS, Condition, Session
from latentry.metrics import centroid_of
from latentry.synth import TABLE1_COUNTS, SynthSpec, generate, planted_ranking, planted_truth


def test_counts_match_spec():
    ds = generate(SynthSpec())
    for c in ALL_CONDITIONS:
        assert (ds.count(c, Session.M1), ds.count(c, Session.M2)) == TABLE1_COUNTS[c]
    assert ds.n_features == 60


def test_deterministic_per_seed():
    a, b, c = generate(SynthSpec(seed=4)), generate(SynthSpec(seed=4)), generate(SynthSpec(seed=5))
    np.testing.assert_array_equal(a.features, b.features)
    assert not np.array_equal(a.features, c.features)


def test_noise_free_cells_are_identical():
    ds = generate(SynthSpec(noise_sigma=0.0))
    for c in ALL_CONDITIONS:
        for s in Session:
            rows = ds.features[ds.mask(c, s)]
            assert np.abs(rows - rows[0]).max() < 1e-9


def test_noise_free_displacements_equal_planted_norms():
    spec = SynthSpec(noise_sigma=0.0)
    a = Analysis.fit(generate(spec))
    for c, shift in spec.shifts().items():
        d = np.linalg.norm(centroid_of(a.cell(c, Session.M2), c, Session.M2).xy
                           - centroid_of(a.cell(c, Session.M1), c, Session.M1).xy)
        assert abs(d - np.linalg.norm(shift)) < 0.02 * np.linalg.norm(shift)


def test_planted_ranking():
    assert planted_ranking(SynthSpec()).conditions[:2] == (Condition.OC3, Condition.OC3P)
    tie = SynthSpec(planted_shifts={Condition.ONL: (1.0, 0.0), Condition.OC3: (0.0, 1.0)},
                    counts={Condition.ONL: (3, 3), Condition.OC3: (3, 3)})
    assert len(planted_ranking(tie).tie_groups) == 1
    assert planted_ranking(SynthSpec(counts={})).conditions == ()


def test_linear_shift_model():
    spec = SynthSpec(shift_model="linear_in_descriptors")
    norms = [np.linalg.norm(v) for v in spec.shifts().values()]
    assert 5.0 < min(norms) and max(norms) < 7.0


def test_spec_validation_and_json(tmp_path):
    with pytest.raises(ConfigError):
        SynthSpec(shift_model="quadratic")
    with pytest.raises(ConfigError):
        SynthSpec.from_dict({"bogus": 1})
    with pytest.raises(ConfigError):
        generate(SynthSpec(n_features=4, condition_offsets={c: (10.0 * c.order, 0.0) for c in ALL_CONDITIONS}))
    spec = SynthSpec(seed=9, noise_sigma=0.1)
    back = SynthSpec.from_dict(spec.to_dict())
    np.testing.assert_array_equal(generate(back).features, generate(spec).features)
    doc = planted_truth(spec)
    assert doc["planted_ranking"][0] == "OC3"
