import numpy as np
import pytest

from latentry.ingest import Dataset
from latentry.labels import CORE_CONDITIONS, Condition, Session
from latentry.synth import SynthSpec, TABLE1_COUNTS


def make_dataset(counts, n_features=5, seed=0):
    rng = np.random.default_rng(seed)
    conds, sess, rows = [], [], []
    for c, (n1, n2) in counts.items():
        for s, n in ((Session.M1, n1), (Session.M2, n2)):
            centre = rng.normal(size=n_features) * 3
            rows.append(centre + rng.normal(size=(n, n_features)))
            conds += [c] * n
            sess += [s] * n
    names = tuple(f"f{j}" for j in range(n_features))
    return Dataset(np.vstack(rows), tuple(conds), tuple(sess), names)


@pytest.fixture
def small_ds():
    return make_dataset({Condition.ONL: (6, 7), Condition.OC25: (5, 6), Condition.OC3: (7, 5)})


@pytest.fixture
def core_spec():
    return SynthSpec(counts={c: TABLE1_COUNTS[c] for c in CORE_CONDITIONS})


# one summary line per acceptance criterion, filled by test_acceptance.py
_CRITERIA: dict[int, dict] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_") or report.when not in ("setup", "call"):
        return
    num = int(name.split("_")[2])
    entry = _CRITERIA.setdefault(num, {"outcome": "passed", "detail": ""})
    if report.failed:
        entry["outcome"] = "failed"
    for key, value in report.user_properties:
        if key == "detail":
            entry["detail"] = value


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        verdict = "PASS" if e["outcome"] == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {verdict}  {e['detail']}")
