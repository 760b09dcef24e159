import json

from latentry.evaluation import eval_within_session
from latentry.report import Provenance, report_doc, write_displacements_csv, write_report


def test_provenance_is_stable():
    a = Provenance({"b": 1, "a": [1, 2]}, {"seed": 3})
    b = Provenance({"a": [1, 2], "b": 1}, {"seed": 3})
    assert a.config_hash == b.config_hash
    assert a.comment().startswith("# tool=latentry version=")
    assert "seed=3" in a.comment()
    assert Provenance({"b": 2}).config_hash != a.config_hash


def test_csv_two_decimals_json_full_precision(tmp_path, small_ds):
    rep = eval_within_session(small_ds)
    prov = Provenance({"x": 1})
    write_displacements_csv(tmp_path / "d.csv", rep.rows, prov)
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[1] == "condition,observed_displacement,predicted_displacement,centroid_error"
    assert len(lines[2].split(",")[1].split(".")[1]) == 2
    doc = report_doc(rep, prov)
    assert doc["rows"][0]["observed_displacement"] == rep.rows[0].d_obs
    write_report(tmp_path / "r", rep, prov, ("json",))
    assert json.loads((tmp_path / "r" / "report.json").read_text())["protocol"] == "within_session"
    assert not (tmp_path / "r" / "displacements.csv").exists()
