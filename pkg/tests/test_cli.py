import csv
import json

import pytest

from latentry.cli import EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED, main


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out), "--seed", "1"]) == 0
    return out


def _rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# tool=latentry")
    return list(csv.DictReader(lines[1:]))


def test_synth_outputs(synth_dir):
    planted = json.loads((synth_dir / "planted.json").read_text())
    assert planted["spec"]["seed"] == 1
    assert planted["planted_ranking"][0] == "OC3"
    with open(synth_dir / "dataset.csv") as fh:
        assert sum(1 for _ in fh) == 1 + 50 + 60 + 33 + 57 + 46 + 58 + 41 + 60 + 51 + 57 + 49 + 62


def test_analyze(synth_dir, tmp_path):
    assert main(["analyze", "--input", str(synth_dir / "dataset.csv"), "--out", str(tmp_path)]) == 0
    within = _rows(tmp_path / "within_session.csv")
    assert [r["condition"] for r in within] == ["ONL", "OBL", "OSL", "OC2.5", "OC3", "OC3P"]
    assert within[0]["m1_dist"] == "0.00" and within[0]["m1_rank"] == "1"
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["hierarchy_flags"]["observed:OC3<ONL<OC2.5"] is True


def test_analyze_core_with_csv_only(synth_dir, tmp_path):
    rc = main(["analyze", "--input", str(synth_dir / "dataset.csv"), "--out", str(tmp_path),
               "--analysis", "core", "--format", "csv"])
    assert rc == 0
    assert [r["condition"] for r in _rows(tmp_path / "displacements.csv")] == ["ONL", "OC2.5", "OC3"]
    assert not (tmp_path / "report.json").exists()


def test_train_eval_layout(synth_dir, tmp_path):
    rc = main(["train-eval", "--input", str(synth_dir / "dataset.csv"), "--out", str(tmp_path),
               "--analysis", "core", "--epochs", "30"])
    assert rc == 0
    for rel in ("pca.json", "summary.json", "full/report.json", "full/model.json", "full/centroids.csv",
                "held_out/rmse.csv", "loco/table.csv", "loco/OC2.5/report.json"):
        assert (tmp_path / rel).is_file(), rel
    held = _rows(tmp_path / "held_out" / "displacements.csv")
    assert [r["n_evaluated"] for r in held] == ["10", "9", "11"]
    model = json.loads((tmp_path / "full" / "model.json").read_text())
    assert (model["seed"], model["epochs"], model["lr"]) == (42, 30, 0.001)


def test_seed_from_environment(synth_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("LATENTRY_SEED", "7")
    rc = main(["train-eval", "--input", str(synth_dir / "dataset.csv"), "--out", str(tmp_path),
               "--analysis", "core", "--epochs", "5", "--protocols", "full"])
    assert rc == 0
    assert json.loads((tmp_path / "full" / "model.json").read_text())["seed"] == 7


@pytest.mark.parametrize("extra", [
    ["--analysis", "core", "--conditions", "OBL"],
    ["--conditions", "OC9"],
    ["--protocols", "full,bootstrap"],
    ["--holdout-frac", "1.5"],
    ["--epochs", "0"],
])
def test_config_errors(synth_dir, tmp_path, extra):
    args = ["train-eval", "--input", str(synth_dir / "dataset.csv"), "--out", str(tmp_path)] + extra
    assert main(args) == EXIT_CONFIG


def test_data_errors(tmp_path):
    assert main(["analyze", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == EXIT_DATA
    bad = tmp_path / "bad.csv"
    bad.write_text("probe,session,a\nONL,M1,1\n")
    assert main(["analyze", "--input", str(bad), "--out", str(tmp_path)]) == EXIT_DATA


def test_requested_condition_absent(tmp_path):
    src = tmp_path / "d.csv"
    src.write_text("condition,session,a,b\n" + "".join(f"ONL,M{s},{i},{i * i % 7}\n" for s in (1, 2) for i in range(4)))
    args = ["analyze", "--input", str(src), "--out", str(tmp_path / "o"), "--conditions", "ONL,OC3"]
    assert main(args) == EXIT_DATA


def test_divergence_exit_code(synth_dir, tmp_path):
    args = ["train-eval", "--input", str(synth_dir / "dataset.csv"), "--out", str(tmp_path),
            "--analysis", "core", "--epochs", "50", "--lr", "1e200", "--protocols", "full"]
    assert main(args) == EXIT_DIVERGED
