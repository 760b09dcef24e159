"""Export of evaluation reports.

CSV tables mirror the published table layouts and print distances with two
decimals; JSON documents keep full precision.  Every file opens with a
provenance record (tool version, config hash, seeds) and contains nothing
time-dependent, so equal configurations give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .evaluation import EvaluationReport
from .labels import Condition, Session
from .metrics import Centroid, Ranking
from .preprocess import LatentSet


@dataclass(frozen=True)
class Provenance:
    config: dict
    fields: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def as_dict(self) -> dict:
        return {"tool": "latentry", "version": __version__, "config_hash": self.config_hash, **self.fields}

    def comment(self) -> str:
        return "# " + " ".join(f"{k}={v}" for k, v in self.as_dict().items())


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.2f}"


def _write_csv(path: Path, prov: Provenance, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    buf.write(prov.comment() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def ranking_doc(r: Ranking | None) -> dict | None:
    if r is None:
        return None
    return {
        "order": [str(c) for c in r.conditions],
        "values": {str(c): v for c, v in r.ordered},
        "tie_groups": [[str(c) for c in r.conditions if c in g] for g in r.tie_groups],
    }


def report_doc(rep: EvaluationReport, prov: Provenance) -> dict:
    return {
        "provenance": prov.as_dict(),
        "protocol": rep.protocol,
        "withheld": str(rep.withheld) if rep.withheld else None,
        "rows": [
            {
                "condition": str(r.condition),
                "observed_displacement": r.d_obs,
                "predicted_displacement": r.d_pred,
                "centroid_error": r.e_centroid,
                "pointwise_rmse": r.rmse,
                "n_evaluated": r.n_eval,
            }
            for r in rep.rows
        ],
        "global_rmse": rep.global_rmse,
        "final_loss": rep.final_loss,
        "observed_ranking": ranking_doc(rep.observed_ranking),
        "predicted_ranking": ranking_doc(rep.predicted_ranking),
        "hierarchy_flags": rep.hierarchy_flags,
        "within_session": None if rep.within is None else [
            {
                "condition": str(w.condition),
                "m1_dist": w.m1_dist, "m1_rank": w.m1_rank,
                "m2_dist": w.m2_dist, "m2_rank": w.m2_rank,
                "displacement": w.displacement, "long_rank": w.long_rank,
            }
            for w in rep.within
        ],
    }


def write_displacements_csv(path: Path, rows: Sequence, prov: Provenance, with_counts: bool = False,
                            with_rmse: bool = False, label: str = "condition") -> None:
    header = [label]
    if with_counts:
        header.append("n_evaluated")
    header += ["observed_displacement", "predicted_displacement", "centroid_error"]
    if with_rmse:
        header.append("pointwise_rmse")
    out = []
    for r in rows:
        line = [str(r.condition)]
        if with_counts:
            line.append(r.n_eval)
        line += [_fmt(r.d_obs), _fmt(r.d_pred), _fmt(r.e_centroid)]
        if with_rmse:
            line.append(_fmt(r.rmse))
        out.append(line)
    _write_csv(path, prov, header, out)


def write_within_csv(path: Path, rep: EvaluationReport, prov: Provenance) -> None:
    header = ["condition", "m1_dist", "m1_rank", "m2_dist", "m2_rank", "displacement", "long_rank"]
    rows = [
        [str(w.condition), _fmt(w.m1_dist), w.m1_rank, _fmt(w.m2_dist), w.m2_rank, _fmt(w.displacement), w.long_rank]
        for w in rep.within or []
    ]
    _write_csv(path, prov, header, rows)


def write_rmse_csv(path: Path, rep: EvaluationReport, prov: Provenance) -> None:
    _write_csv(path, prov, ["condition", "pointwise_rmse"], [[str(r.condition), _fmt(r.rmse)] for r in rep.rows])


def write_latent_points(path: Path, latent: LatentSet, prov: Provenance) -> None:
    rows = [[str(p.condition), str(p.session), repr(p.pc1), repr(p.pc2)] for p in latent]
    _write_csv(path, prov, ["condition", "session", "pc1", "pc2"], rows)


def write_centroids(path: Path, centroids: Sequence[Centroid], prov: Provenance,
                    predicted: dict[Condition, Centroid] | None = None) -> None:
    """Plot-ready centroid trajectories: one row per (condition, session, kind)."""
    rows = [[str(c.condition), str(c.session), "observed", repr(c.pc1), repr(c.pc2), c.n] for c in centroids]
    for c in (predicted or {}).values():
        rows.append([str(c.condition), str(Session.M2), "predicted", repr(c.pc1), repr(c.pc2), c.n])
    _write_csv(path, prov, ["condition", "session", "kind", "pc1", "pc2", "n"], rows)


def write_report(outdir: Path, rep: EvaluationReport, prov: Provenance, formats: Sequence[str]) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    if "json" in formats:
        write_json(outdir / "report.json", report_doc(rep, prov))
    if "csv" in formats:
        held = rep.protocol in ("held_out", "leave_condition_out")
        write_displacements_csv(outdir / "displacements.csv", rep.rows, prov,
                                with_counts=rep.protocol == "held_out", with_rmse=held)
        if rep.protocol == "held_out":
            write_rmse_csv(outdir / "rmse.csv", rep, prov)
        if rep.within is not None:
            write_within_csv(outdir / "within_session.csv", rep, prov)
