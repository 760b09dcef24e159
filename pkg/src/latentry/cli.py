"""Command-line front end: ``synth``, ``analyze`` and ``train-eval``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
divergence during training.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DataError, DivergedLoss, UnknownCondition
from .evaluation import (
    Analysis,
    SplitSpec,
    eval_full,
    eval_held_out,
    eval_leave_condition_out,
    eval_within_session,
)
from .ingest import IngestConfig, load_dataset, write_dataset
from .labels import ALL_CONDITIONS, CORE_CONDITIONS, Condition, Session, hierarchy_key, parse_conditions
from .metrics import DEFAULT_TIE_TOL, centroid_of
from .mlp import TrainConfig, predict_coords, save_params
from .report import (
    Provenance,
    ranking_doc,
    report_doc,
    write_centroids,
    write_displacements_csv,
    write_json,
    write_latent_points,
    write_report,
    write_within_csv,
)
from .synth import SynthSpec, generate, planted_truth

log = logging.getLogger("latentry")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4
DEFAULT_SEED = 42


def _default_seed() -> int:
    env = os.environ.get("LATENTRY_SEED")
    if env is None or env == "":
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"LATENTRY_SEED must be an integer, got {env!r}") from None


def _file_digest(path: Path) -> str:
    try:
        return hashlib.sha256(path.read_bytes()).hexdigest()
    except OSError as exc:
        raise DataError(f"cannot read input {path}: {exc}") from exc


def _resolve_conditions(args) -> tuple[Condition, ...]:
    base = CORE_CONDITIONS if args.analysis == "core" else ALL_CONDITIONS
    if not args.conditions:
        return base
    try:
        chosen = parse_conditions(args.conditions)
    except UnknownCondition as exc:
        raise ConfigError(str(exc)) from None
    if not chosen:
        raise ConfigError("--conditions is empty")
    if args.analysis == "core" and not set(chosen) <= set(CORE_CONDITIONS):
        raise ConfigError("core analysis only admits ONL, OC2.5 and OC3")
    return chosen


def _parse_expect(values) -> list[tuple[Condition, ...]]:
    out = []
    for text in values or ():
        try:
            out.append(tuple(Condition.parse(tok) for tok in text.replace("<", ",").split(",") if tok.strip()))
        except UnknownCondition as exc:
            raise ConfigError(str(exc)) from None
    return out


def _formats(args) -> tuple[str, ...]:
    return tuple(sorted(set(args.format or ("csv", "json"))))


def _load(args, conditions) -> tuple[Analysis, list[str]]:
    path = Path(args.input)
    if not path.is_file():
        raise DataError(f"input {path} does not exist")
    cfg = IngestConfig.from_json(args.ingest_config) if args.ingest_config else IngestConfig()
    ds = load_dataset(path, cfg)
    present = set(ds.present_conditions)
    missing = [c for c in conditions if c not in present]
    if missing and args.conditions:
        raise DataError(f"requested conditions absent from input: {[str(c) for c in missing]}")
    conditions = tuple(c for c in conditions if c in present)
    if not conditions:
        raise DataError("none of the analysed conditions occur in the input")
    return Analysis.fit(ds, conditions), list(ds.dropped)


def _base_config(args, command: str, conditions) -> dict:
    return {
        "command": command,
        "input_sha256": _file_digest(Path(args.input)),
        "ingest_config": None if not args.ingest_config else _file_digest(Path(args.ingest_config)),
        "analysis": args.analysis,
        "conditions": [str(c) for c in conditions],
        "tie_tol": args.tie_tol,
        "expect": [hierarchy_key(h) for h in _parse_expect(args.expect)],
    }


def cmd_synth(args) -> int:
    spec = SynthSpec.from_json(args.spec) if args.spec else SynthSpec()
    if args.seed is not None:
        spec.seed = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = generate(spec)
    write_dataset(ds, out / "dataset.csv")
    write_json(out / "planted.json", planted_truth(spec))
    counts = ds.counts
    log.info("wrote %d rows (%d M1, %d M2) to %s", len(ds),
             sum(v for (c, s), v in counts.items() if s is Session.M1),
             sum(v for (c, s), v in counts.items() if s is Session.M2), out / "dataset.csv")
    return EXIT_OK


def cmd_analyze(args) -> int:
    conditions = _resolve_conditions(args)
    expect = _parse_expect(args.expect)
    a, dropped = _load(args, conditions)
    config = _base_config(args, "analyze", a.conditions)
    prov = Provenance(config, {"analysis": args.analysis})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    formats = _formats(args)

    rep = eval_within_session(a, tie_tol=args.tie_tol, expect=expect)
    if "csv" in formats:
        write_displacements_csv(out / "displacements.csv", rep.rows, prov)
        write_within_csv(out / "within_session.csv", rep, prov)
    if "json" in formats:
        write_json(out / "report.json", report_doc(rep, prov))
    a.projection.save(out / "pca.json")
    write_latent_points(out / "latent_points.csv", a.latent, prov)
    cents = [centroid_of(a.cell(c, s), c, s) for c in a.conditions for s in Session]
    write_centroids(out / "centroids.csv", cents, prov)
    write_json(out / "summary.json", {
        "provenance": prov.as_dict(),
        "conditions": [str(c) for c in a.conditions],
        "counts": {f"{c}/{s}": a.dataset.count(c, s) for c in a.conditions for s in Session},
        "dropped_columns": dropped,
        "n_features": a.dataset.n_features,
        "explained_variance": a.projection.explained_variance.tolist(),
        "rank_deficient": a.projection.rank_deficient,
        "longitudinal_ranking": ranking_doc(rep.observed_ranking),
        "hierarchy_flags": rep.hierarchy_flags,
    })
    return EXIT_OK


def cmd_train_eval(args) -> int:
    conditions = _resolve_conditions(args)
    expect = _parse_expect(args.expect)
    seed = args.seed if args.seed is not None else _default_seed()
    split_seed = args.split_seed if args.split_seed is not None else seed
    try:
        cfg = TrainConfig(epochs=args.epochs, seed=seed, lr=args.lr)
        split = SplitSpec(args.holdout_frac, split_seed, args.split_rule)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.epochs < 1 or cfg.lr <= 0:
        raise ConfigError("epochs must be >= 1 and lr > 0")
    protocols = set(args.protocols.split(","))
    if not protocols <= {"full", "held_out", "loco"}:
        raise ConfigError(f"unknown protocol in {args.protocols!r}")

    a, dropped = _load(args, conditions)
    config = {
        **_base_config(args, "train-eval", a.conditions),
        "epochs": cfg.epochs, "lr": cfg.lr, "seed": cfg.seed,
        "split_seed": split.seed, "holdout_fraction": split.holdout_fraction, "split_rule": split.rule,
        "protocols": sorted(protocols),
    }
    prov = Provenance(config, {
        "analysis": args.analysis, "seed": cfg.seed, "split_seed": split.seed,
        "epochs": cfg.epochs, "lr": cfg.lr, "split": split.describe(),
    })
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    formats = _formats(args)
    a.projection.save(out / "pca.json")
    summary = {
        "provenance": prov.as_dict(),
        "conditions": [str(c) for c in a.conditions],
        "dropped_columns": dropped,
        "hierarchy_flags": {},
        "rankings": {},
    }

    if "full" in protocols:
        rep = eval_full(a, cfg=cfg, tie_tol=args.tie_tol, expect=expect)
        write_report(out / "full", rep, prov, formats)
        params = rep.model
        save_params(params, cfg, out / "full" / "model.json")
        cents = [centroid_of(a.cell(c, s), c, s) for c in a.conditions for s in Session]
        pred = {c: centroid_of(predict_coords(params, a.cell(c, Session.M1), c), c, Session.M2) for c in a.conditions}
        write_centroids(out / "full" / "centroids.csv", cents, prov, pred)
        summary["hierarchy_flags"]["full"] = rep.hierarchy_flags
        summary["rankings"]["full"] = {
            "observed": ranking_doc(rep.observed_ranking),
            "predicted": ranking_doc(rep.predicted_ranking),
        }
    if "held_out" in protocols:
        rep = eval_held_out(a, cfg=cfg, spec=split, tie_tol=args.tie_tol, expect=expect)
        write_report(out / "held_out", rep, prov, formats)
        summary["hierarchy_flags"]["held_out"] = rep.hierarchy_flags
        summary["held_out_global_rmse"] = rep.global_rmse
    if "loco" in protocols and len(a.conditions) >= 2:
        folds = eval_leave_condition_out(a, cfg=cfg, tie_tol=args.tie_tol)
        for rep in folds:
            write_report(out / "loco" / str(rep.withheld), rep, prov, formats)
        if "csv" in formats:
            write_displacements_csv(out / "loco" / "table.csv", [r.rows[0] for r in folds], prov,
                                    with_rmse=True, label="held_out_condition")
        summary["loco_folds"] = [str(r.withheld) for r in folds]
    elif "loco" in protocols:
        log.warning("leave-condition-out skipped: needs at least two conditions")

    write_json(out / "summary.json", summary)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="recordings CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--analysis", choices=("core", "extended"), default="extended")
    p.add_argument("--conditions", help="comma-separated subset, e.g. ONL,OC2.5,OC3")
    p.add_argument("--tie-tol", type=float, default=DEFAULT_TIE_TOL)
    p.add_argument("--format", action="append", choices=("csv", "json"),
                   help="report format; repeat for both (default: both)")
    p.add_argument("--ingest-config", help="JSON {condition_col, session_col, exclude_cols}")
    p.add_argument("--expect", action="append",
                   help="extra hierarchy to flag, e.g. OSL<ONL<OC3 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentry", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"latentry {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with planted shifts")
    p.add_argument("spec", nargs="?", help="SynthSpec JSON (default spec if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="latent projection, displacements, within-session hierarchy")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train-eval", help="train the network and run the evaluation protocols")
    _add_common(p)
    p.add_argument("--epochs", type=int, default=800)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seed", type=int, help="model seed (default: $LATENTRY_SEED or 42)")
    p.add_argument("--split-seed", type=int, help="held-out split seed (default: model seed)")
    p.add_argument("--holdout-frac", type=float, default=0.2)
    p.add_argument("--split-rule", choices=("random", "last"), default="random")
    p.add_argument("--protocols", default="full,held_out,loco")
    p.set_defaults(func=cmd_train_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"latentry: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergedLoss as exc:
        print(f"latentry: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, OSError) as exc:
        print(f"latentry: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
