"""Loading and indexing of per-stride gait recordings.

Input is a UTF-8 CSV with a header row, one row per observation and explicit
condition/session columns.  Every other column is a candidate feature; the
ones named in the ingest config are dropped, as is any column that fails to
parse as a finite number in some row.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    AllFeaturesExcluded,
    ConfigError,
    EmptyDataset,
    MissingColumn,
    RaggedRows,
    UnknownCondition,
)
from .labels import Condition, Session

log = logging.getLogger(__name__)

# Non-numerical or technical fields the insole exports carry.
TECHNICAL_COLUMNS = ("side", "flag", "overflow")


@dataclass(frozen=True)
class Observation:
    condition: Condition
    session: Session
    features: np.ndarray


@dataclass(frozen=True)
class IngestConfig:
    condition_col: str = "condition"
    session_col: str = "session"
    exclude_cols: tuple[str, ...] = TECHNICAL_COLUMNS

    @classmethod
    def from_json(cls, path) -> "IngestConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read ingest config {path}: {exc}") from exc
        unknown = set(raw) - {"condition_col", "session_col", "exclude_cols"}
        if unknown:
            raise ConfigError(f"unknown ingest config keys: {sorted(unknown)}")
        return cls(
            condition_col=raw.get("condition_col", "condition"),
            session_col=raw.get("session_col", "session"),
            exclude_cols=tuple(raw.get("exclude_cols", TECHNICAL_COLUMNS)),
        )


@dataclass(frozen=True)
class Dataset:
    """Observations stored column-wise.

    ``features`` is an (N, F) float array whose rows follow file order;
    ``conditions`` and ``sessions`` are the matching label tuples.
    ``dropped`` records non-numeric columns removed at load time.
    """

    features: np.ndarray
    conditions: tuple[Condition, ...]
    sessions: tuple[Session, ...]
    feature_names: tuple[str, ...]
    dropped: tuple[str, ...] = field(default=())

    def __post_init__(self):
        n, f = self.features.shape
        if len(self.conditions) != n or len(self.sessions) != n:
            raise ValueError("label tuples must match the number of feature rows")
        if len(self.feature_names) != f:
            raise ValueError("feature_names must match the number of columns")
        self.features.setflags(write=False)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def observations(self) -> list[Observation]:
        return list(self)

    def __iter__(self) -> Iterator[Observation]:
        for i in range(len(self)):
            yield Observation(self.conditions[i], self.sessions[i], self.features[i])

    @property
    def counts(self) -> dict[tuple[Condition, Session], int]:
        return dict(Counter(zip(self.conditions, self.sessions)))

    def count(self, condition: Condition, session: Session) -> int:
        return self.counts.get((condition, session), 0)

    @property
    def present_conditions(self) -> tuple[Condition, ...]:
        seen = set(self.conditions)
        return tuple(c for c in Condition if c in seen)

    def mask(self, condition: Condition | None = None, session: Session | None = None) -> np.ndarray:
        m = np.ones(len(self), dtype=bool)
        if condition is not None:
            m &= np.array([c is condition for c in self.conditions], dtype=bool)
        if session is not None:
            m &= np.array([s is session for s in self.sessions], dtype=bool)
        return m

    def take(self, index: np.ndarray) -> "Dataset":
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        return Dataset(
            features=self.features[index].copy(),
            conditions=tuple(self.conditions[i] for i in index),
            sessions=tuple(self.sessions[i] for i in index),
            feature_names=self.feature_names,
            dropped=self.dropped,
        )

    @classmethod
    def from_observations(cls, observations: Iterable[Observation], feature_names: Sequence[str]) -> "Dataset":
        obs = list(observations)
        if not obs:
            raise EmptyDataset("no observations")
        return cls(
            features=np.array([o.features for o in obs], dtype=float),
            conditions=tuple(o.condition for o in obs),
            sessions=tuple(o.session for o in obs),
            feature_names=tuple(feature_names),
        )


def _parse_float(text: str) -> float | None:
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_dataset(path, config: IngestConfig | None = None) -> Dataset:
    """Read a recordings CSV into a :class:`Dataset`.

    Rows whose condition or session label does not parse are skipped with a
    warning.  Columns listed in ``config.exclude_cols`` are dropped silently
    (absent ones are ignored); columns with any non-numeric or non-finite
    cell are dropped and listed in ``Dataset.dropped``.
    """
    config = config or IngestConfig()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EmptyDataset(f"{path}: file has no header")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r and any(cell.strip() for cell in r)]

    for col in (config.condition_col, config.session_col):
        if col not in header:
            raise MissingColumn(f"{path}: required column {col!r} not in header")
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise RaggedRows(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")

    ci = header.index(config.condition_col)
    si = header.index(config.session_col)
    excluded = set(config.exclude_cols) | {config.condition_col, config.session_col}
    candidates = [j for j, name in enumerate(header) if name not in excluded]

    conditions: list[Condition] = []
    sessions: list[Session] = []
    kept_rows: list[list[str]] = []
    for lineno, row in enumerate(body, start=2):
        try:
            c = Condition.parse(row[ci])
            s = Session.parse(row[si])
        except (UnknownCondition, ValueError):
            log.warning("%s:%d: skipping row with labels %r/%r", path, lineno, row[ci], row[si])
            continue
        conditions.append(c)
        sessions.append(s)
        kept_rows.append(row)
    if not kept_rows:
        raise EmptyDataset(f"{path}: no rows with a valid condition and session")

    numeric_cols: list[int] = []
    dropped: list[str] = []
    columns: list[list[float]] = []
    for j in candidates:
        values = [_parse_float(row[j]) for row in kept_rows]
        if any(v is None for v in values):
            dropped.append(header[j])
            continue
        numeric_cols.append(j)
        columns.append(values)
    for name in dropped:
        log.warning("%s: dropping non-numeric column %r", path, name)
    if not numeric_cols:
        raise AllFeaturesExcluded(f"{path}: no numeric feature columns left")

    features = np.array(columns, dtype=float).T
    return Dataset(
        features=np.ascontiguousarray(features),
        conditions=tuple(conditions),
        sessions=tuple(sessions),
        feature_names=tuple(header[j] for j in numeric_cols),
        dropped=tuple(dropped),
    )


def select_features(ds: Dataset, exclude: Iterable[str]) -> Dataset:
    exclude = set(exclude)
    unknown = exclude - set(ds.feature_names) - set(TECHNICAL_COLUMNS)
    if unknown:
        raise ValueError(f"cannot exclude unknown features: {sorted(unknown)}")
    keep = [j for j, name in enumerate(ds.feature_names) if name not in exclude]
    if not keep:
        raise AllFeaturesExcluded("every feature column was excluded")
    if len(keep) == ds.n_features:
        return ds
    return Dataset(
        features=ds.features[:, keep].copy(),
        conditions=ds.conditions,
        sessions=ds.sessions,
        feature_names=tuple(ds.feature_names[j] for j in keep),
        dropped=ds.dropped,
    )


def subset_conditions(ds: Dataset, keep: Iterable[Condition]) -> Dataset:
    keep = set(keep)
    if not keep:
        raise ValueError("keep must name at least one condition")
    idx = np.array([i for i, c in enumerate(ds.conditions) if c in keep], dtype=int)
    if idx.size == 0:
        raise EmptyDataset(f"no observations for {sorted(str(c) for c in keep)}")
    if idx.size == len(ds):
        return ds
    return ds.take(idx)


def write_dataset(ds: Dataset, path, extra_columns: dict[str, Sequence[str]] | None = None) -> None:
    """Write ``ds`` in the CSV layout :func:`load_dataset` reads."""
    extra_columns = extra_columns or {}
    header = ["condition", "session", *extra_columns, *ds.feature_names]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(ds)):
            w.writerow(
                [str(ds.conditions[i]), str(ds.sessions[i])]
                + [col[i] for col in extra_columns.values()]
                + [repr(float(v)) for v in ds.features[i]]
            )
