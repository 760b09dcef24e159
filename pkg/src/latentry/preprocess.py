"""Z-score standardization and the two-component PCA projection.

Both use population (divide-by-N) moments.  Axes are made deterministic by
flipping each one so that its largest-magnitude entry is non-negative.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DimensionMismatch, EmptyDataset
from .ingest import Dataset, Observation
from .labels import Condition, Session

log = logging.getLogger(__name__)

N_COMPONENTS = 2


@dataclass(frozen=True)
class StandardizationParams:
    means: np.ndarray
    stds: np.ndarray
    constant_columns: tuple[int, ...]

    @property
    def n_features(self) -> int:
        return self.means.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {x.shape[-1]}")
        scale = np.where(self.stds > 0, self.stds, 1.0)
        z = (x - self.means) / scale
        if self.constant_columns:
            z[..., list(self.constant_columns)] = 0.0
        return z


def _is_constant(std: np.ndarray, mean: np.ndarray) -> np.ndarray:
    return std <= 1e-12 * (1.0 + np.abs(mean))


def fit_standardization(ds: Dataset) -> StandardizationParams:
    if len(ds) == 0:
        raise EmptyDataset("cannot standardize an empty dataset")
    x = ds.features
    means = x.mean(axis=0)
    stds = np.sqrt(((x - means) ** 2).mean(axis=0))
    const = _is_constant(stds, means)
    stds = np.where(const, 0.0, stds)
    if const.any():
        log.info("constant feature columns: %s", [ds.feature_names[j] for j in np.flatnonzero(const)])
    return StandardizationParams(means, stds, tuple(int(j) for j in np.flatnonzero(const)))


def standardize(ds: Dataset, sp: StandardizationParams) -> Dataset:
    return Dataset(
        features=sp.apply(ds.features),
        conditions=ds.conditions,
        sessions=ds.sessions,
        feature_names=ds.feature_names,
        dropped=ds.dropped,
    )


@dataclass(frozen=True)
class PcaProjection:
    """Top-two principal axes of standardized data.

    ``axes`` has shape (2, F) with orthonormal rows.  ``rank_deficient`` is set
    when the second eigenvalue is numerically zero, in which case the second
    axis is an arbitrary orthonormal completion.
    """

    axes: np.ndarray
    explained_variance: np.ndarray
    standardization: StandardizationParams
    rank_deficient: bool = False

    def transform(self, features: np.ndarray) -> np.ndarray:
        """Map raw feature rows to (n, 2) latent coordinates."""
        features = np.asarray(features, dtype=float)
        if features.shape[-1] != self.axes.shape[1]:
            raise DimensionMismatch(f"expected {self.axes.shape[1]} features, got {features.shape[-1]}")
        return self.standardization.apply(features) @ self.axes.T

    def to_dict(self) -> dict:
        sp = self.standardization
        return {
            "means": sp.means.tolist(),
            "stds": sp.stds.tolist(),
            "axes": self.axes.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "constant_columns": list(sp.constant_columns),
            "rank_deficient": self.rank_deficient,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaProjection":
        sp = StandardizationParams(
            np.array(d["means"], dtype=float),
            np.array(d["stds"], dtype=float),
            tuple(d.get("constant_columns", ())),
        )
        return cls(
            axes=np.array(d["axes"], dtype=float),
            explained_variance=np.array(d["explained_variance"], dtype=float),
            standardization=sp,
            rank_deficient=bool(d.get("rank_deficient", False)),
        )

    def save(self, path) -> None:
        # json writes repr() floats, which round-trip exactly (17 sig. digits max)
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "PcaProjection":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _orient(axis: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(axis)))
    return -axis if axis[k] < 0 else axis


def principal_axes(z: np.ndarray, k: int = N_COMPONENTS) -> tuple[np.ndarray, np.ndarray, bool]:
    """Top-``k`` eigenpairs of the population covariance of ``z``.

    Works on the F x F covariance when N > F, otherwise on the N x N Gram
    matrix of the centered rows.  Returns (axes (k, F), eigenvalues (k,),
    rank_deficient).
    """
    z = np.asarray(z, dtype=float)
    n, f = z.shape
    xc = z - z.mean(axis=0)
    if n > f:
        vals, vecs = np.linalg.eigh(xc.T @ xc / n)
        order = np.argsort(vals)[::-1][:k]
        vals = np.clip(vals[order], 0.0, None)
        axes = vecs[:, order].T
    else:
        vals, u = np.linalg.eigh(xc @ xc.T / n)
        order = np.argsort(vals)[::-1][:k]
        vals = np.clip(vals[order], 0.0, None)
        axes = np.zeros((len(order), f))
        for i, j in enumerate(order):
            if vals[i] > 0:
                # right singular vector from the left one: v = X^T u / ||X^T u||
                v = xc.T @ u[:, j]
                axes[i] = v / np.linalg.norm(v)

    tol = 1e-10 * max(float(vals[0]), 1e-300)
    deficient = bool(vals[-1] <= tol)
    if vals[0] <= tol:
        vals[:] = 0.0
        axes[0] = np.eye(f)[0]
    for i in range(1, len(vals)):
        if vals[i] <= tol:
            # null directions are not identifiable; complete the basis instead
            vals[i] = 0.0
            v = np.eye(f)[int(np.argmin(np.abs(axes[:i]).sum(axis=0)))]
            v = v - axes[:i].T @ (axes[:i] @ v)
            axes[i] = v / np.linalg.norm(v)
    axes = np.array([_orient(a) for a in axes])
    return axes, vals, deficient


def fit_pca(ds_std: Dataset, standardization: StandardizationParams | None = None) -> PcaProjection:
    """Fit the two-axis projection on an already standardized dataset.

    ``standardization`` is stored on the result so :meth:`PcaProjection.transform`
    accepts raw features; when omitted an identity standardization is used.
    """
    n, f = ds_std.features.shape
    if n < 3:
        raise EmptyDataset(f"PCA needs at least 3 observations, got {n}")
    if f < N_COMPONENTS:
        raise DimensionMismatch(f"PCA needs at least {N_COMPONENTS} features, got {f}")
    axes, vals, deficient = principal_axes(ds_std.features)
    if deficient:
        log.warning("PCA is rank deficient: second principal axis is arbitrary")
    if standardization is None:
        standardization = StandardizationParams(np.zeros(f), np.ones(f), ())
    return PcaProjection(axes, vals, standardization, deficient)


def fit_projection(ds: Dataset) -> PcaProjection:
    """Standardize ``ds`` on its own moments and fit PCA on the result."""
    sp = fit_standardization(ds)
    return fit_pca(standardize(ds, sp), sp)


@dataclass(frozen=True)
class LatentPoint:
    pc1: float
    pc2: float
    condition: Condition
    session: Session

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.pc1, self.pc2])


def project(obs: Observation, p: PcaProjection) -> LatentPoint:
    pc1, pc2 = p.transform(obs.features[None, :])[0]
    return LatentPoint(float(pc1), float(pc2), obs.condition, obs.session)


@dataclass(frozen=True)
class LatentSet:
    """Projected dataset: (N, 2) coordinates with labels, in file order."""

    coords: np.ndarray
    conditions: tuple[Condition, ...]
    sessions: tuple[Session, ...]

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __iter__(self) -> Iterator[LatentPoint]:
        for i in range(len(self)):
            yield LatentPoint(float(self.coords[i, 0]), float(self.coords[i, 1]), self.conditions[i], self.sessions[i])

    def points(self, condition: Condition | None = None, session: Session | None = None) -> list[LatentPoint]:
        return [
            p for p in self
            if (condition is None or p.condition is condition) and (session is None or p.session is session)
        ]

    def select(self, condition: Condition, session: Session) -> np.ndarray:
        """Coordinates of one (condition, session) cell, in file order."""
        idx = [i for i in range(len(self)) if self.conditions[i] is condition and self.sessions[i] is session]
        return self.coords[idx]


def project_dataset(ds: Dataset, p: PcaProjection) -> LatentSet:
    return LatentSet(p.transform(ds.features), ds.conditions, ds.sessions)


def latent_array(points) -> np.ndarray:
    """(n, 2) array from a sequence of :class:`LatentPoint`."""
    pts = list(points)
    if not pts:
        return np.zeros((0, 2))
    return np.array([[p.pc1, p.pc2] for p in pts], dtype=float)
