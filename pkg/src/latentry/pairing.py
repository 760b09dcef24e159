"""Computational M1->M2 training pairs and descriptor encoding of probes.

Pairs are index-aligned in recording order after truncating the longer
session to the shorter one.  They are a computational device, not a
stride-level correspondence.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptySide, SessionMismatch
from .labels import Condition, Session
from .preprocess import LatentPoint, LatentSet, latent_array

# Input layout fed to the network.
INPUT_COLUMNS = (
    "pc1",
    "pc2",
    "dental_contact",
    "open_mouth",
    "strong_clench",
    "vdo_increase_deg",
    "protrusion_mm",
    "transition",
)
N_INPUTS = len(INPUT_COLUMNS)

TRANSITION = 1.0


@dataclass(frozen=True)
class DescriptorVector:
    dental_contact: int
    open_mouth: int
    strong_clench: int
    vdo_increase_deg: float
    protrusion_mm: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.dental_contact, self.open_mouth, self.strong_clench, self.vdo_increase_deg, self.protrusion_mm],
            dtype=float,
        )


_DESCRIPTORS = {
    Condition.ONL: DescriptorVector(1, 0, 0, 0.0, 0.0),
    Condition.OBL: DescriptorVector(0, 1, 0, 0.0, 0.0),
    Condition.OSL: DescriptorVector(1, 0, 1, 0.0, 0.0),
    Condition.OC25: DescriptorVector(1, 0, 0, 2.5, 0.0),
    Condition.OC3: DescriptorVector(1, 0, 0, 3.0, 0.0),
    Condition.OC3P: DescriptorVector(1, 0, 0, 3.0, 2.0),
}


def encode_condition(c: Condition) -> DescriptorVector:
    return _DESCRIPTORS[c]


@dataclass(frozen=True)
class TrainingPair:
    input_latent: tuple[float, float]
    descriptor: DescriptorVector
    target_latent: tuple[float, float]
    condition: Condition
    pair_index: int
    transition: float = TRANSITION


def build_pairs(m1_points: Sequence[LatentPoint], m2_points: Sequence[LatentPoint], c: Condition) -> list[TrainingPair]:
    for p in m1_points:
        if p.condition is not c or p.session is not Session.M1:
            raise SessionMismatch(f"expected {c}/M1 points, got {p.condition}/{p.session}")
    for p in m2_points:
        if p.condition is not c or p.session is not Session.M2:
            raise SessionMismatch(f"expected {c}/M2 points, got {p.condition}/{p.session}")
    return pairs_from_arrays(latent_array(m1_points), latent_array(m2_points), c)


def pairs_from_arrays(m1: np.ndarray, m2: np.ndarray, c: Condition) -> list[TrainingPair]:
    if len(m1) == 0 or len(m2) == 0:
        raise EmptySide(f"{c}: M1 has {len(m1)} and M2 has {len(m2)} points")
    desc = encode_condition(c)
    n = min(len(m1), len(m2))
    return [
        TrainingPair(
            (float(m1[i, 0]), float(m1[i, 1])),
            desc,
            (float(m2[i, 0]), float(m2[i, 1])),
            c,
            i,
        )
        for i in range(n)
    ]


def pairs_for(latent: LatentSet, conditions: Sequence[Condition]) -> dict[Condition, list[TrainingPair]]:
    return {
        c: pairs_from_arrays(latent.select(c, Session.M1), latent.select(c, Session.M2), c)
        for c in conditions
    }


def assemble_input(p: TrainingPair) -> np.ndarray:
    return np.concatenate([p.input_latent, p.descriptor.as_array(), [p.transition]])


def model_inputs(latent_m1: np.ndarray, c: Condition) -> np.ndarray:
    """(n, 8) network inputs for M1 coordinates of condition ``c``."""
    latent_m1 = np.asarray(latent_m1, dtype=float).reshape(-1, 2)
    tail = np.concatenate([encode_condition(c).as_array(), [TRANSITION]])
    return np.hstack([latent_m1, np.broadcast_to(tail, (latent_m1.shape[0], tail.size))])


def design(pairs: Sequence[TrainingPair]) -> tuple[np.ndarray, np.ndarray]:
    """Stack pairs into (inputs (n, 8), targets (n, 2))."""
    x = np.array([assemble_input(p) for p in pairs], dtype=float).reshape(-1, N_INPUTS)
    y = np.array([p.target_latent for p in pairs], dtype=float).reshape(-1, 2)
    return x, y


def write_pairs(pairs: Sequence[TrainingPair], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair_index", "condition", "in_pc1", "in_pc2", "target_pc1", "target_pc2"])
        for p in pairs:
            w.writerow([p.pair_index, str(p.condition), *map(repr, p.input_latent), *map(repr, p.target_latent)])
