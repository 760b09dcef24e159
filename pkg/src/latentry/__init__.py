"""Latent-space approximation of longitudinal gait reorganization.

Projects per-stride gait recordings onto a PC1-PC2 plane, measures M1->M2
centroid displacement per occlusal probe, and fits a small feed-forward
network to the latent transformation.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConfigError,
    DataError,
    DivergedLoss,
    LatentryError,
)
from .labels import Condition, Session  # noqa: F401
