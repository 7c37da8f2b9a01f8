"""Eigenstate labeling and photon-number-dependent cavity frequencies for transmon-cavity systems."""

__version__ = "0.1.0"

from .operators import SystemSpec, CouplingForm  # noqa: E402
from .spectrum import EigenSolution, diagonalize, solve  # noqa: E402
from .labeling import (  # noqa: E402
    ContinuityConfig,
    LabelLadder,
    compare_ladders,
    label_block,
    label_continuity,
    label_overlap,
    label_recursive,
)
from .observables import cavity_frequency_curve, detect_features, occupancy_curve  # noqa: E402

__all__ = [
    "SystemSpec",
    "CouplingForm",
    "EigenSolution",
    "diagonalize",
    "solve",
    "ContinuityConfig",
    "LabelLadder",
    "compare_ladders",
    "label_block",
    "label_continuity",
    "label_overlap",
    "label_recursive",
    "cavity_frequency_curve",
    "detect_features",
    "occupancy_curve",
]
