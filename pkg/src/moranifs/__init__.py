"""Moran-type iterated function systems: attractors, measures, dimensions, separation."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .core import Box, ContractionMap, Kind, Layer, LayerSystem, WeightSequence
from .errors import (
    ConfigError,
    CutsetLimitError,
    GuardError,
    InvariantError,
    MoranError,
    ProviderRangeError,
    UnsupportedCompositionError,
    UnsupportedGeometryError,
)
from .families import explicit_system, family_system
from .words import Cutset, Word, compose, cutset, cylinder_weight, log_cutset_count
from .attractor import PointCloud, attractor_equation_gap, cover, sample_measure
from .dimension import (
    box_dim_formula,
    dimension_report,
    hausdorff_dim,
    measure_class,
    solve_sk,
)
from .separation import (
    check_mosc,
    check_mssc,
    gamma2_mwhp,
    gamma3_mbdp,
    gamma4_neighbors,
    near_identity_gap,
)
from .config import load_system, parse_system

__all__ = [
    "BACKEND", "Box", "ContractionMap", "Kind", "Layer", "LayerSystem", "WeightSequence",
    "ConfigError", "CutsetLimitError", "GuardError", "InvariantError", "MoranError", "ProviderRangeError",
    "UnsupportedCompositionError", "UnsupportedGeometryError",
    "explicit_system", "family_system",
    "Cutset", "Word", "compose", "cutset", "cylinder_weight", "log_cutset_count",
    "PointCloud", "attractor_equation_gap", "cover", "sample_measure",
    "box_dim_formula", "dimension_report", "hausdorff_dim", "measure_class", "solve_sk",
    "check_mosc", "check_mssc", "gamma2_mwhp", "gamma3_mbdp", "gamma4_neighbors", "near_identity_gap",
    "load_system", "parse_system",
]
