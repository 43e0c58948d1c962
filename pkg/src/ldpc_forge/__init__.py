"""Density-evolution thresholds and derivative-free degree-distribution search
for standard and multi-edge-type LDPC ensembles."""
from .ensemble import (
    PUNCTURED,
    TRANSMITTED,
    ChkType,
    DegreeDistribution,
    InvalidEnsembleError,
    MetEnsemble,
    VarType,
    design_rate,
    met_mirror,
    validate,
    validate_met,
)
from .bec import bec_converges, met_bec_converges
from .awgn import Grid, awgn_converges, channel_density
from .threshold import BEC, BIAWGN, CandidateEvaluator, ensemble_threshold, make_channel, threshold
from .parameterize import DegreeStructure, InfeasibleStructureError, MetStructure, parameterize
from .optimize import ConfigError, OptimizerConfig, optimize
from .structure import CostSurface, MetSpec, StandardSpec, StructureObjective, outer_ar, outer_dife, outer_random
from .experiment import ExperimentConfig, import_ensemble, run

__all__ = [
    "PUNCTURED", "TRANSMITTED", "ChkType", "DegreeDistribution", "InvalidEnsembleError",
    "MetEnsemble", "VarType", "design_rate", "met_mirror", "validate", "validate_met",
    "bec_converges", "met_bec_converges", "Grid", "awgn_converges", "channel_density",
    "BEC", "BIAWGN", "CandidateEvaluator", "ensemble_threshold", "make_channel", "threshold",
    "DegreeStructure", "InfeasibleStructureError", "MetStructure", "parameterize",
    "ConfigError", "OptimizerConfig", "optimize", "CostSurface", "MetSpec", "StandardSpec",
    "StructureObjective", "outer_ar", "outer_dife", "outer_random", "ExperimentConfig",
    "import_ensemble", "run",
]
