"""Set-valued analysis in R^d: Minkowski averages, set convergence, random sets."""

from .convergence import ConvergenceReport, ProbeSet, SetSequence, diagnose
from .convexification import (
    FamilyNet,
    build_family_net,
    gamma_limit,
    mazur_conet,
    quantize,
    rational_witness,
    repeated_average,
    shapley_folkman_gap,
)
from .geometry import (
    CardinalityOverflow,
    ConvexBody,
    DimensionMismatch,
    PointCloud,
    PruneBudget,
    convex_hull,
    directed_excess,
    dist_point_set,
    hausdorff,
    minkowski_sum,
    prune,
    scale,
    set_norm,
)
from .harness import ExperimentConfig, RunReport, emit, run
from .radstrom import DirectionGrid, SupportVector, embed, embedded_distance
from .random_sets import (
    SimpleRandomSet,
    aumann_expectation,
    expectation_consistency,
    hukuhara_integral,
    sample_iid,
    selection_integral_sample,
)

__all__ = [
    "CardinalityOverflow",
    "ConvergenceReport",
    "ConvexBody",
    "DimensionMismatch",
    "DirectionGrid",
    "ExperimentConfig",
    "FamilyNet",
    "PointCloud",
    "ProbeSet",
    "PruneBudget",
    "RunReport",
    "SetSequence",
    "SimpleRandomSet",
    "SupportVector",
    "aumann_expectation",
    "build_family_net",
    "convex_hull",
    "diagnose",
    "directed_excess",
    "dist_point_set",
    "embed",
    "embedded_distance",
    "emit",
    "expectation_consistency",
    "gamma_limit",
    "hausdorff",
    "hukuhara_integral",
    "mazur_conet",
    "minkowski_sum",
    "prune",
    "quantize",
    "rational_witness",
    "repeated_average",
    "run",
    "sample_iid",
    "scale",
    "selection_integral_sample",
    "set_norm",
    "shapley_folkman_gap",
]
