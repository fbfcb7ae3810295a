"""Numerical verification of stochastic integration driven by cylindrical
Lévy processes on finite truncation spaces.

The package is organized bottom-up:

``linalg``
    Hilbert–Schmidt maps, contractions, partitions of a time interval.
``measures``
    Jump-measure representations (atomic, stable, sampled clouds) and the
    stable-law coefficient calculus.
``characteristics``
    Cylindrical characteristics, pushforwards to genuine triplets, the
    truncated-drift composition rule, and partition-limit estimators.
``driver``
    Samplable drivers for every supported kind, with path tables and
    decoupled (tangent) copies.
``modular``
    Step functions, the energy/drift modular, its quasi-metric and
    metrization, and dyadic step approximation.
``integrate``
    Stochastic integrals of deterministic and predictable step processes,
    empirical laws, contraction-supremum searches, tangent pairs,
    decoupling diagnostics, and a small-case exact enumeration oracle.
``config`` / ``checks`` / ``cli``
    Experiment configuration, the named verification batteries, and the
    command-line runner.
"""

from .characteristics import (
    CylCharacteristics,
    GenuineTriplet,
    MCEstimate,
    SOperator,
    compose_contraction,
    partition_drift_estimate,
    partition_energy_estimate,
    pushforward,
    s_operator,
)
from .checks import CHECKS, check_ids, run_check
from .config import CheckResult, ExperimentConfig, Report, merge_reports
from .driver import (
    Driver,
    PathTable,
    cms_symmetric_stable,
    decoupled_driver,
    driver_from_payload,
    driver_to_payload,
    positive_stable,
)
from .integrate import (
    Always,
    CoordinateAbove,
    CountAbove,
    DecouplingReport,
    EmpiricalLaw,
    GammaSearchResult,
    GeneralIntegral,
    NormAbove,
    Otherwise,
    Predicate,
    PredicateCoverageError,
    PredictableStepProcess,
    TangentPair,
    decoupling_ratio,
    empirical_char_function,
    emery_sup_diagnostic,
    enumerate_cp_law,
    integrate_general,
    integrate_step_det,
    integrate_step_pred,
    randomized_modular,
    sup_gamma_ky_fan,
    tangent_pair,
)
from .linalg import Contraction, HSMap, Partition, random_hs_map, sample_contraction
from .measures import (
    AtomicJumps,
    CanonicalStableJumps,
    DiagonalStableJumps,
    NoJumps,
    PushedDiagonalStable,
    PushedStable,
    SampledJumps,
    UnsupportedMeasureError,
    cosine_tail_constant,
    energy_coefficient,
    gaussian_abs_moment,
    tail_coefficient,
)
from .modular import (
    DriftBound,
    MetrizationParams,
    MetrizationResult,
    ModularValue,
    StepApproximationError,
    StepFunction,
    drift_sup,
    dyadic_stage,
    energy_of,
    metrize,
    modular_of,
    quasi_metric,
    random_step_function,
    step_approximate,
)
from .rng import derive

__version__ = "0.1.0"

__all__ = [
    "AtomicJumps",
    "Always",
    "CHECKS",
    "CanonicalStableJumps",
    "CheckResult",
    "Contraction",
    "CoordinateAbove",
    "CountAbove",
    "CylCharacteristics",
    "DecouplingReport",
    "DiagonalStableJumps",
    "DriftBound",
    "Driver",
    "EmpiricalLaw",
    "ExperimentConfig",
    "GammaSearchResult",
    "GeneralIntegral",
    "GenuineTriplet",
    "HSMap",
    "MCEstimate",
    "MetrizationParams",
    "MetrizationResult",
    "ModularValue",
    "NoJumps",
    "NormAbove",
    "Otherwise",
    "Partition",
    "PathTable",
    "Predicate",
    "PredicateCoverageError",
    "PredictableStepProcess",
    "PushedDiagonalStable",
    "PushedStable",
    "Report",
    "SOperator",
    "SampledJumps",
    "StepApproximationError",
    "StepFunction",
    "TangentPair",
    "UnsupportedMeasureError",
    "check_ids",
    "cms_symmetric_stable",
    "compose_contraction",
    "cosine_tail_constant",
    "decoupled_driver",
    "decoupling_ratio",
    "derive",
    "drift_sup",
    "driver_from_payload",
    "driver_to_payload",
    "dyadic_stage",
    "emery_sup_diagnostic",
    "empirical_char_function",
    "energy_coefficient",
    "energy_of",
    "gaussian_abs_moment",
    "enumerate_cp_law",
    "integrate_general",
    "integrate_step_det",
    "integrate_step_pred",
    "merge_reports",
    "metrize",
    "modular_of",
    "partition_drift_estimate",
    "partition_energy_estimate",
    "positive_stable",
    "pushforward",
    "quasi_metric",
    "random_hs_map",
    "random_step_function",
    "randomized_modular",
    "run_check",
    "s_operator",
    "sample_contraction",
    "step_approximate",
    "tail_coefficient",
    "tangent_pair",
]
