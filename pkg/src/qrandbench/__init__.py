"""Maximal extractable secure randomness from finite-dimensional quantum states."""

from .entropy import (
    EntropyFamily,
    cq_divergence_beta,
    cq_down_entropy_closed,
    cq_down_entropy_numeric,
    cq_entropy_closed,
    cq_up_entropy_bracket,
    cq_up_entropy_closed,
    petz_conditional_entropy,
    renyi_entropy,
    sandwiched_divergence,
)
from .errors import QRandError
from .extraction import (
    HashSeed,
    RateQuery,
    RateReport,
    dupuis_bound,
    end_to_end_extract,
    objective,
    optimize_alpha,
    output_length,
    toeplitz_extract,
)
from .intrinsic import (
    ExtremalityCertificate,
    IntrinsicReport,
    extremal_perturbation,
    extremality_margin,
    max_intrinsic_povm,
    max_intrinsic_pvm,
    mub_pvm,
    optimality_residual,
    qubit_optimal_povm,
    refine_to_rank_one,
    uniform_povm,
)
from .quantum_core import (
    CqState,
    DensityMatrix,
    Measurement,
    PureState,
    canonical_purification,
    make_measurement,
    partial_trace,
    post_measurement_cq,
    validate_density,
)

__version__ = "0.1.0"
