"""Finite-block tools for quantum hypothesis testing between a translation
invariant state and an i.i.d. reference: relative entropies, type-class
pinching, Neyman-Pearson brackets, relative AEP windows and ergodic
decompositions of Markov-lift states."""

from .aep import (
    LLRSample,
    SeparatingProjectorReport,
    TruncationSplit,
    WindowSpec,
    build_separating_projector,
    classical_llr_trajectories,
    truncate_spectrum,
    window_membership,
)
from .entropy import (
    classical_kl,
    mean_relative_entropy_sequence,
    relative_entropy,
    shannon_entropy,
    von_neumann_entropy,
)
from .ergodic import GlDecomposition, component_audit, gl_decompose
from .operators import (
    DensityOperator,
    DimensionCapError,
    HermitianOperator,
    partial_trace,
    spectral_decompose,
    tensor_power,
)
from .pinching import abelian_restriction, build_type_classes, hiai_petz_audit, pinch
from .states import (
    IID,
    FinitelyCorrelated,
    MarkovLift,
    RotatedMarkovLift,
    check_ergodicity,
    cross_term,
    rate_report,
)
from .testing import (
    BetaBracket,
    TestPoint,
    beta_bracket,
    classical_np_exact,
    np_spectral_curve,
    stein_scan,
    weak_converse_bound,
)

__version__ = "0.1.0"

__all__ = [
    "BetaBracket",
    "DensityOperator",
    "DimensionCapError",
    "FinitelyCorrelated",
    "GlDecomposition",
    "HermitianOperator",
    "IID",
    "LLRSample",
    "MarkovLift",
    "RotatedMarkovLift",
    "SeparatingProjectorReport",
    "TestPoint",
    "TruncationSplit",
    "WindowSpec",
    "abelian_restriction",
    "beta_bracket",
    "build_separating_projector",
    "build_type_classes",
    "check_ergodicity",
    "classical_kl",
    "classical_llr_trajectories",
    "classical_np_exact",
    "component_audit",
    "cross_term",
    "gl_decompose",
    "hiai_petz_audit",
    "mean_relative_entropy_sequence",
    "np_spectral_curve",
    "partial_trace",
    "pinch",
    "rate_report",
    "relative_entropy",
    "shannon_entropy",
    "spectral_decompose",
    "stein_scan",
    "tensor_power",
    "truncate_spectrum",
    "von_neumann_entropy",
    "weak_converse_bound",
    "window_membership",
]
