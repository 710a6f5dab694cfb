"""Lyapunov stability certificates for piecewise-affine systems driven by
ReLU network controllers: a learner proposing candidates at the analytic
center of a cut system, and an exact branch-and-bound verifier acting as
the cutting-plane oracle."""

from .accpm import AccpmConfig, BisectGamma, Certificate, bisect_gamma, choose_epsilon, synthesize
from .dynamics import (
    ClosedLoop,
    ControllerSpec,
    PwaMode,
    PwaSystem,
    ReluNetwork,
    saturated_linear_controller,
)
from .geometry import Box, Face, Polytope
from .learner import CandidateParam, Cut, LocalizationSet, analytic_center
from .lp import LpProblem, LpSolution, LpStatus
from .qp_exact import QuadraticForm, extremize
from .roa import RoaEstimate, control_invariant_set, estimate_roa, is_positive_invariant
from .verifier import (
    VerifierOptions,
    VerifierResult,
    verify_linear_objective,
    verify_projected,
    verify_pwq,
    verify_quadratic,
)

__version__ = "0.1.0"

__all__ = [
    "AccpmConfig",
    "BisectGamma",
    "Box",
    "CandidateParam",
    "Certificate",
    "ClosedLoop",
    "ControllerSpec",
    "Cut",
    "Face",
    "LocalizationSet",
    "LpProblem",
    "LpSolution",
    "LpStatus",
    "Polytope",
    "PwaMode",
    "PwaSystem",
    "QuadraticForm",
    "ReluNetwork",
    "RoaEstimate",
    "VerifierOptions",
    "VerifierResult",
    "analytic_center",
    "bisect_gamma",
    "choose_epsilon",
    "control_invariant_set",
    "estimate_roa",
    "extremize",
    "is_positive_invariant",
    "saturated_linear_controller",
    "synthesize",
    "verify_linear_objective",
    "verify_projected",
    "verify_pwq",
    "verify_quadratic",
    "__version__",
]
