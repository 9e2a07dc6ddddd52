"""Log entropy functionals along discretized Ricci flows on closed surfaces."""

from .conjugate_heat import BackwardSolution, backward_solve, normalize, u_form_solve
from .errors import (
    DomainError,
    HypothesisViolated,
    LogEntropyError,
    NoConvergence,
    NonPositiveField,
    NonPositiveTau,
    NotNormalized,
    PositivityLost,
    SingularTime,
    StepTooLarge,
    TimeMisaligned,
    ZeroField,
)
from .experiments import (
    ExperimentConfig,
    Tolerances,
    VerificationReport,
    coupled_run,
    refinement_study,
    run_constant_monotonicity,
    run_identity_suite,
    run_monotonicity_suite,
    run_soliton_check,
)
from .flow import FlowConfig, Trajectory, evolve, ricci_step
from .functionals import (
    EntropyReport,
    adjusted_log_entropy,
    b_const,
    energy,
    entropy,
    entropy_report,
    h_minimize,
    lambda0,
    log_entropy,
    optimal_sigma,
    perelman_W,
    w_lower_bound,
)
from .logsobolev import (
    MinimizeConfig,
    SobolevInput,
    estimate_constant,
    prop_lower_bound,
    validate_sobolev_input,
)
from .manifold import (
    Kind,
    ManifoldSpec,
    MetricState,
    conformal_metric,
    integrate,
    laplace_beltrami,
    round_metric,
    scalar_curvature,
    soliton_defect,
    volume,
)

__version__ = "0.1.0"
