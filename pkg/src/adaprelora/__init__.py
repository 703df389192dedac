"""Gradient-statistics-aware preconditioned updates for low-rank factors.

The public surface re-exports the pieces most callers need; submodules hold
the full API.
"""
__version__ = "0.1.0"

from ._backend import available_backends, backend_name, set_backend
from .errors import ConfigError, ContractError, NonFiniteGradientError, SingularGramError
from .generator import (
    FactorDirection,
    FactorPair,
    apply_adjoint,
    apply_jacobian,
    jacobian_gram_factor,
    jacobian_gram_w,
    kernel_direction,
    vectorized_jacobian,
)
from .optimizers import (
    MomentumMode,
    MomentumState,
    OptimizerConfig,
    init_factors,
    make_optimizer,
    step_adaprelora_momentum,
    step_adaprelora_sgd,
    step_factor_sgd,
    step_identity_projected,
    step_scaled_gd,
)
from .precond import (
    AdafactorState,
    DiagWeights,
    apply_h,
    apply_h_inv,
    build_weights,
    update_stats,
    weighted_inner,
)
from .problems import ProblemInstance, loss_and_gradient, make_problem
from .projection import project_standard, project_weighted
from .solver import (
    GaugeParameter,
    GradientBundle,
    UpdateDelta,
    closed_form_update,
    family_solution,
    imbalance,
    optimal_gauge,
)
