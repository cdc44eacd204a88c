"""Adaptive-steplength stochastic approximation toolkit.

Projected SA engine (sa_core), harmonic/recursive/cascading steplength policies
(steplength), closed-form error bounds (bounds), local randomized smoothing
(smoothing), three benchmark problems with reference solvers (problems), and a
replication harness with CSV output (harness).
"""

from .bounds import (
    BoundParams,
    csa_bound_trajectory,
    e_k_recursion,
    q_factor,
    rsa_bound_trajectory,
    rsa_nonsmooth_bound_trajectory,
    transient_persistent,
)
from .harness import (
    ConfidenceInterval,
    ExperimentConfig,
    ExperimentResult,
    confidence_interval,
    emit_csv,
    emit_metadata,
    resolve_config,
    run_replications,
)
from .problems import (
    BimatrixProblem,
    NetworkProblem,
    Reference,
    UtilityProblem,
    bimatrix_oracle,
    capacity_vector,
    network_gradient,
    project_capacity,
    project_simplex,
    saa_reference,
    utility_oracle,
)
from .sa_core import (
    SaddlePoint,
    SaRunRecord,
    Trajectory,
    run_sa,
    run_saddle_sa,
    sa_step,
    saddle_step,
)
from .smoothing import (
    BallDistribution,
    SmoothedOracle,
    ball_volume_coeff,
    sample_ball,
    smoothed_subgradient,
    smoothed_value_estimate,
    smoothing_lipschitz,
)
from .steplength import (
    CsaParams,
    CsaPolicy,
    CsaState,
    HsaPolicy,
    RsaPolicy,
    csa_gamma,
    csa_phase1,
    csa_regime_length,
    csa_schedule,
    hsa_gamma,
    rsa_init,
    rsa_next,
    rsa_nonsmooth_init,
)

__version__ = "0.1.0"
