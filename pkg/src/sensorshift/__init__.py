"""Causal transfer learning from demonstrations under sensor-shift.

Identification of action-effects and demonstrator policies from spectator
observations: exact solution polytopes, the linear-Gaussian transfer
estimator, averaging proxies, and the information-theoretic gap bounds,
with generators reproducing both desk-scale experiments.
"""

from .action_effect import (
    CovarianceBlocks,
    EffectEstimate,
    LinearGaussianModel,
    average_proxy,
    discrete_effect_solution_set,
    effect_bounds,
    full_observation_estimate,
    linear_average_proxy_estimate,
    linear_transfer_estimate,
    population_covariances,
    proxy_gap_bound,
    mean_squared_error,
    transfer_from_covariances,
)
from .errors import (
    CombinatorialLimitError,
    DimensionLimitError,
    InconsistentSystemError,
    InfeasibleSystemError,
    InputError,
    NumericalError,
    SensorShiftError,
    SupportViolationError,
    UndefinedConditionalError,
    ZeroProbabilityError,
)
from .identify import (
    IdentificationSystem,
    LinearConstraint,
    SolutionPolytope,
    enumerate_solution_vertices,
    polytope_contains,
    project_rhs_feasible,
    row_reduce_to_full_rank,
    select_point_lp,
)
from .imitation import (
    Policy,
    PolicyConstraint,
    WorldModel,
    behavior_kl,
    bound_case1,
    bound_case2,
    exact_policy_solution_set,
    induced_behavior,
    policy_divergence,
    policy_from_joint,
    proxy_case1,
    proxy_case2,
    proxy_case3,
    select_policy_lp,
)
from .information import (
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    kl_divergence,
    max_conditional_entropy,
    relative_entropy,
)
from .samples import SampleSet
from .sim import (
    CarFollowConfig,
    DrivingSceneConfig,
    carfollow_model,
    carfollow_policy_cov,
    driving_scene_channel,
    estimate_joint,
    gaussian_bin_channel,
    generate_carfollow,
    generate_carfollow_with_state,
    generate_driving_scene,
    random_case1_world,
    random_discrete_effect_model,
    true_driving_policy,
)
from .spaces import (
    ConditionalTable,
    JointTable,
    VariableSpace,
    condition,
    extend,
    marginalize,
    reorder,
)

__version__ = "0.1.0"
