"""Active inference core for Free Energy Agent"""

from .base import (
    DimensionError,
    DivergenceError,
    ImpossibleObservationError,
    InsufficientSamplesError,
    PlanningBudgetError,
    PlanningError,
    SingularMatrixError,
    ToolkitError,
)
from .gencoords import (
    GeneralizedPrecision,
    GeneralizedVector,
    SmoothnessKernel,
    embed_taylor,
    generalized_precision,
    shift,
    smoothness_precision,
)
from .model import (
    AttractorGoal,
    AttractorModel,
    FunctionModel,
    GenerativeModel,
    LinearModel,
    NoiseSpec,
    PreferenceModel,
    attractor_dynamics,
    boltzmann_preference,
    jacobians,
    linear_dynamics,
)
from .inference import (
    Beliefs,
    EstimatorConfig,
    PredictionErrors,
    belief_precision,
    prediction_errors,
    run_filter,
    step_estimate,
    vfe,
    vfe_gradient,
)
from .control import (
    ActionState,
    ControllerConfig,
    PidGains,
    pid_controller,
    run_aic,
    sensory_action_jacobian,
    step_action,
)
from .planning import (
    CemConfig,
    DiscretePOMDP,
    EFEBreakdown,
    GaussianPlan,
    Plan,
    PlannerConfig,
    PlanPosterior,
    RolloutPerception,
    bayes_update,
    cem_optimize,
    efe_plan,
    efe_timestep,
    plan_act_loop,
    plan_posterior,
    predict_rollout,
    select_action,
)

__all__ = [
    'DimensionError', 'DivergenceError', 'ImpossibleObservationError', 'InsufficientSamplesError',
    'PlanningBudgetError', 'PlanningError', 'SingularMatrixError', 'ToolkitError',
    'GeneralizedPrecision', 'GeneralizedVector', 'SmoothnessKernel', 'embed_taylor',
    'generalized_precision', 'shift', 'smoothness_precision',
    'AttractorGoal', 'AttractorModel', 'FunctionModel', 'GenerativeModel', 'LinearModel',
    'NoiseSpec', 'PreferenceModel', 'attractor_dynamics', 'boltzmann_preference', 'jacobians',
    'linear_dynamics',
    'Beliefs', 'EstimatorConfig', 'PredictionErrors', 'belief_precision', 'prediction_errors',
    'run_filter', 'step_estimate', 'vfe', 'vfe_gradient',
    'ActionState', 'ControllerConfig', 'PidGains', 'pid_controller', 'run_aic',
    'sensory_action_jacobian', 'step_action',
    'CemConfig', 'DiscretePOMDP', 'EFEBreakdown', 'GaussianPlan', 'Plan', 'PlannerConfig',
    'PlanPosterior', 'RolloutPerception', 'bayes_update', 'cem_optimize', 'efe_plan', 'efe_timestep',
    'plan_act_loop', 'plan_posterior', 'predict_rollout', 'select_action',
]
