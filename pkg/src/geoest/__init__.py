"""geoest: linear-then-project estimation for single-index observations,
with the mean-width geometry that predicts its error."""

__version__ = "0.1.0"

from .types import (  # noqa: F401
    SparseCone,
    LowRankCone,
    L1Ball,
    EuclideanBall,
    FullSpace,
    FeasibleSet,
    Identity,
    Sign,
    OddMonomial,
    LinearCombination,
    GaussianNoise,
    LogisticNoise,
    ObservationModel,
    ModelParams,
    contains,
    eval_link,
)
from .sampler import (  # noqa: F401
    MeasurementBatch,
    CompletionMask,
    gen_measurements,
    gen_observations,
    gen_mask,
    observe_completion,
    mix_seed,
)
from .projections import (  # noqa: F401
    project,
    hard_threshold,
    svd_hard_threshold,
    project_l1_ball,
    normalize_to_sphere,
)
from .model_params import (  # noqa: F401
    closed_form_params,
    quadrature_params,
    monte_carlo_params,
    compute_cf,
    cf_candidates,
)
from .geometry import (  # noqa: F401
    WidthEstimate,
    MinimaxRadii,
    width_sup_sample,
    local_mean_width,
    global_mean_width,
    width_bound_formula,
    packing_lower_bound,
    minimax_radii,
)
from .estimators import (  # noqa: F401
    linear_estimator,
    projected_estimator,
    rescaled_estimator,
    direction_estimator,
    completion_estimator,
)
from .bench import (  # noqa: F401
    ExperimentConfig,
    ExperimentResult,
    CompletionConfig,
    run_trial,
    run_experiment,
    evaluate_bounds,
    run_completion_experiment,
)
