"""Convex training of threshold-activation networks.

Arrangement enumeration, Lasso / closed-form convex solvers, network
reconstruction and straight-through-estimator baselines.
"""
from .arrangements import (
    ArrangementMatrix,
    ArrangementPattern,
    count_bound,
    deep_construct,
    enumerate_exact,
    is_complete,
    sample_arrangements,
)
from .data import gen_synthetic, load_csv, representation_transform
from .errors import (
    BudgetExceededError,
    DimensionError,
    InfeasibleError,
    RealizationError,
    ThreshConvexError,
    UnsupportedLossError,
    ValidationError,
)
from .experiment import ExperimentSpec, MetricsRow, run_experiment
from .model import (
    Dataset,
    Layer,
    RegularizedObjective,
    Subnetwork,
    ThresholdNetwork,
    canonicalize,
    forward,
    objective,
)
from .prox import project_l1_ball, prox_linf
from .reconstruction import (
    build_from_delta,
    build_two_layer,
    caratheodory_decompose,
    realize_pinv,
    realize_svm,
)
from .solvers import (
    ConvexSolution,
    LassoProblem,
    closed_form_solve,
    critical_width,
    kkt_check,
    lasso_solve,
    min_norm_interpolate,
)
from .ste import SteConfig, TrainTrace, multi_trial, ste_train

__version__ = "0.1.0"
