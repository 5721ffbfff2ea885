"""Parsimonious single-step basis approximation of supply curves."""

from .curve_model import Bid, StepCurve, build_curve, evaluate, merge_breakpoints
from .evaluation import (
    CurvePanel,
    NoNaivePairsError,
    mean_approx_error,
    mean_prediction_error,
    naive_prediction_error,
    scale_panel,
)
from .node_selection import (
    ConditionalEmpirical,
    MarginalEmpirical,
    UniformGrid,
    conditional_threshold,
    quantile_nodes,
    select_nodes,
)
from .projection import (
    Approximation,
    DegenerateIntervalError,
    NodeSet,
    UnconstrainedTailWarning,
    fit,
    fit_lr,
    loss,
    project_l2,
    reconstruct,
    theta_l2_coeffs,
    weighted_integrals,
)
from .report import ErrorReport, comparison_report
from .weighting import ExponentialWeight, TruncatedUniformWeight, interval_mass, parse_weight, tail_mass

__version__ = "0.1.0"
