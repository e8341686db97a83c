"""volwatch: sequential monitoring of GARCH(1,1) volatility regimes.

Detects parameter changes in a GARCH(1,1) process online, including moves
between stationary and explosive volatility, by tracking the CUSUM of the
quasi-Fisher scores of a training-sample QML fit against weighted boundary
functions.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .critical_values import (CvRequest, CvTable, build_cv_table,
                              cv_darling_erdos, simulate_cv_renyi,
                              simulate_cv_weighted)
from .delay import (ChangeSpec, DelayCase, DelayPrediction, estimate_delta,
                    estimate_sigma1, estimate_sigma2, estimate_upsilon,
                    make_change_spec, predict_delay, solve_u_star)
from .experiments import (ExperimentPlan, ExperimentResult, run_delay_study,
                          run_experiment)
from .garch import (Regime, RegimeClass, SimulatedPath, classify_regime,
                    lyapunov_exponent, simulate_path)
from .monitor import (DarlingErdos, Detected, MonitorConfig, MonitorState,
                      NoChange, Renyi, Weighted, boundary_value,
                      new_monitor_state, run_closed_ended,
                      run_closed_ended_with_trace, scan_scores, step)
from .params import DEFAULT_THETA_SPACE, GarchParams, InnovationDist, ThetaSpace
from .qmle import (QmleFit, ScoreCovariance, ScorePair, VolFilterState,
                   compute_D_hat, filter_step, fit_qmle,
                   neg_quasi_loglik_and_grad, run_score_filter)

__all__ = [
    "BACKEND",
    "GarchParams", "InnovationDist", "ThetaSpace", "DEFAULT_THETA_SPACE",
    "Regime", "RegimeClass", "SimulatedPath", "simulate_path",
    "lyapunov_exponent", "classify_regime",
    "VolFilterState", "ScorePair", "ScoreCovariance", "QmleFit",
    "filter_step", "run_score_filter", "fit_qmle", "compute_D_hat",
    "neg_quasi_loglik_and_grad",
    "Weighted", "DarlingErdos", "Renyi", "MonitorConfig", "MonitorState",
    "Detected", "NoChange", "boundary_value", "new_monitor_state", "step",
    "scan_scores", "run_closed_ended", "run_closed_ended_with_trace",
    "CvRequest", "CvTable", "simulate_cv_weighted", "simulate_cv_renyi",
    "cv_darling_erdos", "build_cv_table",
    "ChangeSpec", "make_change_spec", "DelayCase", "DelayPrediction",
    "estimate_delta", "estimate_upsilon", "estimate_sigma1", "estimate_sigma2",
    "solve_u_star", "predict_delay",
    "ExperimentPlan", "ExperimentResult", "run_experiment", "run_delay_study",
]
