"""Quasi-maximum-likelihood estimation and the per-observation score filter.

The fitted object carries everything monitoring needs: the coefficient
estimates, the score covariance over the training sample, and the terminal
filter state from which the post-sample recursion resumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .params import DEFAULT_THETA_SPACE, GarchParams, ThetaSpace

__all__ = [
    "VolFilterState",
    "ScorePair",
    "ScoreCovariance",
    "QmleFit",
    "QmleError",
    "initial_filter_state",
    "filter_step",
    "run_score_filter",
    "neg_quasi_loglik_and_grad",
    "multistart_points",
    "backcast_sigma2",
    "training_init_sigma2",
    "fit_qmle",
    "compute_D_hat",
]

_BAD_OBJECTIVE = 1e300


class QmleError(RuntimeError):
    """Raised when no usable estimate can be produced from the training data."""


class ScorePair(NamedTuple):
    """Quasi-Fisher score of one observation in the (alpha, beta) coordinates."""

    s_alpha: float
    s_beta: float


@dataclass(frozen=True)
class VolFilterState:
    """State of the volatility/derivative filter after an observation.

    ``d_*`` are the normalised derivative ratios (d sigma2 / d theta_j) / sigma2;
    ``last_y2_over_sigma2`` is y^2/sigma2 of the most recent observation, so the
    squared return needed by the next step is recoverable as
    ``last_y2_over_sigma2 * exp(log_sigma2)``.
    """

    log_sigma2: float
    d_omega: float
    d_alpha: float
    d_beta: float
    last_y2_over_sigma2: float

    @property
    def sigma2(self) -> float:
        return math.exp(self.log_sigma2)

    @property
    def y_prev_sq(self) -> float:
        return self.last_y2_over_sigma2 * math.exp(self.log_sigma2)


def initial_filter_state(y0_sq: float, sigma0_sq: float) -> VolFilterState:
    """Fresh filter state: zero derivative recursion initial values."""
    if not (sigma0_sq > 0 and math.isfinite(sigma0_sq) and math.isfinite(y0_sq)):
        raise ValueError("need finite y0_sq and positive finite sigma0_sq")
    return VolFilterState(log_sigma2=math.log(sigma0_sq), d_omega=0.0,
                          d_alpha=0.0, d_beta=0.0,
                          last_y2_over_sigma2=y0_sq / sigma0_sq)


def filter_step(state: VolFilterState, theta: GarchParams,
                y_prev: float, y_curr: float) -> tuple[VolFilterState, ScorePair, float]:
    """Advance the filter one observation.

    Returns the new state, the (alpha, beta) score of ``y_curr`` and its
    quasi-likelihood term ``log sigma2 + y^2/sigma2``.
    """
    if not (math.isfinite(y_prev) and math.isfinite(y_curr)):
        raise ValueError("non-finite observation passed to filter_step")
    om, al, be = theta.omega, theta.alpha, theta.beta
    l_prev = state.log_sigma2
    yp_sq = y_prev * y_prev
    l = l_prev + math.log(be + (om + al * yp_sq) * math.exp(-l_prev))
    s = math.exp(l)
    r = math.exp(l_prev - l)
    d_al = yp_sq / s + be * state.d_alpha * r
    d_be = r * (1.0 + be * state.d_beta)
    d_om = 1.0 / s + be * state.d_omega * r
    z = y_curr * y_curr / s
    f = 1.0 - z
    new = VolFilterState(log_sigma2=l, d_omega=d_om, d_alpha=d_al, d_beta=d_be,
                         last_y2_over_sigma2=z)
    return new, ScorePair(f * d_al, f * d_be), l + z


def run_score_filter(y: np.ndarray, theta: GarchParams,
                     state: VolFilterState) -> tuple[np.ndarray, np.ndarray, np.ndarray, VolFilterState]:
    """Bulk filter pass over ``y`` starting from ``state``.

    Returns ``(scores, loglik_terms, log_sigma2, final_state)`` with ``scores``
    of shape ``(len(y), 2)``.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    s_al, s_be, ll, ls2, fin = _kernels.score_filter(
        y, state.y_prev_sq, state.log_sigma2,
        state.d_omega, state.d_alpha, state.d_beta,
        theta.omega, theta.alpha, theta.beta)
    final = VolFilterState(log_sigma2=fin[0], d_omega=fin[1], d_alpha=fin[2],
                           d_beta=fin[3], last_y2_over_sigma2=fin[4])
    return np.column_stack([s_al, s_be]), ll, ls2, final


def neg_quasi_loglik_and_grad(y: np.ndarray, omega: float, alpha: float, beta: float,
                              y0_sq: float, sigma0_sq: float) -> tuple[float, np.ndarray]:
    """Objective sum(log sigma2_i + y_i^2/sigma2_i) and its (omega, alpha, beta) gradient."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    nll, g_om, g_al, g_be = _kernels.nll_grad(y, y0_sq, math.log(sigma0_sq),
                                              omega, alpha, beta)
    return nll, np.array([g_om, g_al, g_be])


@dataclass(frozen=True)
class ScoreCovariance:
    """Average outer product of the training scores (the 2x2 matrix D-hat)."""

    matrix: np.ndarray
    rank_deficient: bool

    # Ratio below which the smaller eigenvalue counts as numerically zero.
    EIGEN_RTOL = 1e-10

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "ScoreCovariance":
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        eig = np.linalg.eigvalsh(m)
        deficient = bool(eig[0] <= cls.EIGEN_RTOL * max(eig[-1], 0.0))
        return cls(matrix=m, rank_deficient=deficient)

    @property
    def is_invertible(self) -> bool:
        return not self.rank_deficient

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def inverse(self) -> np.ndarray:
        if self.rank_deficient:
            raise QmleError("score covariance is rank deficient; "
                            "training sample unusable for monitoring")
        return np.linalg.inv(self.matrix)


def compute_D_hat(scores: Sequence[ScorePair] | np.ndarray) -> ScoreCovariance:
    """(1/m) sum of score outer products, flagged when numerically singular."""
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("scores must be an (n, 2) array or sequence of ScorePair")
    if arr.shape[0] < 2:
        raise ValueError("need at least two scores")
    return ScoreCovariance.from_matrix(arr.T @ arr / arr.shape[0])


@dataclass(frozen=True)
class QmleFit:
    """Training-sample estimate plus everything monitoring resumes from."""

    theta_hat: GarchParams
    neg_quasi_loglik: float
    D_hat: ScoreCovariance
    final_filter: VolFilterState
    converged: bool
    boundary_contact: bool
    n_restarts_used: int
    init_sigma2: float


def backcast_sigma2(y: np.ndarray, span: int = 75, decay: float = 0.94) -> float:
    """Exponentially weighted average of the leading squared returns.

    Tracks the variance scale at the *start* of the sample, which is the scale
    the recursion's initial value actually needs.
    """
    head = np.asarray(y[:span], dtype=np.float64) ** 2
    w = decay ** np.arange(head.size)
    return float((w / w.sum()) @ head)


def training_init_sigma2(y: np.ndarray) -> float:
    """Default filter initial value: the sample variance, guarded against
    explosive samples.

    On a stationary sample the full-sample variance is the least-noisy scale
    estimate.  On an explosive sample it reflects the end-of-sample scale and
    can exceed sigma_0^2 by many orders of magnitude, which biases the fit
    towards small beta; when it is grossly out of line with the early-sample
    backcast, fall back to the backcast.
    """
    return min(float(np.var(y)), 2.0 * backcast_sigma2(y))


def multistart_points(space: ThetaSpace, sample_var: float, lattice: int,
                      restarts: int, rng: np.random.Generator) -> list[tuple[float, float, float]]:
    """Initial points: coarse lattice, one variance-targeted start, random draws."""
    pts = space.lattice(lattice)
    # variance targeting at moderate persistence, standard GARCH warm start
    pts.append(space.clip(0.1 * max(sample_var, 1e-12), 0.1, 0.8))
    for _ in range(restarts):
        pts.append(space.sample(rng))
    return pts


def fit_qmle(y_train: np.ndarray,
             space: ThetaSpace = DEFAULT_THETA_SPACE,
             init_sigma2: float | None = None,
             restarts: int = 2,
             seed: int = 0,
             *,
             lattice: int = 3,
             polish: int = 4) -> QmleFit:
    """Box-constrained QML estimate of (omega, alpha, beta).

    Minimises the Gaussian quasi-likelihood kernel with its analytic gradient
    from several starts (all starts are pre-screened by objective value, the
    best ``polish`` are run through L-BFGS-B).  ``init_sigma2`` seeds both
    y_0^2 and sigma_0^2 of the filter; see :func:`training_init_sigma2` for the
    default.
    """
    y = np.ascontiguousarray(y_train, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] < 100:
        raise QmleError("need a 1-d training sample with at least 100 observations")
    if not np.all(np.isfinite(y)):
        raise QmleError("training sample contains non-finite values")
    if float(y.var()) == 0.0:
        raise QmleError("degenerate (constant) training sample")
    sample_var = training_init_sigma2(y)
    if sample_var <= 0:
        sample_var = float(y.var())
    if init_sigma2 is None:
        init_sigma2 = sample_var
    if not (init_sigma2 > 0 and math.isfinite(init_sigma2)):
        raise QmleError("init_sigma2 must be positive and finite")
    y0_sq = sigma0_sq = float(init_sigma2)

    def objective(x):
        nll, grad = neg_quasi_loglik_and_grad(y, x[0], x[1], x[2], y0_sq, sigma0_sq)
        if not (math.isfinite(nll) and np.all(np.isfinite(grad))):
            return _BAD_OBJECTIVE, np.zeros(3)
        return nll, grad

    rng = np.random.default_rng(seed)
    starts = multistart_points(space, sample_var, lattice, restarts, rng)
    values = [objective(np.asarray(p))[0] for p in starts]
    screened = [p for v, p in sorted(zip(values, starts)) if v < _BAD_OBJECTIVE]
    if not screened:
        raise QmleError("no start produced a finite objective")

    best = None
    n_polished = 0
    for point in screened[:max(1, polish)]:
        res = minimize(objective, np.asarray(point), jac=True, method="L-BFGS-B",
                       bounds=space.bounds())
        n_polished += 1
        if not math.isfinite(res.fun) or res.fun >= _BAD_OBJECTIVE:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise QmleError("optimisation failed from every start")

    om, al, be = space.clip(*best.x)
    theta_hat = GarchParams(omega=om, alpha=al, beta=be)
    scores, ll, _, final = run_score_filter(y, theta_hat,
                                            initial_filter_state(y0_sq, sigma0_sq))
    return QmleFit(theta_hat=theta_hat,
                   neg_quasi_loglik=float(ll.sum()),
                   D_hat=compute_D_hat(scores),
                   final_filter=final,
                   converged=bool(best.success),
                   boundary_contact=space.on_boundary(theta_hat),
                   n_restarts_used=n_polished,
                   init_sigma2=float(init_sigma2))
