"""Detection-delay theory: drift vectors, asymptotic variances, fixed points.

After a parameter change the score CUSUM picks up a deterministic drift: its
per-observation mean is Delta (post-change regime stationary) or Upsilon
(post-change regime explosive), both evaluated at the pre-change parameter.
These drive the centering/rescaling sequences v1..v6 and the variances
s1^2, s2^2 of the delay limit laws.  All expectations here are Monte Carlo
estimates with reported standard errors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .garch import Regime, RegimeClass, classify_regime, default_init_sigma2
from .monitor import DarlingErdos, MonitorConfig, Weighted
from .params import GarchParams, InnovationDist
from .qmle import QmleFit

__all__ = [
    "ChangeSpec",
    "make_change_spec",
    "DelayCase",
    "DelayPrediction",
    "estimate_delta",
    "estimate_upsilon",
    "estimate_sigma1",
    "estimate_sigma2",
    "solve_u_star",
    "predict_delay",
]


@dataclass(frozen=True)
class ChangeSpec:
    """A parameter change at monitoring index k_star (0 = at the first
    post-training observation)."""

    theta0: GarchParams
    thetaA: GarchParams
    k_star: int
    dist: InnovationDist
    post_regime: RegimeClass

    def __post_init__(self):
        if self.k_star < 0:
            raise ValueError("k_star must be >= 0")
        if (self.theta0.alpha, self.theta0.beta) == (self.thetaA.alpha, self.thetaA.beta):
            raise ValueError("the (alpha, beta) sub-vector must actually change")


def make_change_spec(theta0: GarchParams, thetaA: GarchParams, k_star: int,
                     dist: InnovationDist = InnovationDist.standard_normal(),
                     n_draws: int = 200_000, seed: int = 0) -> ChangeSpec:
    """Build a ChangeSpec, classifying the post-change regime by Monte Carlo."""
    regime = classify_regime(thetaA, dist, n_draws, seed)
    return ChangeSpec(theta0=theta0, thetaA=thetaA, k_star=k_star, dist=dist,
                      post_regime=regime)


def _post_change_scores(spec: ChangeSpec, n_obs: int, burn_in: int,
                        seed: int) -> np.ndarray:
    """Scores at theta0 along a path simulated under thetaA (burn-in dropped)."""
    rng = np.random.default_rng(seed)
    eps = spec.dist.sample(rng, burn_in + n_obs + 1)
    init = default_init_sigma2(spec.thetaA)
    s_al, s_be = _kernels.sim_score_filter(
        eps,
        spec.thetaA.omega, spec.thetaA.alpha, spec.thetaA.beta, math.log(init),
        spec.theta0.omega, spec.theta0.alpha, spec.theta0.beta, math.log(init))
    return np.column_stack([s_al, s_be])[burn_in:]


def _block_se(scores: np.ndarray, n_blocks: int = 50) -> np.ndarray:
    """Batch-means standard error of the mean of an autocorrelated series."""
    n = scores.shape[0]
    n_blocks = max(2, min(n_blocks, n // 20))
    usable = (n // n_blocks) * n_blocks
    blocks = scores[:usable].reshape(n_blocks, -1, scores.shape[1]).mean(axis=1)
    return blocks.std(axis=0, ddof=1) / math.sqrt(n_blocks)


def estimate_delta(spec: ChangeSpec, n_mc: int = 500_000, burn_in: int = 2_000,
                   seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Mean post-change score at theta0 under the stationary post-change law.

    Returns (estimate, standard_error), both length-2 arrays.
    """
    if spec.post_regime.value is not Regime.STATIONARY:
        raise ValueError("estimate_delta requires a stationary post-change regime")
    scores = _post_change_scores(spec, n_mc, burn_in, seed)
    return scores.mean(axis=0), _block_se(scores)


def estimate_upsilon(spec: ChangeSpec, n_mc: int = 500_000,
                     truncation: int = 2_000,
                     seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Time-average of the scores at theta0 along explosive post-change paths.

    ``truncation`` observations are discarded from the start of each path to
    wash out the filter transient.  Returns (estimate, standard_error).
    """
    if spec.post_regime.value is not Regime.EXPLOSIVE:
        raise ValueError("estimate_upsilon requires an explosive post-change regime")
    n_paths = 8
    per = max(1, n_mc // n_paths)
    chunks = []
    for j in range(n_paths):
        chunks.append(_post_change_scores(spec, per, truncation,
                                          np.random.SeedSequence([seed, j]).generate_state(1)[0]))
    scores = np.concatenate(chunks, axis=0)
    return scores.mean(axis=0), _block_se(scores)


def estimate_sigma1(spec: ChangeSpec, n_mc: int = 500_000, seed: int = 0,
                    burn_in: int = 2_000) -> np.ndarray:
    """Covariance of the post-change score at theta0 (stationary case)."""
    if spec.post_regime.value is not Regime.STATIONARY:
        raise ValueError("estimate_sigma1 requires a stationary post-change regime")
    scores = _post_change_scores(spec, n_mc, burn_in, seed)
    centred = scores - scores.mean(axis=0)
    m = centred.T @ centred / centred.shape[0]
    return 0.5 * (m + m.T)


def estimate_sigma2(spec: ChangeSpec, n_mc: int = 200_000,
                    truncation: int = 50, seed: int = 0,
                    form: str = "product", adaptive: bool = True) -> np.ndarray:
    """Score covariance under the explosive post-change regime.

    Monte Carlo over innovation draws of the truncated lag series (v1, v2),
    scaled by E(1 - eps^2)^2 computed from the same draws.  With ``adaptive``
    (product form only) extra lags are appended until the largest surviving
    weight falls below 1e-12.  Lags are drawn one column at a time so runs
    with the same seed but different truncations share their leading lags.
    """
    if spec.post_regime.value is not Regime.EXPLOSIVE:
        raise ValueError("estimate_sigma2 requires an explosive post-change regime")
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    a, b = spec.thetaA.alpha, spec.thetaA.beta
    rng = np.random.default_rng(seed)

    v1 = np.zeros(n_mc)
    v2 = np.zeros(n_mc)
    running = np.ones(n_mc)  # product of the factors so far (product form)
    sq_sum = 0.0
    sq_n = 0
    cap = 4096 if (adaptive and form == "product") else truncation
    j = 0
    while j < truncation or (j < cap and running.max() > 1e-12):
        eps = spec.dist.sample(rng, n_mc)
        eps_sq = eps * eps
        sq_sum += float(((1.0 - eps_sq) ** 2).sum())
        sq_n += n_mc
        factor = b / (a * eps_sq + b)
        if form == "product":
            # each factor is in (0,1): the lag weights decay geometrically
            running = running * factor
        elif form == "sum":
            running = (running + factor) if j else factor
        else:
            raise ValueError("form must be 'product' or 'sum'")
        weight = running / b
        v1 += eps_sq * weight
        v2 += weight
        j += 1

    v = np.column_stack([v1, v2])
    kurt_factor = sq_sum / sq_n
    m = kurt_factor * (v.T @ v) / n_mc
    return 0.5 * (m + m.T)


def solve_u_star(t_star: float, eta: float) -> float:
    """Positive root of u = (u + t_star)^(eta/2), to residual < 1e-10."""
    if t_star < 0 or not math.isfinite(t_star):
        raise ValueError("t_star must be finite and >= 0")
    if not 0.0 <= eta < 2.0:
        raise ValueError("need 0 <= eta < 2")
    if eta == 0.0 or t_star == 0.0:
        return 1.0

    def f(u):
        return u - (u + t_star) ** (eta / 2.0)

    hi = max(2.0, (2.0 * t_star) ** (eta / (2.0 - eta)) + 2.0)
    while f(hi) <= 0:
        hi *= 2.0
    root = brentq(f, 1e-8, hi, xtol=1e-13, rtol=8.9e-16)
    return float(root)


class DelayCase(enum.Enum):
    VERY_EARLY = "very_early"
    EARLY = "early"
    LATE = "late"
    RENYI_PRE_R = "renyi_pre_r"
    RENYI_EARLY = "renyi_early"
    RENYI_LATE = "renyi_late"


@dataclass(frozen=True)
class DelayPrediction:
    """Centering/rescaling sequences of the delay limit laws, with finite-
    sample plug-ins for the limits (t*, u-bar, k*/r)."""

    case: DelayCase
    t_star: float
    u_star: float
    drift_strength: float  # drift' D_hat^{-1} drift (A_m / B_m)
    v1: float
    v2: float
    v3: float
    v4: float
    v5: float
    v6: float
    s1_sq: float
    s2_sq: float


# Plug-in thresholds standing in for the "-> infinity" limit conditions.
_VERY_EARLY_MAX_RATIO = 3.0
_LATE_MIN_FRACTION = 0.2
_RENYI_LARGE_RATIO = 10.0


def predict_delay(spec: ChangeSpec, config: MonitorConfig, fit: QmleFit,
                  drift: np.ndarray, sigma: np.ndarray) -> DelayPrediction:
    """Delay prediction for a monitoring configuration and an estimated drift.

    ``drift`` is Delta or Upsilon depending on the post-change regime and
    ``sigma`` the matching score covariance (Sigma1 or Sigma2).
    """
    if spec.post_regime.value is Regime.NEAR_BOUNDARY:
        raise ValueError("no delay theory on the stationarity boundary")
    if isinstance(config.scheme, DarlingErdos):
        raise ValueError("delay prediction covers the weighted and Renyi schemes only")
    drift = np.asarray(drift, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    d_inv = fit.D_hat.inverse()
    strength = float(drift @ d_inv @ drift)
    if not strength > 0:
        raise ValueError("drift must be non-zero")
    q = float(drift @ d_inv @ sigma @ d_inv @ drift)
    n = config.horizon_n
    c = config.c
    k_star = spec.k_star
    eta = config.scheme.eta

    scale = (n ** (1.0 - eta) * c / strength) ** (1.0 / (2.0 - eta))
    t_star = k_star / scale
    u_star = solve_u_star(t_star, eta) if eta < 2.0 else float("nan")
    s1_sq = t_star * strength + (1.0 - t_star / (t_star + u_star)) * q
    v1 = u_star * scale
    v2 = math.sqrt(s1_sq) * (t_star + u_star) ** 1.5 * math.sqrt(scale)
    v3 = math.sqrt(c / strength * n ** (1.0 - eta) * k_star ** eta)
    v4 = math.sqrt(k_star / strength)
    v6 = math.sqrt(k_star)

    if isinstance(config.scheme, Weighted):
        v5 = 0.0
        ratio = k_star / n ** ((1.0 - eta) / (2.0 - eta))
        if ratio <= _VERY_EARLY_MAX_RATIO:
            case = DelayCase.VERY_EARLY
        elif k_star / n < _LATE_MIN_FRACTION:
            case = DelayCase.EARLY
        else:
            case = DelayCase.LATE
    else:
        r = config.scheme.r
        # Crossing heuristic d^2 * strength = c * r^(1-eta) * (k*)^eta, the
        # eta > 1 analogue of the v3 construction.
        v5 = math.sqrt(c / strength * k_star ** eta * r ** (1.0 - eta))
        a = k_star / r
        if k_star <= r:
            case = DelayCase.RENYI_PRE_R
        elif a <= _RENYI_LARGE_RATIO:
            case = DelayCase.RENYI_EARLY
        else:
            case = DelayCase.RENYI_LATE

    return DelayPrediction(case=case, t_star=t_star, u_star=u_star,
                           drift_strength=strength, v1=v1, v2=v2, v3=v3, v4=v4,
                           v5=v5, v6=v6, s1_sq=s1_sq, s2_sq=strength)
