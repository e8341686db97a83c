"""GARCH(1,1) path simulation and volatility-regime classification.

The variance recursion is kept in log space throughout: explosive parameter
regions push sigma2 past double-precision range within a few hundred steps,
while log sigma2 grows only linearly.  Whether a parameter pair is stationary
or explosive is decided by the sign of the top Lyapunov exponent
E log(alpha * eps^2 + beta), estimated by Monte Carlo.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .params import GarchParams, InnovationDist

__all__ = [
    "Regime",
    "RegimeClass",
    "SimulatedPath",
    "simulate_path",
    "lyapunov_exponent",
    "classify_regime",
    "default_init_sigma2",
]


class Regime(enum.Enum):
    STATIONARY = "stationary"
    EXPLOSIVE = "explosive"
    NEAR_BOUNDARY = "near_boundary"


@dataclass(frozen=True)
class RegimeClass:
    """Lyapunov-exponent classification with a 3-standard-error band."""

    value: Regime
    lyapunov: float
    std_error: float


@dataclass(frozen=True)
class SimulatedPath:
    """Simulated returns with their exact log conditional variance.

    Index 0 holds the initial values; observations are indices ``1..length``.
    ``y`` may contain ``inf`` on extremely long explosive paths (log_sigma2
    stays finite); ``change_index`` is the first index governed by the
    post-change parameters.
    """

    y: np.ndarray
    log_sigma2: np.ndarray
    eps: np.ndarray
    change_index: int | None = None

    def __post_init__(self):
        if not (len(self.y) == len(self.log_sigma2) == len(self.eps)):
            raise ValueError("y, log_sigma2 and eps must have equal length")
        for arr in (self.y, self.log_sigma2, self.eps):
            arr.setflags(write=False)

    @property
    def observations(self) -> np.ndarray:
        """The returns excluding the initial value row."""
        return self.y[1:]


def default_init_sigma2(params: GarchParams) -> float:
    """Unconditional variance when it exists, else the floor omega."""
    v = params.stationary_variance()
    return v if v is not None else params.omega


def simulate_path(params_before: GarchParams,
                  params_after: GarchParams | None = None,
                  k_star: int | None = None,
                  *,
                  length: int,
                  dist: InnovationDist = InnovationDist.standard_normal(),
                  seed: int,
                  init_sigma2: float | None = None) -> SimulatedPath:
    """Simulate ``length`` observations, switching parameters at ``k_star``.

    The recursion uses ``params_before`` for indices ``< k_star`` and
    ``params_after`` from ``k_star`` on.  Deterministic in ``seed``.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if params_after is not None:
        if k_star is None or not (1 <= k_star <= length):
            raise ValueError("params_after requires 1 <= k_star <= length")
    elif k_star is not None:
        raise ValueError("k_star given without params_after")
    if init_sigma2 is None:
        init_sigma2 = default_init_sigma2(params_before)
    if not (math.isfinite(init_sigma2) and init_sigma2 > 0):
        raise ValueError(f"init_sigma2 must be positive and finite, got {init_sigma2!r}")

    rng = np.random.default_rng(seed)
    eps = dist.sample(rng, length + 1)
    after = params_after if params_after is not None else params_before
    log_sigma2 = _kernels.simulate_log_variance(
        eps, math.log(init_sigma2),
        params_before.omega, params_before.alpha, params_before.beta,
        after.omega, after.alpha, after.beta,
        k_star if k_star is not None else 0,
    )
    with np.errstate(over="ignore"):
        y = np.exp(0.5 * log_sigma2) * eps
    return SimulatedPath(y=y, log_sigma2=np.asarray(log_sigma2), eps=eps,
                         change_index=k_star)


def lyapunov_exponent(params: GarchParams,
                      dist: InnovationDist = InnovationDist.standard_normal(),
                      n_draws: int = 100_000,
                      seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate of E log(alpha * eps^2 + beta) with its standard error."""
    if n_draws < 1_000:
        raise ValueError("n_draws must be >= 1000")
    if params.alpha == 0 and params.beta == 0:
        raise ValueError("alpha and beta cannot both be zero")
    rng = np.random.default_rng(seed)
    eps = dist.sample(rng, n_draws)
    vals = np.log(params.alpha * eps * eps + params.beta)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_draws))
    return est, se


def classify_regime(params: GarchParams,
                    dist: InnovationDist = InnovationDist.standard_normal(),
                    n_draws: int = 100_000,
                    seed: int = 0) -> RegimeClass:
    """Stationary / explosive / near-boundary via a 3-sigma band on the Lyapunov estimate."""
    est, se = lyapunov_exponent(params, dist, n_draws, seed)
    if est + 3.0 * se < 0.0:
        value = Regime.STATIONARY
    elif est - 3.0 * se > 0.0:
        value = Regime.EXPLOSIVE
    else:
        value = Regime.NEAR_BOUNDARY
    return RegimeClass(value=value, lyapunov=est, std_error=se)
