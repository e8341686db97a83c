"""Online score-CUSUM detector, boundary functions and stopping rules.

Monitoring accumulates the (alpha, beta) scores of each post-training
observation, evaluated at the training estimate, into a running sum r_k and
tracks the quadratic form r_k' D_hat^{-1} r_k against a deterministic
boundary.  The first crossing within the scheme's scan range stops the run;
reaching the horizon without a crossing ends it with no change declared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .params import GarchParams
from .qmle import QmleFit, VolFilterState, filter_step, run_score_filter

__all__ = [
    "Weighted",
    "DarlingErdos",
    "Renyi",
    "SchemeKind",
    "MonitorConfig",
    "MonitorState",
    "Detected",
    "NoChange",
    "StoppingOutcome",
    "stopping_time",
    "boundary_value",
    "boundary_series",
    "new_monitor_state",
    "step",
    "scan_scores",
    "run_closed_ended",
    "DetectorTrace",
]


@dataclass(frozen=True)
class Weighted:
    """Polynomially weighted boundary c*n*(k/n)^eta with 0 <= eta < 1."""

    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta < 1.0:
            raise ValueError("Weighted scheme needs 0 <= eta < 1")

    def label(self) -> str:
        return "weighted"


@dataclass(frozen=True)
class DarlingErdos:
    """The eta = 1 case, boundary built from a(x) = sqrt(2 log x) and
    b2(x) = 2 log x + log log x.  With a trimming index ``r`` the scan starts
    at r and the normalisation uses log(n/r)."""

    r: int | None = None

    def __post_init__(self):
        if self.r is not None and self.r < 1:
            raise ValueError("trimming index r must be >= 1")

    def label(self) -> str:
        return "de" if self.r is None else "de_trimmed"


@dataclass(frozen=True)
class Renyi:
    """Heavily weighted boundary c*r*(k/r)^eta with eta > 1, scanned from k = r."""

    eta: float
    r: int

    def __post_init__(self):
        if not self.eta > 1.0:
            raise ValueError("Renyi scheme needs eta > 1")
        if self.r < 1:
            raise ValueError("trimming index r must be >= 1")

    def label(self) -> str:
        return "renyi"


SchemeKind = Union[Weighted, DarlingErdos, Renyi]


def _a(x: float) -> float:
    return math.sqrt(2.0 * math.log(x))


def _b2(x: float) -> float:
    return 2.0 * math.log(x) + math.log(math.log(x))


@dataclass(frozen=True)
class MonitorConfig:
    """Everything the stopping rule needs besides the data."""

    scheme: SchemeKind
    c: float
    horizon_n: int
    m: int
    tuned: bool = True

    def __post_init__(self):
        if self.horizon_n < 2:
            raise ValueError("horizon_n must be >= 2")
        if self.m < 2:
            raise ValueError("training length m must be >= 2")
        s = self.scheme
        if isinstance(s, (Weighted, Renyi)) and not self.c > 0:
            raise ValueError("critical value must be positive for this scheme")
        if isinstance(s, Renyi) and not s.r < self.horizon_n:
            raise ValueError("Renyi needs r < horizon_n")
        if isinstance(s, DarlingErdos):
            if self.tuned:
                raise ValueError("no tuned variant is defined for the eta=1 boundary")
            ratio = self.horizon_n if s.r is None else self.horizon_n / s.r
            if ratio < 16:
                raise ValueError("eta=1 boundary needs horizon_n (or horizon_n/r) >= 16")
            if self.c + _b2(math.log(ratio)) <= 0:
                raise ValueError("critical value too small: boundary would be non-positive")

    @property
    def scan_start(self) -> int:
        s = self.scheme
        if isinstance(s, Renyi):
            return s.r
        if isinstance(s, DarlingErdos) and s.r is not None:
            return s.r
        return 1


def _tuning_factor(config: MonitorConfig, k) -> float:
    inflate = (1.0 + 1.0 / math.log(config.m)) ** 2
    return inflate * (1.0 + k / config.m) ** 2


def boundary_series(config: MonitorConfig, ks: np.ndarray) -> np.ndarray:
    """Boundary values at the (integer array) monitoring indices ``ks``."""
    ks = np.asarray(ks, dtype=np.float64)
    n = config.horizon_n
    s = config.scheme
    if np.any(ks < config.scan_start) or np.any(ks > n):
        raise ValueError("monitoring index outside the scheme's range")
    if isinstance(s, Weighted):
        g = config.c * n * (ks / n) ** s.eta
    elif isinstance(s, Renyi):
        g = config.c * s.r * (ks / s.r) ** s.eta
    else:
        ratio = n if s.r is None else n / s.r
        x = math.log(ratio)
        g = ks * ((config.c + _b2(x)) / _a(x)) ** 2
        return g
    if config.tuned:
        g = g * _tuning_factor(config, ks)
    return g


def boundary_value(config: MonitorConfig, k: int) -> float:
    """Boundary at a single index; errors when k is outside the scan range."""
    return float(boundary_series(config, np.array([k]))[0])


@dataclass(frozen=True)
class Detected:
    """First boundary crossing, at monitoring index k (1-based after training)."""

    k: int
    detector_value: float


@dataclass(frozen=True)
class NoChange:
    """Reached the horizon without a crossing."""

    horizon_n: int


StoppingOutcome = Union[Detected, NoChange]


def stopping_time(outcome: StoppingOutcome) -> int:
    return outcome.k if isinstance(outcome, Detected) else outcome.horizon_n


@dataclass(frozen=True)
class MonitorState:
    """Streaming detector state after k post-training observations."""

    k: int
    cusum: np.ndarray
    filter: VolFilterState
    detector: float
    boundary: float
    stopped: bool

    def __post_init__(self):
        self.cusum.setflags(write=False)


def new_monitor_state(fit: QmleFit) -> MonitorState:
    """Start monitoring from the terminal state of the training filter."""
    return MonitorState(k=0, cusum=np.zeros(2), filter=fit.final_filter,
                        detector=0.0, boundary=math.inf, stopped=False)


def step(state: MonitorState, config: MonitorConfig, D_hat_inv: np.ndarray,
         theta_hat: GarchParams, y_new: float,
         y_prev: float) -> tuple[MonitorState, Detected | None]:
    """Advance one observation; emits Detected on the first crossing.

    Crossings are only checked inside the scan range (k >= r for trimmed
    schemes) and ties count as detection.
    """
    if state.stopped:
        raise ValueError("monitor already stopped")
    k = state.k + 1
    if k > config.horizon_n - 1:
        raise ValueError("monitoring horizon exhausted")
    new_filter, score, _ = filter_step(state.filter, theta_hat, y_prev, y_new)
    cusum = state.cusum + np.asarray(score)
    detector = float(cusum @ D_hat_inv @ cusum)
    in_range = k >= config.scan_start
    boundary = boundary_value(config, k) if in_range else math.inf
    hit = in_range and detector >= boundary
    new_state = MonitorState(k=k, cusum=cusum, filter=new_filter,
                             detector=detector, boundary=boundary, stopped=hit)
    return new_state, (Detected(k=k, detector_value=detector) if hit else None)


@dataclass(frozen=True)
class DetectorTrace:
    """Per-index detector/boundary record over the scanned range."""

    ks: np.ndarray
    detector: np.ndarray
    boundary: np.ndarray


def scan_scores(scores: np.ndarray, D_hat_inv: np.ndarray,
                config: MonitorConfig) -> tuple[StoppingOutcome, DetectorTrace]:
    """Stopping rule applied to a precomputed post-training score sequence.

    ``scores[i]`` is the score of observation m+i+1, so row i yields the
    detector at k = i+1.  Scanning covers k = scan_start .. min(tau, n-1).
    """
    n = config.horizon_n
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape[0] < n - 1:
        raise ValueError("need scores for at least horizon_n - 1 observations")
    cus = np.cumsum(scores[:n - 1], axis=0)
    det = np.einsum("ki,ij,kj->k", cus, D_hat_inv, cus)
    start = config.scan_start
    ks = np.arange(start, n)
    det_scanned = det[start - 1:]
    bounds = boundary_series(config, ks)
    hits = np.nonzero(det_scanned >= bounds)[0]
    if hits.size:
        stop = int(hits[0])
        outcome: StoppingOutcome = Detected(k=int(ks[stop]),
                                            detector_value=float(det_scanned[stop]))
        sl = slice(0, stop + 1)
    else:
        outcome = NoChange(horizon_n=n)
        sl = slice(0, ks.size)
    trace = DetectorTrace(ks=ks[sl], detector=det_scanned[sl], boundary=bounds[sl])
    return outcome, trace


def run_closed_ended(y_post: np.ndarray, config: MonitorConfig,
                     fit: QmleFit) -> StoppingOutcome:
    """Closed-ended monitoring of the post-training observations."""
    outcome, _ = run_closed_ended_with_trace(y_post, config, fit)
    return outcome


def run_closed_ended_with_trace(y_post: np.ndarray, config: MonitorConfig,
                                fit: QmleFit) -> tuple[StoppingOutcome, DetectorTrace]:
    """As :func:`run_closed_ended` but also returns the detector trace."""
    y_post = np.asarray(y_post, dtype=np.float64)
    n = config.horizon_n
    if y_post.shape[0] < n - 1:
        raise ValueError(f"need at least horizon_n - 1 = {n - 1} observations, "
                         f"got {y_post.shape[0]}")
    if not np.all(np.isfinite(y_post[:n - 1])):
        raise ValueError("post-training observations contain non-finite values")
    D_inv = fit.D_hat.inverse()
    scores, _, _, _ = run_score_filter(y_post[:n - 1], fit.theta_hat, fit.final_filter)
    return scan_scores(scores, D_inv, config)
