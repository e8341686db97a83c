"""Core parameter types shared across the package."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["GarchParams", "InnovationDist", "ThetaSpace", "DEFAULT_THETA_SPACE"]


@dataclass(frozen=True)
class GarchParams:
    """GARCH(1,1) coefficient triple for sigma2_i = omega + alpha*y_{i-1}^2 + beta*sigma2_{i-1}.

    ``omega`` must be strictly positive; ``alpha`` and ``beta`` are allowed to
    be zero so degenerate recursions (constant variance, pure ARCH/EWMA) stay
    constructible, even though the monitoring theory assumes all three
    strictly positive.
    """

    omega: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("omega", "alpha", "beta"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, v)
        if self.omega <= 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")

    def as_array(self) -> np.ndarray:
        """Coefficients in (omega, alpha, beta) order."""
        return np.array([self.omega, self.alpha, self.beta])

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    def stationary_variance(self) -> float | None:
        """omega / (1 - alpha - beta) when that is positive, else None."""
        if self.persistence < 1.0:
            return self.omega / (1.0 - self.persistence)
        return None


@dataclass(frozen=True)
class InnovationDist:
    """Innovation law, standardised to mean 0 and variance 1.

    ``student_t`` draws are multiplied by sqrt((df-2)/df) so the variance is
    exactly one; ``df >= 5`` keeps enough moments for the monitoring theory.
    """

    kind: str = "normal"
    df: int | None = None

    def __post_init__(self):
        if self.kind not in ("normal", "student_t"):
            raise ValueError(f"unknown innovation kind {self.kind!r}")
        if self.kind == "student_t":
            if self.df is None or int(self.df) != self.df or self.df < 5:
                raise ValueError("student_t requires integer df >= 5")
        elif self.df is not None:
            raise ValueError("df only applies to student_t")

    @classmethod
    def standard_normal(cls) -> "InnovationDist":
        return cls("normal")

    @classmethod
    def scaled_student_t(cls, df: int) -> "InnovationDist":
        return cls("student_t", df)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "normal":
            return rng.standard_normal(size)
        scale = math.sqrt((self.df - 2.0) / self.df)
        return rng.standard_t(self.df, size) * scale

    def label(self) -> str:
        return "gaussian" if self.kind == "normal" else f"t{self.df}"

    @classmethod
    def from_label(cls, label: str) -> "InnovationDist":
        label = label.strip().lower()
        if label in ("gaussian", "normal"):
            return cls.standard_normal()
        if label.startswith("t") and label[1:].isdigit():
            return cls.scaled_student_t(int(label[1:]))
        raise ValueError(f"unknown innovation label {label!r} (use 'gaussian' or e.g. 't7')")


@dataclass(frozen=True)
class ThetaSpace:
    """Compact box constraint for the quasi-likelihood optimisation."""

    omega_lo: float = 1e-6
    omega_hi: float = 10.0
    alpha_lo: float = 1e-4
    alpha_hi: float = 2.0
    beta_lo: float = 1e-4
    beta_hi: float = 1.2

    def __post_init__(self):
        for lo, hi, name in ((self.omega_lo, self.omega_hi, "omega"),
                             (self.alpha_lo, self.alpha_hi, "alpha"),
                             (self.beta_lo, self.beta_hi, "beta")):
            if not (0 < lo <= hi < math.inf):
                raise ValueError(f"need 0 < {name}_lo <= {name}_hi < inf")

    def bounds(self) -> list[tuple[float, float]]:
        """Bounds in (omega, alpha, beta) order, for scipy optimisers."""
        return [(self.omega_lo, self.omega_hi),
                (self.alpha_lo, self.alpha_hi),
                (self.beta_lo, self.beta_hi)]

    def contains(self, params: GarchParams, atol: float = 0.0) -> bool:
        (ol, oh), (al, ah), (bl, bh) = self.bounds()
        return (ol - atol <= params.omega <= oh + atol
                and al - atol <= params.alpha <= ah + atol
                and bl - atol <= params.beta <= bh + atol)

    def clip(self, omega: float, alpha: float, beta: float) -> tuple[float, float, float]:
        (ol, oh), (al, ah), (bl, bh) = self.bounds()
        return (min(max(omega, ol), oh),
                min(max(alpha, al), ah),
                min(max(beta, bl), bh))

    def on_boundary(self, params: GarchParams, rtol: float = 1e-6) -> bool:
        for (lo, hi), v in zip(self.bounds(), params.as_array()):
            span = hi - lo
            if v - lo <= rtol * span or hi - v <= rtol * span:
                return True
        return False

    def lattice(self, per_coord: int = 3) -> list[tuple[float, float, float]]:
        """Coarse multi-start grid: geometric in omega, linear in alpha/beta."""
        if per_coord < 1:
            raise ValueError("per_coord must be >= 1")
        if per_coord == 1:
            fracs = [0.5]
        else:
            fracs = list(np.linspace(0.05, 0.95, per_coord))
        omegas = [self.omega_lo ** (1 - f) * self.omega_hi ** f for f in fracs]
        alphas = [self.alpha_lo + f * (self.alpha_hi - self.alpha_lo) for f in fracs]
        betas = [self.beta_lo + f * (self.beta_hi - self.beta_lo) for f in fracs]
        return [(o, a, b) for o in omegas for a in alphas for b in betas]

    def sample(self, rng: np.random.Generator) -> tuple[float, float, float]:
        """Random start: log-uniform omega, uniform alpha/beta."""
        o = math.exp(rng.uniform(math.log(self.omega_lo), math.log(self.omega_hi)))
        a = rng.uniform(self.alpha_lo, self.alpha_hi)
        b = rng.uniform(self.beta_lo, self.beta_hi)
        return o, a, b


DEFAULT_THETA_SPACE = ThetaSpace()
