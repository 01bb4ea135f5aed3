"""Numerical evaluation of the detector's recovery-probability machinery.

The success probability of the covariance-domain detector admits a lower
bound of the form ``1 - (D + 4 L^2) * gamma^(-M)`` with ``gamma > 1`` built
from three exponents: a Chernoff rate for the per-node empirical channel
power (``chernoff_power_rate``) and two concentration exponents for the
channel-cross-term and noise-cross-term fluctuations (``deltas``). The
functions here evaluate those closed-form quantities numerically; nothing
is re-derived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConditionViolatedError, InvalidParameterError

__all__ = [
    "BoundInputs",
    "LassoConstants",
    "ChernoffRate",
    "Deltas",
    "BoundReport",
    "PowerFloorCheck",
    "lasso_constants",
    "chernoff_power_rate",
    "deltas",
    "recovery_bound",
    "evaluate_recovery_bound",
    "empirical_power_floor_check",
]


@dataclass(frozen=True)
class BoundInputs:
    """Everything the bound evaluation needs about one configuration.

    ``sigma_max_1/2`` are the two largest active-channel standard deviations,
    ``sigma_w_max_1/2`` the two largest noise standard deviations (equal for
    white noise), ``S_infnorm`` the largest pilot-entry magnitude, and
    ``sigma_min2`` the smallest active-channel variance.
    """

    lam: float
    mu: float
    D: int
    L: int
    M: int
    sigma_max_1: float
    sigma_max_2: float
    sigma_w_max_1: float
    sigma_w_max_2: float
    S_infnorm: float
    sigma_min2: float

    def __post_init__(self) -> None:
        positives = {
            "lam": self.lam,
            "mu": self.mu,
            "sigma_max_1": self.sigma_max_1,
            "sigma_max_2": self.sigma_max_2,
            "sigma_w_max_1": self.sigma_w_max_1,
            "sigma_w_max_2": self.sigma_w_max_2,
            "S_infnorm": self.S_infnorm,
            "sigma_min2": self.sigma_min2,
        }
        for name, value in positives.items():
            if value <= 0 or not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be positive, got {value}")
        for name, value in (("D", self.D), ("L", self.L), ("M", self.M)):
            if value < 1:
                raise InvalidParameterError(f"{name} must be >= 1, got {value}")
        if self.D >= 0.5 * (1.0 + 1.0 / self.mu**2):
            raise ConditionViolatedError(
                f"sparsity D={self.D} violates D < (1 + 1/mu^2)/2 for mu={self.mu}"
            )


@dataclass(frozen=True)
class LassoConstants:
    c1: float
    c2: float


@dataclass(frozen=True)
class ChernoffRate:
    beta: float
    t0: float


@dataclass(frozen=True)
class Deltas:
    delta1: float
    delta2: float


@dataclass(frozen=True)
class BoundReport:
    """Outcome of a full bound evaluation; ``vacuous`` means no usable gamma."""

    constants: LassoConstants
    beta_min: float | None
    delta1: float | None
    delta2: float | None
    gamma: float | None
    bound: float
    vacuous: bool


@dataclass(frozen=True)
class PowerFloorCheck:
    empirical_prob: float
    bound: float


def lasso_constants(lam: float, mu: float, D: int) -> LassoConstants:
    """Event thresholds controlling exact support recovery.

    ``c1`` caps the tolerable perturbation norm, ``c2`` floors the smallest
    empirical active-channel power. Valid while ``1 + mu^2 - mu^2 D > 0``.
    """
    if lam < 0:
        raise InvalidParameterError(f"lam must be >= 0, got {lam}")
    if not 0.0 <= mu <= 1.0:
        raise InvalidParameterError(f"mu must lie in [0, 1], got {mu}")
    if D < 0:
        raise InvalidParameterError(f"D must be >= 0, got {D}")
    mu2 = mu * mu
    denom = 1.0 + mu2 - mu2 * D
    if denom <= 0:
        raise ConditionViolatedError(
            f"1 + mu^2 - mu^2*D must be positive, got {denom} (mu={mu}, D={D})"
        )
    c1 = lam * (1.0 + mu2 - 2.0 * mu2 * D) / denom
    c2 = lam * (2.0 * (1.0 + mu2) - 3.0 * mu2 * D) / (denom * denom)
    return LassoConstants(c1, c2)


def chernoff_power_rate(C: float, sigma_min2: float) -> ChernoffRate:
    """Best Chernoff rate for ``P( mean of M squared Gaussians > C )``.

    Maximizes ``exp(-2 t C / sigma_min2) (1 + 2 t)`` over ``t > 0``; the
    stationary point is ``t0 = (sigma_min2 / C - 1) / 2`` and the returned
    rate is ``beta = sqrt(max value) > 1``. Requires ``0 < C < sigma_min2``.
    """
    if sigma_min2 <= 0:
        raise InvalidParameterError(f"sigma_min2 must be positive, got {sigma_min2}")
    if not 0.0 < C < sigma_min2:
        raise ConditionViolatedError(
            f"need 0 < C < sigma_min2, got C={C}, sigma_min2={sigma_min2}"
        )
    t0 = 0.5 * (sigma_min2 / C - 1.0)
    best = math.exp(-2.0 * t0 * C / sigma_min2) * (1.0 + 2.0 * t0)
    return ChernoffRate(math.sqrt(best), t0)


def deltas(inputs: BoundInputs, C1: float, C2: float) -> Deltas:
    """Concentration exponents for the two cross-term fluctuations.

    ``C1 + C2`` must split ``c1 / L``; ``delta1`` covers channel cross terms
    (scaled by the squared pilot sup-norm and the number of active pairs),
    ``delta2`` covers noise cross terms.
    """
    if inputs.D < 2 or inputs.L < 2:
        raise ConditionViolatedError(
            f"delta exponents need D >= 2 and L >= 2, got D={inputs.D}, L={inputs.L}"
        )
    if C1 <= 0 or C2 <= 0:
        raise InvalidParameterError(f"C1 and C2 must be positive, got {C1}, {C2}")
    c1 = lasso_constants(inputs.lam, inputs.mu, inputs.D).c1
    target = c1 / inputs.L
    if not math.isclose(C1 + C2, target, rel_tol=1e-9, abs_tol=1e-15):
        raise ConditionViolatedError(
            f"C1 + C2 must equal c1/L = {target}, got {C1 + C2}"
        )
    t1 = C1 * inputs.M / (inputs.S_infnorm**2 * inputs.D * (inputs.D - 1))
    t2 = C2 * inputs.M / (inputs.L * (inputs.L - 1))
    pair1 = inputs.sigma_max_1 * inputs.sigma_max_2
    pair2 = inputs.sigma_w_max_1 * inputs.sigma_w_max_2
    delta1 = t1 * t1 / (2.0 * pair1 * (2.0 * pair1 + t1))
    delta2 = t2 * t2 / (2.0 * pair2 * (2.0 * pair2 + t2))
    return Deltas(delta1, delta2)


def recovery_bound(M: int, D: int, L: int, gamma: float) -> float:
    """Success-probability floor ``max(0, 1 - (D + 4 L^2) gamma^(-M))``."""
    if M < 1 or D < 0 or L < 1:
        raise InvalidParameterError(f"bad dimensions M={M}, D={D}, L={L}")
    if gamma <= 1.0:
        raise ConditionViolatedError(f"gamma must exceed 1, got {gamma}")
    return max(0.0, 1.0 - (D + 4.0 * L * L) * gamma ** (-M))


def evaluate_recovery_bound(inputs: BoundInputs, split: float = 0.5) -> BoundReport:
    """End-to-end bound evaluation for one configuration.

    ``split`` apportions ``c1/L`` between the two cross-term budgets
    (``C1 = split * c1/L``). The rate is ``gamma = 0.99 * min(beta_min,
    exp(delta1), exp(delta2))``, the 0.99 keeping the strict inequality. If
    the hypotheses fail (``c2 >= sigma_min2``, nonpositive ``c1``, or
    ``gamma <= 1``) the bound is reported vacuous with value 0.
    """
    if not 0.0 < split < 1.0:
        raise InvalidParameterError(f"split must lie in (0, 1), got {split}")
    constants = lasso_constants(inputs.lam, inputs.mu, inputs.D)
    if constants.c1 <= 0 or constants.c2 <= 0 or constants.c2 >= inputs.sigma_min2:
        return BoundReport(constants, None, None, None, None, 0.0, True)
    beta_min = chernoff_power_rate(constants.c2, inputs.sigma_min2).beta
    if inputs.D >= 2:
        target = constants.c1 / inputs.L
        d = deltas(inputs, split * target, (1.0 - split) * target)
        delta1, delta2 = d.delta1, d.delta2
        gamma = 0.99 * min(beta_min, math.exp(delta1), math.exp(delta2))
    else:
        # no channel cross terms exist for a single active node
        delta1 = delta2 = None
        gamma = 0.99 * beta_min
    if gamma <= 1.0:
        return BoundReport(constants, beta_min, delta1, delta2, None, 0.0, True)
    bound = recovery_bound(inputs.M, inputs.D, inputs.L, gamma)
    return BoundReport(constants, beta_min, delta1, delta2, gamma, bound, bound == 0.0)


def empirical_power_floor_check(
    C: float,
    sigma_min2: float,
    M: int,
    trials: int,
    rng: np.random.Generator,
) -> PowerFloorCheck:
    """Monte Carlo validation of the Chernoff floor on empirical power.

    Draws ``trials`` batches of ``M`` real zero-mean Gaussians with variance
    ``sigma_min2`` and compares ``P(mean square > C)`` against
    ``1 - beta^(-M)``. Raises if the empirical estimate falls more than
    three binomial standard errors below the floor.
    """
    if M < 1 or trials < 1:
        raise InvalidParameterError(f"M and trials must be >= 1, got {M}, {trials}")
    beta = chernoff_power_rate(C, sigma_min2).beta
    bound = 1.0 - beta ** (-M)
    samples = rng.standard_normal((trials, M)) * math.sqrt(sigma_min2)
    empirical = float(np.mean(np.mean(samples**2, axis=1) > C))
    margin = 3.0 * math.sqrt(max(bound * (1.0 - bound), 1.0 / trials) / trials)
    if empirical < bound - margin:
        raise ConditionViolatedError(
            f"empirical probability {empirical:.6f} fell below the floor "
            f"{bound:.6f} by more than {margin:.6f}"
        )
    return PowerFloorCheck(empirical, bound)
