"""Noise schedule, sensitivity, and the zero-concentrated DP accountant.

The perturbation added on an agent's tau-th activation has variance
sigma_tau^2 = sigma_1^2 * R^(1 - tau) with attenuation R > 1, so later
activations are noisier in privacy terms (smaller variance) and the
composed budget stays finite as the run length grows. Composition is
tracked in zCDP and converted to (epsilon, delta)-DP at the end.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, ValidationError

__all__ = [
    "NoiseSchedule",
    "PrivacyLedger",
    "noise_variance",
    "sample_noise",
    "sensitivity",
    "rho_first",
    "zcdp_to_dp",
    "total_zcdp",
    "total_budget",
    "epsilon_for_xi",
    "calibrate_sigma",
]


@dataclass(frozen=True)
class NoiseSchedule:
    """Initial variance and the geometric attenuation factor."""

    sigma1_sq: float
    attenuation: float

    def __post_init__(self):
        if not (self.sigma1_sq > 0.0):
            raise ValidationError("initial noise variance must be positive")
        if not (self.attenuation > 1.0):
            raise ValidationError(
                "attenuation must exceed 1; the constant-noise limit has an "
                "unbounded privacy budget"
            )


def noise_variance(schedule, tau):
    """Variance used on an agent's tau-th activation (tau >= 1)."""
    if tau < 1:
        raise ValidationError("activation count starts at 1")
    return schedule.sigma1_sq * schedule.attenuation ** (1.0 - tau)


def sample_noise(variance, q, rng):
    """Draw one q-dimensional Gaussian with the given variance.

    Consumes exactly q values from rng (none when variance is zero, so a
    noiseless run advances the stream identically to never sampling).
    """
    if variance < 0.0:
        raise ValidationError("noise variance must be nonnegative")
    if variance == 0.0:
        return np.zeros(q)
    return math.sqrt(variance) * rng.standard_normal(q)


def sensitivity(alpha, beta, lipschitz):
    """Worst-case change of the relayed dual message over neighboring data."""
    if min(alpha, beta, lipschitz) <= 0.0:
        raise ValidationError("sensitivity inputs must be positive")
    return 4.0 * alpha * beta * lipschitz


def rho_first(alpha, beta, lipschitz, sigma1_sq):
    """zCDP cost of the first (noisiest-budget) activation."""
    if sigma1_sq <= 0.0:
        raise ValidationError("initial noise variance must be positive")
    d = sensitivity(alpha, beta, lipschitz)
    return d * d / (2.0 * sigma1_sq)


def zcdp_to_dp(rho, delta):
    """Convert a zCDP parameter to epsilon at a fixed delta."""
    if not (0.0 < delta < 1.0):
        raise ValidationError("delta must lie in (0, 1)")
    if rho < 0.0:
        raise ValidationError("zCDP parameter must be nonnegative")
    return rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))


def _geometric_growth(attenuation, xi):
    """(R^xi - 1) / (R - 1), or inf once R^xi leaves double range.

    The budget grows like R^xi, so very long compositions overflow
    float64 long before they overflow any realistic budget; reporting
    inf keeps the accountant honest instead of raising.
    """
    if xi * math.log(attenuation) > 700.0:
        return math.inf
    return (attenuation**xi - 1.0) / (attenuation - 1.0)


@dataclass
class PrivacyLedger:
    """Everything the accountant needs for one finished or planned run."""

    alpha: float
    beta: float
    lipschitz: float
    delta: float
    schedule: NoiseSchedule
    tau: np.ndarray

    @property
    def xi(self):
        """Largest per-agent activation count (the composition length)."""
        return int(np.max(self.tau)) if np.asarray(self.tau).size else 0


def total_zcdp(ledger):
    """Composed zCDP over the worst agent's xi activations.

    Geometric sum rho_1 * (R^xi - 1) / (R - 1); zero when nothing ran.
    """
    xi = ledger.xi
    if xi == 0:
        return 0.0
    r1 = rho_first(
        ledger.alpha, ledger.beta, ledger.lipschitz, ledger.schedule.sigma1_sq
    )
    return r1 * _geometric_growth(ledger.schedule.attenuation, xi)


def total_budget(ledger):
    """(epsilon, delta) for the whole run."""
    return zcdp_to_dp(total_zcdp(ledger), ledger.delta), ledger.delta


def epsilon_for_xi(alpha, beta, lipschitz, schedule, delta, xi):
    """Epsilon after xi activations of the busiest agent; 0 at xi = 0."""
    if xi < 0:
        raise ValidationError("composition length must be nonnegative")
    if xi == 0:
        return 0.0
    r1 = rho_first(alpha, beta, lipschitz, schedule.sigma1_sq)
    growth = _geometric_growth(schedule.attenuation, xi)
    return zcdp_to_dp(r1 * growth, delta)


def calibrate_sigma(target_epsilon, delta, alpha, beta, lipschitz, attenuation, xi):
    """Smallest sigma_1^2 whose composed budget meets target_epsilon.

    Bisects on log sigma_1^2; the budget is strictly decreasing in the
    variance so the bracket is clean. Raises when no variance within a
    very wide range reaches the target (e.g. xi = 0, where the budget is
    identically zero and any variance works, handled separately).
    """
    if target_epsilon <= 0.0:
        raise CalibrationError("target epsilon must be positive")
    if xi <= 0:
        raise CalibrationError("composition length must be at least 1")
    if not (attenuation > 1.0):
        raise ValidationError("attenuation must exceed 1")

    def eps_of(sig_sq):
        sched = NoiseSchedule(sigma1_sq=sig_sq, attenuation=attenuation)
        return epsilon_for_xi(alpha, beta, lipschitz, sched, delta, xi)

    lo, hi = 1e-30, 1e-30
    for _ in range(400):
        if eps_of(hi) <= target_epsilon:
            break
        hi *= 4.0
    else:
        raise CalibrationError("no feasible initial variance in bracket")
    if hi == lo and eps_of(lo) <= target_epsilon:
        # already feasible at the bottom of the range; tighten from below
        return lo
    lo = hi / 4.0
    while hi / lo > 1.0 + 1e-12:
        mid = math.sqrt(lo * hi)
        if eps_of(mid) <= target_epsilon:
            hi = mid
        else:
            lo = mid
    if eps_of(hi) > target_epsilon:
        raise CalibrationError("bisection failed to meet the target budget")
    return hi
