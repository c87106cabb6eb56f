"""Channel construction: large-scale gains, small-scale fading, hypoexponential law.

The squared norm of the normalized channel row (sum of beta_l^2 |h_l|^2 with
distinct beta) is hypoexponential; its closed-form pdf uses an alternating
product that is numerically fragile, so conditioning is policed and callers
are told to fall back to sampling when the closed form cannot be trusted.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, IllConditionedError, SingularGeometryError
from .geometry import Layout, ScenarioLayout

# Hypoexponential closed-form validity: reject rate vectors with nearly equal
# entries or with product terms too large in magnitude for the alternating sum.
RATE_GAP_MIN = 1e-4
LOG_PRODUCT_MAX = 250.0


@dataclass(frozen=True)
class LargeScaleProfile:
    """Per-user amplitude path gains and their unit-norm normalization.

    gamma[k, l] = distance(user k, antenna l)^(-alpha/2); beta rows have unit
    Euclidean norm, so sum_l beta[k, l]^2 == 1 for every user.
    """

    gamma: np.ndarray
    gamma_norm_sq: np.ndarray
    beta: np.ndarray


def large_scale_profile(scenario: ScenarioLayout) -> LargeScaleProfile:
    """Build gamma/beta from scenario distances; CA yields beta = 1/sqrt(L) exactly."""
    D = scenario.user_antenna_distances
    if np.any(D == 0.0):
        raise SingularGeometryError("zero user-antenna distance")
    gamma = D ** (-scenario.alpha / 2.0)
    norm_sq = (gamma**2).sum(axis=1)
    if scenario.layout is Layout.CA:
        beta = np.full_like(gamma, 1.0 / np.sqrt(scenario.L))
    else:
        beta = gamma / np.sqrt(norm_sq)[:, None]
    return LargeScaleProfile(gamma=gamma, gamma_norm_sq=norm_sq, beta=beta)


@dataclass(frozen=True)
class FadingRealization:
    """One K x L draw of i.i.d. unit-variance circular complex Gaussian fading."""

    h: np.ndarray

    def g(self, profile: LargeScaleProfile) -> np.ndarray:
        """Channel rows gamma_k o h_k."""
        return profile.gamma * self.h

    def g_tilde(self, profile: LargeScaleProfile) -> np.ndarray:
        """Normalized channel rows beta_k o h_k (the stacked matrix)."""
        return profile.beta * self.h


def sample_fading(K: int, L: int, rng: np.random.Generator) -> FadingRealization:
    if K < 1 or L < 1:
        raise DomainError("K and L must be at least 1")
    h = (rng.standard_normal((K, L)) + 1j * rng.standard_normal((K, L))) * np.sqrt(0.5)
    return FadingRealization(h=h)


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) array of the given shape."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def hypoexp_log_weights(rates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Log-magnitude and sign of W_l = prod_{i != l} rate_i / (rate_i - rate_l).

    These are the mixture weights of the hypoexponential pdf/cdf and of every
    closed form built on it.  Raises IllConditionedError when the rates are
    too close together or any product term exceeds the magnitude budget.
    """
    lam = np.asarray(rates, dtype=float)
    if lam.ndim != 1 or lam.size < 1:
        raise DomainError("rates must be a nonempty 1-d array")
    if np.any(lam <= 0.0):
        raise DomainError("rates must be positive")
    n = lam.size
    if n == 1:
        return np.zeros(1), np.ones(1)
    diff = lam[:, None] - lam[None, :]  # diff[i, l] = lam_i - lam_l
    off = ~np.eye(n, dtype=bool)
    gaps = np.abs(diff) / np.maximum(lam[:, None], lam[None, :])
    if gaps[off].min() < RATE_GAP_MIN:
        raise IllConditionedError(
            "nearly equal rates: hypoexponential closed form unreliable"
        )
    log_abs_diff = np.zeros_like(diff)
    np.log(np.abs(diff), where=off, out=log_abs_diff)
    logmag = np.where(off, np.log(lam)[:, None] - log_abs_diff, 0.0).sum(axis=0)
    sign = np.where(off, np.sign(diff), 1.0).prod(axis=0)
    if np.abs(logmag).max() > LOG_PRODUCT_MAX:
        raise IllConditionedError(
            "hypoexponential product terms exceed the magnitude budget"
        )
    return logmag, sign


def _rates_from_weights(beta_sq: np.ndarray) -> np.ndarray:
    w = np.asarray(beta_sq, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise DomainError("beta_sq must be a nonempty 1-d array")
    if np.any(w <= 0.0):
        raise DomainError("beta_sq entries must be positive")
    if abs(w.sum() - 1.0) > 1e-6:
        raise DomainError("beta_sq must sum to 1")
    return 1.0 / w


def hypoexp_pdf(beta_sq: np.ndarray, x):
    """pdf of sum_l beta_sq[l] * |h_l|^2 at x, for distinct positive weights summing to 1."""
    lam = _rates_from_weights(beta_sq)
    logmag, sign = hypoexp_log_weights(lam)
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if np.any(xa < 0.0):
        raise DomainError("the gain is nonnegative")
    expo = logmag[:, None] + np.log(lam)[:, None] - lam[:, None] * xa[None, :]
    out = (sign[:, None] * np.exp(expo)).sum(axis=0)
    out = np.clip(out, 0.0, None)
    return float(out[0]) if scalar else out


def hypoexp_cdf(beta_sq: np.ndarray, x):
    """cdf companion of hypoexp_pdf: 1 - sum_l W_l exp(-rate_l x)."""
    lam = _rates_from_weights(beta_sq)
    logmag, sign = hypoexp_log_weights(lam)
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if np.any(xa < 0.0):
        raise DomainError("the gain is nonnegative")
    tail = (sign[:, None] * np.exp(logmag[:, None] - lam[:, None] * xa[None, :])).sum(axis=0)
    out = np.clip(1.0 - tail, 0.0, 1.0)
    return float(out[0]) if scalar else out
