"""Zero-forcing beamforming: precoder, effective gains, rates, and bounds.

ZFBF nulls all cross-user channels, so each user sees a pure SNR
mu_k = (P_t / (K N_0)) ||gamma_k||^2 scaled by the effective channel gain
1/||f_k||^2, where f_k is the k-th pseudo-inverse column.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.special import gammaln

from .errors import DomainError, InfeasibleError, SingularChannelError
from .geometry import access_distance_ppf
from .montecarlo import RateEstimate
from .special import (
    DEFAULT_QUADRATURE,
    LOG2E,
    QuadratureSpec,
    exp_e1,
    integrate_adaptive,
    upper_incomplete_gamma,
)

MAX_CONDITION = 1e12
GAMMA_TAIL = 1e-16


@dataclass(frozen=True)
class ZfPrecoder:
    """Pseudo-inverse precoder: unit columns w_k and effective gains 1/||f_k||^2."""

    pseudo_inverse: np.ndarray  # (L, K)
    w: np.ndarray  # (L, K), unit-norm columns
    effective_gain: np.ndarray  # (K,)


@dataclass(frozen=True)
class ZfSnr:
    """Average received SNR of one user (no intra-cell interference)."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0.0:
            raise DomainError("SNR must be positive")


def zf_precoder(g_tilde: np.ndarray) -> ZfPrecoder:
    """Pseudo-inverse of the stacked normalized channel matrix.

    Computed through the SVD (rank revealing) rather than by inverting the
    Gram matrix, which would square the condition number; the Schur-complement
    identity for the effective gain is verified in tests, not used here.
    """
    G = np.asarray(g_tilde, dtype=complex)
    if G.ndim == 1:
        G = G[None, :]
    K, L = G.shape
    if L < K:
        raise InfeasibleError("ZFBF needs at least as many antennas as users")
    U, s, Vh = np.linalg.svd(G, full_matrices=False)
    if s[-1] <= 0.0 or s[0] / s[-1] > MAX_CONDITION:
        raise SingularChannelError("channel matrix is rank deficient")
    F = (Vh.conj().T / s[None, :]) @ U.conj().T  # (L, K)
    col_norm_sq = (np.abs(F) ** 2).sum(axis=0)
    w = F / np.sqrt(col_norm_sq)[None, :]
    return ZfPrecoder(pseudo_inverse=F, w=w, effective_gain=1.0 / col_norm_sq)


def zf_snr(K: int, snr_budget: float, gamma_norm_sq: float) -> ZfSnr:
    """mu_k = (P_t / (K N_0)) ||gamma_k||^2."""
    if K < 1:
        raise DomainError("K must be at least 1")
    return ZfSnr(mu=snr_budget / K * gamma_norm_sq)


def rate_zfbf_ca(
    L: int,
    K: int,
    snr_budget: float,
    rho_k: float,
    alpha: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> RateEstimate:
    """Ergodic ZFBF rate with co-located antennas for a user at radius rho_k.

    The effective gain is Gamma(L-K+1, 1/L); its density is integrated in log
    space against log2(1 + mu x) with mu = snr_budget * L * rho^-alpha / K.
    """
    if L < K:
        raise InfeasibleError("ZFBF needs L >= K")
    if not 0.0 < rho_k <= 1.0:
        raise DomainError("rho_k must lie in (0, 1]")
    mu = snr_budget * L * rho_k ** (-alpha) / K
    shape = L - K + 1
    lgam = gammaln(shape)
    logL = math.log(L)

    def integrand(x: float) -> float:
        return math.exp(
            logL + (L - K) * (logL + math.log(x)) - L * x - lgam
        ) * math.log2(1.0 + mu * x)

    lo = float(max(sps.gamma.ppf(GAMMA_TAIL, shape, scale=1.0 / L), 1e-300))
    hi = float(sps.gamma.isf(GAMMA_TAIL, shape, scale=1.0 / L))
    value, _ = integrate_adaptive(integrand, lo, hi, spec)
    return RateEstimate(value, "closed_form")


def rate_zfbf_ca_approx(
    L: int, K: int, snr_budget: float, rho_k: float, alpha: float, step: int = 1
) -> RateEstimate:
    """Deterministic-gain approximation chain for the CA ZFBF rate.

    step 1: log2(1 + snr (L-K+1)/K rho^-alpha)      (L >> K)
    step 2: log2(1 + snr (L/K - 1) rho^-alpha)      (additionally K >> 1)
    step 3: log2(snr (L/K - 1) rho^-alpha)          (additionally snr >> 1)
    """
    if L < K:
        raise InfeasibleError("ZFBF needs L >= K")
    if not 0.0 < rho_k <= 1.0:
        raise DomainError("rho_k must lie in (0, 1]")
    if step not in (1, 2, 3):
        raise DomainError("step must be 1, 2, or 3")
    boost = rho_k ** (-alpha)
    if step == 1:
        value = math.log2(1.0 + snr_budget * (L - K + 1) / K * boost)
    elif step == 2:
        value = math.log2(1.0 + snr_budget * (L / K - 1.0) * boost)
    else:
        arg = snr_budget * (L / K - 1.0) * boost
        if arg <= 0.0:
            raise DomainError("high-SNR form needs L > K")
        value = math.log2(arg)
    return RateEstimate(value, "closed_form")


def rate_lb_zfbf_da(
    trimmed_d_min: float, K: int, snr_budget: float, alpha: float
) -> RateEstimate:
    """Lower bound from the single nearest unclaimed antenna:
    exp_e1((K/snr) d^alpha) log2 e."""
    if trimmed_d_min <= 0.0:
        raise DomainError("distance must be positive")
    value = exp_e1(K / snr_budget * trimmed_d_min**alpha) * LOG2E
    return RateEstimate(float(value), "bound_lower")


def avg_rate_zfbf_ca(
    L: int, K: int, snr_budget: float, alpha: float
) -> RateEstimate:
    """Position-averaged CA rate in the high-SNR regime:
    log2(snr (L/K - 1)) + (alpha/2) log2 e."""
    if L <= K:
        raise DomainError("the high-SNR average needs L > K")
    arg = snr_budget * (L / K - 1.0)
    value = math.log2(arg) + 0.5 * alpha * LOG2E
    if value < 0.0:
        raise DomainError("approximation invalid: nonpositive rate")
    return RateEstimate(value, "closed_form")


def asym_rate_zfbf_ca(params, snr_budget: float) -> float:
    """log2(snr (upsilon - 1)) + (alpha/2) log2 e for upsilon > 1."""
    if params.upsilon <= 1.0:
        raise DomainError("asymptotic CA rate needs upsilon > 1")
    return math.log2(snr_budget * (params.upsilon - 1.0)) + 0.5 * params.alpha * LOG2E


def _min_dist_quantile(s: float, y: float, n: int) -> float:
    # Quantile of the minimum distance to n uniform points given radius y,
    # with the (1-F)^n flattening folded in: exact peak localization.
    v = -math.expm1(math.log1p(-s) / n)
    return float(access_distance_ppf(v, y))


def avg_rate_lb_zfbf_da(
    L: int,
    K: int,
    snr_budget: float,
    alpha: float,
    spec: QuadratureSpec = DEFAULT_QUADRATURE,
) -> RateEstimate:
    """Position-averaged lower bound for the DA layout.

    Equals log2 e times the expectation of exp_e1((K/snr) d^alpha) where d is
    the minimum access distance to L-K+1 uniform antennas and the user radius
    has density 2y.  The inner integral substitutes the exact quantile of the
    minimum distance, because the integrand's mass sits in an
    O(1/sqrt(L-K+1)) neighborhood of zero that uniform panels would miss.
    """
    if L < K:
        raise InfeasibleError("ZFBF needs L >= K")
    n = L - K + 1
    c = K / snr_budget
    inner_spec = QuadratureSpec(
        abs_tol=max(spec.abs_tol, 1e-11),
        rel_tol=max(spec.rel_tol, 1e-9),
        max_subdivisions=spec.max_subdivisions,
    )

    def conditional(y: float) -> float:
        def integrand(s: float) -> float:
            x = _min_dist_quantile(s, y, n)
            arg = c * x**alpha
            if arg <= 0.0:  # x underflow at the s -> 0 endpoint
                arg = 1e-300
            return exp_e1(arg)

        val, _ = integrate_adaptive(integrand, 0.0, 1.0, inner_spec)
        return val

    outer, _ = integrate_adaptive(lambda y: 2.0 * y * conditional(y), 0.0, 1.0, spec)
    return RateEstimate(float(outer * LOG2E), "bound_lower")


def trimmed_min_dist_pow_given_radius(
    L: int, K: int, alpha: float, t: float
) -> float:
    """Large-L approximation of E[d^alpha | user radius t] for the minimum
    distance to L-K+1 uniform antennas."""
    if L <= K:
        raise DomainError("needs L > K")
    if not 0.0 <= t <= 1.0:
        raise DomainError("radius t must lie in [0, 1]")
    m = L - K
    s = 1.0 + 0.5 * alpha
    pref = (m + 1) / m**s
    return pref * (
        upper_incomplete_gamma(s, 0.0) - upper_incomplete_gamma(s, m * (1.0 - t) ** 2)
    )


def asym_divergence_diagnostic(
    L: int, K: int, alpha: float, spec: QuadratureSpec = DEFAULT_QUADRATURE
) -> float:
    """E[d^alpha] for the trimmed minimum access distance, averaged over the
    user radius (density 2t).  Vanishes as L grows, which is what drives the
    DA lower bound unbounded."""
    value, _ = integrate_adaptive(
        lambda t: 2.0 * t * trimmed_min_dist_pow_given_radius(L, K, alpha, t),
        0.0,
        1.0,
        spec,
    )
    return float(value)
