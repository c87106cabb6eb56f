"""Matched-filter (MRT) precoding: SINRs, ergodic rates, bounds, asymptotics.

Interference under MRT is governed by the weights a[j, l] = E[|g~_{j,l}|^2 /
||g~_j||^2].  Their closed form stacks L-2 alternating factors and is only
trusted for small, well-conditioned weight vectors; otherwise the definition
is sampled directly (it is a cheap expectation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps
from scipy.special import gammaln

from .errors import (
    DomainError,
    IllConditionedError,
    NoInterferenceError,
    SingularChannelError,
)
from .channel import LargeScaleProfile, hypoexp_log_weights
from .geometry import Layout, NeighborStats, ScenarioLayout
from .montecarlo import (
    STREAM_ANTENNA,
    STREAM_SEPARATION,
    STREAM_USER,
    RateEstimate,
    SimulationPlan,
    substream,
)
from .special import (
    DEFAULT_QUADRATURE,
    EULER_GAMMA,
    LOG2E,
    QuadratureSpec,
    exp_e1,
    integrate_adaptive,
)
from . import geometry

# Beyond this antenna count the alternating products are numerically hopeless.
CLOSED_FORM_MAX_L = 64
GAMMA_TAIL = 1e-16


@dataclass(frozen=True)
class InterferenceWeights:
    """K x L matrix of E[|g~_{j,l}|^2 / ||g~_j||^2]; rows sum to 1."""

    a: np.ndarray


@dataclass(frozen=True)
class MrtSinr:
    """Average received SINR of one user (dimensionless, linear scale)."""

    mu: float

    def __post_init__(self):
        if not self.mu > 0.0:
            raise DomainError("SINR must be positive")


@dataclass(frozen=True)
class AsymptoticParams:
    """Limit regime: L, K -> infinity with L/K -> upsilon."""

    upsilon: float
    alpha: float

    def __post_init__(self):
        if self.upsilon <= 0.0:
            raise DomainError("upsilon must be positive")
        if self.alpha <= 2.0:
            raise DomainError("path-loss factor must exceed 2")


def mrt_precoder(g: np.ndarray) -> np.ndarray:
    """Unit-norm matched filter w = g^dagger / ||g||."""
    g = np.asarray(g, dtype=complex).ravel()
    n = np.linalg.norm(g)
    if n == 0.0:
        raise SingularChannelError("zero channel vector")
    return g.conj() / n


def _weights_closed_row(beta_sq_row: np.ndarray) -> np.ndarray:
    lam = 1.0 / beta_sq_row
    L = lam.size
    if L == 1:
        return np.ones(1)
    logP, signP = hypoexp_log_weights(lam)  # may raise IllConditionedError
    loglam = np.log(lam)
    diff = lam[:, None] - lam[None, :]  # diff[l, m] = lam_l - lam_m
    off = ~np.eye(L, dtype=bool)
    numer = lam[:, None] * lam[None, :] * (loglam[:, None] - loglam[None, :] - 1.0) + (
        lam[None, :] ** 2
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        log_abs = (
            logP[None, :]
            + np.log(np.abs(numer))
            - loglam[:, None]
            - np.log(np.abs(diff))
        )
        sgn = signP[None, :] * np.sign(numer) * np.sign(diff)
        terms = np.where(off, sgn * np.exp(log_abs), 0.0)
    if np.max(log_abs[off]) > 700.0 or np.isnan(terms[off]).any():
        raise IllConditionedError("interference-weight terms overflow")
    a = terms.sum(axis=1)
    if np.any(a <= 0.0) or np.any(a >= 1.0) or abs(a.sum() - 1.0) > 1e-6:
        raise IllConditionedError("interference-weight row failed the sum-to-1 check")
    return a


def _weights_mc(
    beta: np.ndarray, rng: np.random.Generator, draws: int
) -> np.ndarray:
    K, L = beta.shape
    acc = np.zeros((K, L))
    left = draws
    chunk = max(1, 2_000_000 // max(K * L, 1))
    while left > 0:
        d = min(chunk, left)
        h = (rng.standard_normal((d, K, L)) + 1j * rng.standard_normal((d, K, L))) * np.sqrt(0.5)
        p = np.abs(beta[None, :, :] * h) ** 2
        acc += (p / p.sum(axis=2, keepdims=True)).sum(axis=0)
        left -= d
    return acc / draws


def interference_weights(
    beta: np.ndarray,
    *,
    method: str = "auto",
    rng: np.random.Generator | None = None,
    draws: int = 100_000,
) -> InterferenceWeights:
    """Interference weights per user row, closed form or Monte Carlo.

    method='auto' tries the closed form for L <= CLOSED_FORM_MAX_L and falls
    back to sampling whenever it is ill conditioned (including the uniform
    CA weights, whose rates are identical).
    """
    beta = np.asarray(beta, dtype=float)
    if beta.ndim == 1:
        beta = beta[None, :]
    K, L = beta.shape
    if method not in ("auto", "closed_form", "monte_carlo"):
        raise DomainError(f"unknown method {method!r}")
    if method in ("auto", "closed_form"):
        if method == "closed_form" or L <= CLOSED_FORM_MAX_L:
            try:
                a = np.vstack([_weights_closed_row(beta[j] ** 2) for j in range(K)])
                return InterferenceWeights(a=a)
            except IllConditionedError:
                if method == "closed_form":
                    raise
    if rng is None:
        rng = np.random.default_rng(0)
    return InterferenceWeights(a=_weights_mc(beta, rng, draws))


def sinr_mrt_ca(L: int, K: int) -> MrtSinr:
    """Interference-limited SINR with co-located antennas: L/(K-1)."""
    if K < 2:
        raise NoInterferenceError("SINR formula needs at least 2 users")
    if L < 1:
        raise DomainError("L must be at least 1")
    return MrtSinr(mu=L / (K - 1))


def _gamma_window(shape: float, scale: float = 1.0) -> tuple[float, float]:
    lo = sps.gamma.ppf(GAMMA_TAIL, shape, scale=scale)
    hi = sps.gamma.isf(GAMMA_TAIL, shape, scale=scale)
    return float(max(lo, 1e-300)), float(hi)


def rate_mrt_ca(
    L: int, K: int, spec: QuadratureSpec = DEFAULT_QUADRATURE
) -> RateEstimate:
    """Ergodic rate with co-located antennas, identical for every user.

    Integral of the Gamma(L, 1) density against log2(1 + x/(K-1)); the density
    is evaluated in log space so large L cannot overflow the factorial.
    """
    mu = sinr_mrt_ca(L, K).mu  # validates K
    lgam = gammaln(L)

    def integrand(x: float) -> float:
        return math.exp((L - 1) * math.log(x) - x - lgam) * math.log2(
            1.0 + x / (K - 1)
        )

    lo, hi = _gamma_window(L)
    value, _ = integrate_adaptive(integrand, lo, hi, spec)
    return RateEstimate(value, "closed_form")


def _sinr_mrt_da_all(
    profile: LargeScaleProfile,
    weights: InterferenceWeights,
    *,
    include_noise: bool = False,
    snr_budget: float | None = None,
) -> np.ndarray:
    cross = weights.a @ (profile.gamma**2).T  # [j, k] = sum_l a_{j,l} gamma_{k,l}^2
    interf = cross.sum(axis=0) - np.einsum("kk->k", cross)
    if include_noise:
        if snr_budget is None:
            raise DomainError("exact-noise SINR needs snr_budget")
        K = profile.gamma.shape[0]
        pbar = snr_budget / K
        return pbar * profile.gamma_norm_sq / (1.0 + pbar * interf)
    return profile.gamma_norm_sq / interf


def sinr_mrt_da(
    profile: LargeScaleProfile,
    weights: InterferenceWeights,
    k: int,
    *,
    include_noise: bool = False,
    snr_budget: float | None = None,
) -> MrtSinr:
    """Average received SINR of user k with distributed antennas.

    Interference-limited by default (the regime the closed forms live in);
    include_noise=True restores the exact denominator N0 + interference.
    """
    mu = _sinr_mrt_da_all(
        profile, weights, include_noise=include_noise, snr_budget=snr_budget
    )
    return MrtSinr(mu=float(mu[k]))


def sinr_approx_mrt_da(
    scenario: ScenarioLayout, stats: NeighborStats, k: int
) -> MrtSinr:
    """Nearest-antenna approximation chain for user k's SINR.

    1/(m_k + sum over users not sharing k's antenna of (d_k,l* / d_k,j)^alpha);
    the quantity the closed upper bound actually dominates.
    """
    du = scenario.user_user_distances[k]
    own = stats.nearest_antenna_index[k]
    others = stats.nearest_antenna_index != own
    others[k] = False
    ratio = (stats.d_min_antenna[k] / du[others]) ** scenario.alpha
    return MrtSinr(mu=1.0 / (stats.cocluster_count[k] + ratio.sum()))


def sinr_ub_mrt_da(stats: NeighborStats, alpha: float, k: int) -> MrtSinr:
    """Upper bound: 1/m_k when the nearest antenna is shared, otherwise the
    (nearest-user / nearest-antenna distance) ratio raised to alpha."""
    m = int(stats.cocluster_count[k])
    if m != 0:
        return MrtSinr(mu=1.0 / m)
    ratio = stats.d_min_user[k] / stats.d_min_antenna[k]
    return MrtSinr(mu=float(ratio**alpha))


def rate_mrt_da(beta_k: np.ndarray, mu: MrtSinr | float) -> RateEstimate:
    """Closed-form ergodic rate for one user from its normalized weights.

    Hypoexponential mixture of scaled exponential integrals; raises
    IllConditionedError (fall back to rate_mrt_da_mc) when the weights are
    too close together.
    """
    mu = mu.mu if isinstance(mu, MrtSinr) else float(mu)
    if mu <= 0.0:
        raise DomainError("SINR must be positive")
    beta_sq = np.asarray(beta_k, dtype=float) ** 2
    lam = 1.0 / beta_sq
    logP, signP = hypoexp_log_weights(lam)
    terms = signP * np.exp(logP) * exp_e1(lam / mu)
    value = float(terms.sum() * LOG2E)
    if not np.isfinite(value) or value < 0.0:
        raise IllConditionedError("hypoexponential rate mixture lost precision")
    return RateEstimate(value, "closed_form")


def rate_mrt_da_mc(
    beta_k: np.ndarray,
    mu: MrtSinr | float,
    rng: np.random.Generator,
    draws: int = 200_000,
) -> RateEstimate:
    """Sampling fallback for rate_mrt_da: average log2(1 + mu ||beta o h||^2)."""
    mu = mu.mu if isinstance(mu, MrtSinr) else float(mu)
    beta = np.asarray(beta_k, dtype=float)
    L = beta.size
    vals = np.empty(draws)
    left, pos = draws, 0
    chunk = max(1, 4_000_000 // L)
    while left > 0:
        d = min(chunk, left)
        h2 = rng.standard_normal((d, L)) ** 2 + rng.standard_normal((d, L)) ** 2
        gain = 0.5 * (beta**2 * h2).sum(axis=1)
        vals[pos : pos + d] = np.log2(1.0 + mu * gain)
        left -= d
        pos += d
    stderr = float(vals.std(ddof=1) / math.sqrt(draws))
    return RateEstimate(float(vals.mean()), "monte_carlo", stderr=stderr, n_samples=draws)


def avg_rate_ub_mrt_da(
    plan: SimulationPlan, L: int, K: int, alpha: float
) -> RateEstimate:
    """Position-averaged upper bound on the DA user rate.

    Samples scenarios, evaluates exp_e1(1/mu_ub) log2 e per user, and averages;
    stderr comes from the outermost (antenna) realization level.
    """
    A, U = plan.antenna_realizations, plan.user_realizations
    grid = np.empty((A, U))
    for a in range(A):
        antennas = geometry.sample_uniform_disk(
            L, substream(plan.master_seed, STREAM_ANTENNA, a)
        )
        for u in range(U):
            users = geometry.sample_uniform_disk(
                K, substream(plan.master_seed, STREAM_USER, a, u)
            )
            scenario = geometry.build_scenario(
                users,
                antennas,
                Layout.DA,
                alpha,
                1.0,
                substream(plan.master_seed, STREAM_SEPARATION, a, u),
            )
            stats = geometry.nearest_antenna_stats(scenario)
            m = stats.cocluster_count
            with np.errstate(over="ignore"):
                arg = np.where(
                    m > 0,
                    m.astype(float),
                    (stats.d_min_antenna / stats.d_min_user) ** alpha,
                )
            grid[a, u] = exp_e1(arg).mean() * LOG2E
    value = float(grid.mean())
    outer = grid.mean(axis=1) if A > 1 else grid[0]
    stderr = float(outer.std(ddof=1) / math.sqrt(outer.size)) if outer.size > 1 else 0.0
    return RateEstimate(value, "bound_upper", stderr=stderr, n_samples=A * U)


def asym_rate_mrt_ca(params: AsymptoticParams) -> float:
    """log2(1 + upsilon)."""
    return math.log2(1.0 + params.upsilon)


def asym_rate_ub_mrt_da(
    params: AsymptoticParams, spec: QuadratureSpec = DEFAULT_QUADRATURE
) -> float:
    """Asymptotic upper bound for the DA layout.

    Poisson(1/upsilon) mixture of exp_e1 at integer arguments plus the
    zero-cluster term, where the nearest-distance ratio Y has density
    2*upsilon*y/(upsilon+y^2)^2.  The Poisson series stops once its tail mass
    is below 1e-12 (exp_e1(n) < 1/n keeps the remainder negligible); the
    ratio integral is split at y=10 with u=1/y on the tail to tame the
    logarithmic growth of E1(y^-alpha).
    """
    ups, alpha = params.upsilon, params.alpha
    lam = 1.0 / ups
    pmf = math.exp(-lam)  # n=0 mass, weights the Y-integral branch
    p0 = pmf
    series = 0.0
    n = 0
    cumulative = pmf
    while 1.0 - cumulative > 1e-12:
        n += 1
        pmf *= lam / n
        series += exp_e1(float(n)) * pmf
        cumulative += pmf
        if n > 10_000:
            break

    def head(y: float) -> float:
        if y <= 0.0:
            return 0.0
        la = -alpha * math.log(y)
        if la > 700.0:  # exp_e1 argument astronomically large, value ~ e^-la
            return 0.0
        return exp_e1(math.exp(la)) * 2.0 * ups * y / (ups + y * y) ** 2

    def tail(u: float) -> float:
        if u <= 0.0:
            return 0.0
        la = alpha * math.log(u)
        if la < -700.0:  # u^alpha underflows; exp_e1(x) -> -gamma - ln(x)
            e1 = -EULER_GAMMA - la
        else:
            e1 = exp_e1(math.exp(la))
        return e1 * 2.0 * ups * u / (1.0 + ups * u * u) ** 2

    i_head, _ = integrate_adaptive(head, 0.0, 10.0, spec, points=[math.sqrt(ups)])
    i_tail, _ = integrate_adaptive(tail, 0.0, 0.1, spec)
    return (series + p0 * (i_head + i_tail)) * LOG2E
