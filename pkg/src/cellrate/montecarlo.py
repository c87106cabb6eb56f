"""Brute-force empirical rate engine.

Ergodic rates are estimated by averaging log2(1+SINR) over fading draws with
per-draw precoders; average user rates additionally average over user and
(DA only) antenna position realizations.  Randomness is drawn from
counter-based Philox substreams keyed by (master_seed, stream role,
realization indices), so results are bitwise reproducible for any worker
count and any scheduling order.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, InfeasibleError
from .channel import LargeScaleProfile, large_scale_profile
from .geometry import (
    CellPoint,
    Layout,
    ScenarioLayout,
    build_scenario,
    sample_uniform_disk,
)
from .special import DEFAULT_QUADRATURE, LOG2E, QuadratureSpec

log = logging.getLogger(__name__)

RATE_METHODS = frozenset(
    {"closed_form", "bound_upper", "bound_lower", "monte_carlo", "asymptotic"}
)

SCHEMES = ("MRT", "ZFBF")

# Substream roles; together with realization indices these key the Philox streams.
STREAM_ANTENNA = 0
STREAM_USER = 1
STREAM_SEPARATION = 2
STREAM_FADING = 3
STREAM_AUX = 4


@dataclass(frozen=True)
class RateEstimate:
    """A rate in bits/s/Hz with the method that produced it.

    stderr is populated for Monte Carlo estimates only; n_samples counts
    fading draws (ergodic rates) or position realizations (averages).
    """

    value: float
    method: str
    stderr: float | None = None
    n_samples: int | None = None

    def __post_init__(self):
        if self.method not in RATE_METHODS:
            raise DomainError(f"unknown method {self.method!r}")
        if self.value < 0.0:
            raise DomainError("rates are nonnegative")
        if self.stderr is not None and self.stderr < 0.0:
            raise DomainError("stderr must be nonnegative")


@dataclass(frozen=True)
class SimulationPlan:
    """Realization counts, seed, and quadrature settings for an experiment."""

    fading_draws: int = 2000
    user_realizations: int = 500
    antenna_realizations: int = 50
    master_seed: int = 0
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    scheme: str = "MRT"

    def __post_init__(self):
        if min(self.fading_draws, self.user_realizations, self.antenna_realizations) < 1:
            raise DomainError("realization counts must be at least 1")
        if self.scheme.upper() not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}")


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Deterministic Philox generator for a (seed, role, indices...) key."""
    seq = np.random.SeedSequence(
        entropy=int(master_seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=tuple(int(k) for k in key),
    )
    return np.random.Generator(np.random.Philox(seq))


def _chunk_size(K: int, L: int) -> int:
    return max(1, min(512, 2_000_000 // max(K * L, 1)))


def _draw_h(rng: np.random.Generator, d: int, K: int, L: int) -> np.ndarray:
    return (rng.standard_normal((d, K, L)) + 1j * rng.standard_normal((d, K, L))) * np.sqrt(0.5)


def _mrt_rates_chunk(
    h: np.ndarray, gamma: np.ndarray, pbar: float, noise: float
) -> np.ndarray:
    """log2(1+SINR) per draw and user with matched-filter precoders and
    per-draw (instantaneous) interference."""
    g = gamma[None, :, :] * h
    norms = np.linalg.norm(g, axis=2)  # (d, K)
    # M[d, k, j] = g_k . g_j^dagger / ||g_j||: amplitude at user k of user j's beam.
    M = np.einsum("dkl,djl->dkj", g, g.conj()) / norms[:, None, :]
    P = np.abs(M) ** 2 * pbar
    sig = np.einsum("dkk->dk", P).copy()
    interf = P.sum(axis=2) - sig
    return np.log2(1.0 + sig / (noise + interf))


def _mrt_rates_chunk_averaged(
    h: np.ndarray, beta: np.ndarray, mu: np.ndarray
) -> np.ndarray:
    """log2(1 + mu_k ||beta_k o h_k||^2): interference enters through its mean only."""
    gain = (np.abs(beta[None, :, :] * h) ** 2).sum(axis=2)
    return np.log2(1.0 + mu[None, :] * gain)


def _zf_effective_gains(gt: np.ndarray) -> np.ndarray:
    """Per-draw ZF effective gains 1/[(G G^H)^-1]_kk for a (d, K, L) stack."""
    gram = np.einsum("dkl,djl->dkj", gt, gt.conj())
    inv = np.linalg.inv(gram)
    diag = np.einsum("dkk->dk", inv).real
    return 1.0 / diag


def _zf_rates_chunk(
    h: np.ndarray,
    beta: np.ndarray,
    mu_z: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """ZF rates per draw/user; rank-deficient draws are redrawn and counted."""
    d, K, L = h.shape
    gt = beta[None, :, :] * h
    try:
        eff = _zf_effective_gains(gt)
    except np.linalg.LinAlgError:
        eff = np.full((d, K), -1.0)
        for i in range(d):
            try:
                eff[i] = _zf_effective_gains(gt[i : i + 1])[0]
            except np.linalg.LinAlgError:
                pass  # stays invalid, redrawn below
    resampled = 0
    bad = ~np.all(np.isfinite(eff) & (eff > 0.0), axis=1)
    while bad.any():
        resampled += int(bad.sum())
        h_new = _draw_h(rng, int(bad.sum()), K, L)
        try:
            eff[bad] = _zf_effective_gains(beta[None, :, :] * h_new)
        except np.linalg.LinAlgError:
            continue
        bad = ~np.all(np.isfinite(eff) & (eff > 0.0), axis=1)
    return np.log2(1.0 + mu_z[None, :] * eff), resampled


def _estimate_weights_mc(
    beta: np.ndarray, rng: np.random.Generator, draws: int = 50_000
) -> np.ndarray:
    """Sample-mean estimate of E[|g~_{j,l}|^2 / ||g~_j||^2] for each user row."""
    K, L = beta.shape
    acc = np.zeros((K, L))
    left = draws
    chunk = _chunk_size(K, L)
    while left > 0:
        d = min(chunk, left)
        h = _draw_h(rng, d, K, L)
        p = np.abs(beta[None, :, :] * h) ** 2
        acc += (p / p.sum(axis=2, keepdims=True)).sum(axis=0)
        left -= d
    return acc / draws


def _mrt_mu_averaged(
    scenario: ScenarioLayout,
    profile: LargeScaleProfile,
    include_noise: bool,
    aux_rng: np.random.Generator | None,
) -> np.ndarray:
    """Average-interference SINR per user; CA uses the exact symmetric weights."""
    K, L = profile.beta.shape
    if scenario.layout is Layout.CA:
        a = np.full((K, L), 1.0 / L)
    else:
        if aux_rng is None:
            raise DomainError("DA averaged-interference estimator needs aux_rng")
        a = _estimate_weights_mc(profile.beta, aux_rng)
    cross = a @ (profile.gamma**2).T  # cross[j, k] = sum_l a_{j,l} gamma_{k,l}^2
    interf = cross.sum(axis=0) - np.einsum("kk->k", cross)
    pbar = scenario.snr_budget / K
    noise = 1.0 if include_noise else 0.0
    return pbar * profile.gamma_norm_sq / (noise + pbar * interf)


def _scenario_user_rates(
    scenario: ScenarioLayout,
    profile: LargeScaleProfile,
    scheme: str,
    draws: int,
    rng: np.random.Generator,
    *,
    interference: str = "instantaneous",
    include_noise: bool = True,
    collect_user: int | None = None,
    aux_rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray | None, int]:
    """Mean rate per user over fading draws.

    Returns (per-user means, per-draw rates of collect_user or None, number of
    redrawn rank-deficient ZF draws).
    """
    scheme = scheme.upper()
    K, L = profile.beta.shape
    pbar = scenario.snr_budget / K
    if scheme == "ZFBF":
        if L < K:
            raise InfeasibleError("ZFBF needs L >= K")
        mu_z = pbar * profile.gamma_norm_sq
    elif interference == "averaged":
        mu = _mrt_mu_averaged(scenario, profile, include_noise, aux_rng)
    elif interference != "instantaneous":
        raise DomainError("interference must be 'instantaneous' or 'averaged'")
    noise = 1.0 if include_noise else 0.0

    sums = np.zeros(K)
    collected = [] if collect_user is not None else None
    resampled = 0
    left = draws
    chunk = _chunk_size(K, L)
    while left > 0:
        d = min(chunk, left)
        h = _draw_h(rng, d, K, L)
        if scheme == "ZFBF":
            rates, r = _zf_rates_chunk(h, profile.beta, mu_z, rng)
            resampled += r
        elif interference == "averaged":
            rates = _mrt_rates_chunk_averaged(h, profile.beta, mu)
        else:
            rates = _mrt_rates_chunk(h, profile.gamma, pbar, noise)
        sums += rates.sum(axis=0)
        if collected is not None:
            collected.append(rates[:, collect_user].copy())
        left -= d
    if resampled:
        log.warning("redrew %d rank-deficient ZFBF fading draws", resampled)
    means = sums / draws
    draws_k = np.concatenate(collected) if collected is not None else None
    return means, draws_k, resampled


def ergodic_rate_empirical(
    scenario: ScenarioLayout,
    scheme: str,
    k: int,
    plan: SimulationPlan,
    *,
    interference: str = "instantaneous",
    include_noise: bool = True,
    rng: np.random.Generator | None = None,
) -> RateEstimate:
    """Ergodic rate of user k by fading averaging on a fixed scenario."""
    if not 0 <= k < scenario.K:
        raise DomainError(f"user index {k} out of range")
    if rng is None:
        rng = substream(plan.master_seed, STREAM_FADING, 0, 0)
    aux = substream(plan.master_seed, STREAM_AUX, 0, 0)
    profile = large_scale_profile(scenario)
    _, draws_k, _ = _scenario_user_rates(
        scenario,
        profile,
        scheme,
        plan.fading_draws,
        rng,
        interference=interference,
        include_noise=include_noise,
        collect_user=k,
        aux_rng=aux,
    )
    value = float(draws_k.mean())
    stderr = float(draws_k.std(ddof=1) / math.sqrt(draws_k.size)) if draws_k.size > 1 else 0.0
    return RateEstimate(value, "monte_carlo", stderr=stderr, n_samples=plan.fading_draws)


def _realization_mean(args) -> float:
    (
        master_seed,
        a,
        u,
        L,
        K,
        layout,
        scheme,
        alpha,
        snr_budget,
        fading_draws,
        interference,
        include_noise,
    ) = args
    layout = Layout(layout)
    if layout is Layout.CA:
        antennas = [CellPoint(0.0, 0.0)] * L
    else:
        antennas = sample_uniform_disk(L, substream(master_seed, STREAM_ANTENNA, a))
    users = sample_uniform_disk(K, substream(master_seed, STREAM_USER, a, u))
    scenario = build_scenario(
        users, antennas, layout, alpha, snr_budget,
        substream(master_seed, STREAM_SEPARATION, a, u),
    )
    profile = large_scale_profile(scenario)
    means, _, _ = _scenario_user_rates(
        scenario,
        profile,
        scheme,
        fading_draws,
        substream(master_seed, STREAM_FADING, a, u),
        interference=interference,
        include_noise=include_noise,
        aux_rng=substream(master_seed, STREAM_AUX, a, u),
    )
    return float(means.mean())


def average_user_rate(
    plan: SimulationPlan,
    L: int,
    K: int,
    layout: Layout | str,
    scheme: str,
    alpha: float,
    snr_budget: float,
    *,
    workers: int = 1,
    interference: str = "instantaneous",
    include_noise: bool = True,
) -> RateEstimate:
    """Rate averaged over fading, user positions, and (DA) antenna positions.

    CA pins the antennas at the origin, so antenna_realizations is forced to 1.
    The reduction order is fixed by realization index, and every realization
    draws from its own substream, so the estimate is identical for any
    ``workers`` value.
    """
    layout = Layout(layout)
    A = 1 if layout is Layout.CA else plan.antenna_realizations
    U = plan.user_realizations
    tasks = [
        (
            plan.master_seed,
            a,
            u,
            L,
            K,
            layout.value,
            scheme.upper(),
            alpha,
            snr_budget,
            plan.fading_draws,
            interference,
            include_noise,
        )
        for a in range(A)
        for u in range(U)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_realization_mean, tasks, chunksize=1))
    else:
        values = [_realization_mean(t) for t in tasks]
    grid = np.array(values).reshape(A, U)
    value = float(grid.mean())
    if A > 1:
        outer = grid.mean(axis=1)
    else:
        outer = grid[0]
    stderr = float(outer.std(ddof=1) / math.sqrt(outer.size)) if outer.size > 1 else 0.0
    return RateEstimate(value, "monte_carlo", stderr=stderr, n_samples=A * U)


def desk_plan(plan: SimulationPlan | None = None, **overrides) -> SimulationPlan:
    """Convenience: derive a plan with overridden counts/seed."""
    base = plan if plan is not None else SimulationPlan()
    return replace(base, **overrides)
