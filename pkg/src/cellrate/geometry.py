"""Unit-disk scenario geometry: point sampling and access-distance laws.

All positions live in a disk of radius 1.  The conditional distance law
``access_distance_cdf(x, y)`` gives the probability that a uniformly placed
point lies within distance x of a reference point at radius y; everything
else (minimum access distances, nearest-neighbor statistics) derives from it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DomainError,
    EmptyInputError,
    InfeasibleError,
    LayoutMismatchError,
)

# Path loss diverges at zero distance; points closer than this to a user are redrawn.
MIN_SEPARATION = 1e-3

TWO_PI = 2.0 * math.pi


class Layout(str, Enum):
    CA = "ca"
    DA = "da"


@dataclass(frozen=True)
class CellPoint:
    """Polar position inside the unit disk; theta wraps modulo 2*pi."""

    rho: float
    theta: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise DomainError(f"rho={self.rho} outside [0, 1]")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    def xy(self) -> tuple[float, float]:
        return (self.rho * math.cos(self.theta), self.rho * math.sin(self.theta))


def _points_xy(points: Sequence[CellPoint]) -> np.ndarray:
    rho = np.array([p.rho for p in points])
    theta = np.array([p.theta for p in points])
    return np.column_stack((rho * np.cos(theta), rho * np.sin(theta)))


@dataclass(eq=False)
class ScenarioLayout:
    """K users and L base-station antennas in the unit disk.

    snr_budget is the linear total-power-to-noise ratio P_t/N_0.
    """

    users: tuple
    antennas: tuple
    layout: Layout
    alpha: float
    snr_budget: float

    def __post_init__(self):
        self.users = tuple(self.users)
        self.antennas = tuple(self.antennas)
        self.layout = Layout(self.layout)
        if len(self.users) < 1:
            raise EmptyInputError("scenario needs at least one user")
        if len(self.antennas) < 1:
            raise EmptyInputError("scenario needs at least one antenna")
        if self.alpha <= 2.0:
            raise DomainError("path-loss factor must exceed 2")
        if self.snr_budget <= 0.0:
            raise DomainError("snr_budget must be positive")
        if self.layout is Layout.CA and any(p.rho != 0.0 for p in self.antennas):
            raise LayoutMismatchError("CA layout requires every antenna at the origin")

    @property
    def K(self) -> int:
        return len(self.users)

    @property
    def L(self) -> int:
        return len(self.antennas)

    @cached_property
    def user_xy(self) -> np.ndarray:
        return _points_xy(self.users)

    @cached_property
    def antenna_xy(self) -> np.ndarray:
        return _points_xy(self.antennas)

    @cached_property
    def user_antenna_distances(self) -> np.ndarray:
        """(K, L) Euclidean distances."""
        diff = self.user_xy[:, None, :] - self.antenna_xy[None, :, :]
        return np.sqrt((diff**2).sum(axis=2))

    @cached_property
    def user_user_distances(self) -> np.ndarray:
        """(K, K) Euclidean distances, diagonal set to +inf."""
        diff = self.user_xy[:, None, :] - self.user_xy[None, :, :]
        d = np.sqrt((diff**2).sum(axis=2))
        np.fill_diagonal(d, np.inf)
        return d


def sample_uniform_disk(n: int, rng: np.random.Generator) -> list[CellPoint]:
    """n i.i.d. points uniform over the unit disk (radial cdf r^2, pdf 2r)."""
    if n == 0:
        raise EmptyInputError("cannot sample zero points")
    if n < 0:
        raise DomainError("n must be positive")
    rho = np.sqrt(rng.uniform(size=n))
    theta = rng.uniform(0.0, TWO_PI, size=n)
    return [CellPoint(float(r), float(t)) for r, t in zip(rho, theta)]


def _draw_point(rng: np.random.Generator) -> CellPoint:
    return CellPoint(float(math.sqrt(rng.uniform())), float(rng.uniform(0.0, TWO_PI)))


def build_scenario(
    users: Iterable[CellPoint],
    antennas: Iterable[CellPoint],
    layout: Layout | str,
    alpha: float,
    snr_budget: float,
    rng: np.random.Generator,
) -> ScenarioLayout:
    """Assemble a scenario, enforcing the minimum user-antenna separation.

    DA: any antenna within MIN_SEPARATION of a user is redrawn.  CA: the
    antennas are pinned to the origin, so users inside the separation radius
    are redrawn instead.
    """
    layout = Layout(layout)
    users = list(users)
    antennas = list(antennas)
    if layout is Layout.CA:
        for i, u in enumerate(users):
            while u.rho < MIN_SEPARATION:
                u = _draw_point(rng)
            users[i] = u
    else:
        uxy = _points_xy(users)
        for j, a in enumerate(antennas):
            ax, ay = a.xy()
            while np.min(np.hypot(uxy[:, 0] - ax, uxy[:, 1] - ay)) < MIN_SEPARATION:
                a = _draw_point(rng)
                ax, ay = a.xy()
            antennas[j] = a
    return ScenarioLayout(tuple(users), tuple(antennas), layout, alpha, snr_budget)


def sample_scenario(
    L: int,
    K: int,
    layout: Layout | str,
    alpha: float,
    snr_budget: float,
    rng: np.random.Generator,
) -> ScenarioLayout:
    """Sample users (and, for DA, antennas) uniformly and assemble a scenario."""
    layout = Layout(layout)
    users = sample_uniform_disk(K, rng)
    if layout is Layout.CA:
        antennas = [CellPoint(0.0, 0.0) for _ in range(L)]
    else:
        antennas = sample_uniform_disk(L, rng)
    return build_scenario(users, antennas, layout, alpha, snr_budget, rng)


def _check_xy_domain(x: np.ndarray, y: float) -> None:
    if not 0.0 <= y <= 1.0:
        raise DomainError(f"reference radius y={y} outside [0, 1]")
    if np.any(x < 0.0) or np.any(x > 1.0 + y + 1e-12):
        raise DomainError("distance x outside [0, 1+y]")


def access_distance_cdf(x, y: float):
    """P(distance from a point at radius y to a uniform disk point <= x).

    Two branches: x^2 while the disk of radius x around the reference point is
    contained in the cell, and a circular-lens area otherwise.  The boundary
    x = 1-y is evaluated on the inner branch, where the two branches agree.
    """
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    _check_xy_domain(xa, y)
    out = np.empty_like(xa)
    inner = xa <= 1.0 - y
    out[inner] = xa[inner] ** 2
    o = ~inner
    if o.any():
        xo = xa[o]
        # Clamp acos arguments and the Heron radicand: rounding at branch
        # boundaries can push them marginally outside their domains.
        c1 = np.clip((xo**2 + y**2 - 1.0) / (2.0 * y * xo), -1.0, 1.0)
        c2 = np.clip((1.0 + y**2 - xo**2) / (2.0 * y), -1.0, 1.0)
        s = 0.5 * (xo + y + 1.0)
        rad = np.clip(s * (s - 1.0) * (s - xo) * (s - y), 0.0, None)
        out[o] = (
            xo**2 / math.pi * np.arccos(c1)
            + np.arccos(c2) / math.pi
            - 2.0 / math.pi * np.sqrt(rad)
        )
        # acos loses ~sqrt(eps) exactly at the far boundary; pin total mass there.
        out[o & (xa >= 1.0 + y - 1e-12)] = 1.0
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def access_distance_pdf(x, y: float):
    """Density companion of access_distance_cdf."""
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    _check_xy_domain(xa, y)
    out = np.empty_like(xa)
    inner = xa <= 1.0 - y
    out[inner] = 2.0 * xa[inner]
    o = ~inner
    if o.any():
        xo = xa[o]
        c1 = np.clip((xo**2 + y**2 - 1.0) / (2.0 * y * xo), -1.0, 1.0)
        out[o] = 2.0 * xo / math.pi * np.arccos(c1)
    out = np.clip(out, 0.0, None)
    return float(out[0]) if scalar else out


def min_access_distance_pdf(x, y: float, n: int):
    """Density of the minimum distance from a point at radius y to n uniform points."""
    if n < 1:
        raise DomainError("n must be at least 1")
    F = access_distance_cdf(x, y)
    f = access_distance_pdf(x, y)
    return n * (1.0 - F) ** (n - 1) * f


def min_access_distance_cdf(x, y: float, n: int):
    """1 - (1 - F(x; y))^n."""
    if n < 1:
        raise DomainError("n must be at least 1")
    F = access_distance_cdf(x, y)
    return 1.0 - (1.0 - F) ** n


def access_distance_ppf(q, y: float):
    """Inverse of access_distance_cdf in x for fixed y."""
    qa = np.asarray(q, dtype=float)
    scalar = qa.ndim == 0
    qa = np.atleast_1d(qa)
    if np.any(qa < 0.0) or np.any(qa > 1.0):
        raise DomainError("quantile level outside [0, 1]")
    out = np.empty_like(qa)
    inner = qa <= (1.0 - y) ** 2
    out[inner] = np.sqrt(qa[inner])
    lo, hi = max(1.0 - y, 0.0), 1.0 + y
    for i in np.nonzero(~inner)[0]:
        qi = qa[i]
        if qi >= 1.0:
            out[i] = hi
            continue
        out[i] = brentq(
            lambda t: access_distance_cdf(t, y) - qi, lo, hi, xtol=1e-14, rtol=1e-15
        )
    return float(out[0]) if scalar else out


def min_access_distance_ppf(q, y: float, n: int):
    """Quantile of the minimum distance to n uniform points, given radius y."""
    if n < 1:
        raise DomainError("n must be at least 1")
    qa = np.asarray(q, dtype=float)
    # v solves 1-(1-v)^n = q, computed stably for large n.
    v = -np.expm1(np.log1p(-qa) / n)
    return access_distance_ppf(v, y)


def sample_min_access_distance(
    n: int, y: float, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Draw minimum access distances to n uniform points via the exact quantile."""
    return np.atleast_1d(min_access_distance_ppf(rng.uniform(size=size), y, n))


@dataclass(frozen=True)
class NeighborStats:
    """Per-user nearest-neighbor summary of a DA scenario.

    trimmed_d_min is the minimum distance over the antennas not claimed as
    nearest by any other user (at least L-K+1 of them remain).
    """

    nearest_antenna_index: np.ndarray
    d_min_antenna: np.ndarray
    d_min_user: np.ndarray
    cocluster_count: np.ndarray
    trimmed_d_min: np.ndarray


def nearest_antenna_stats(scenario: ScenarioLayout) -> NeighborStats:
    """Nearest antennas, minimum access distances, and co-cluster counts.

    Exact distance ties are broken toward the smaller antenna index so results
    are reproducible (ties have probability zero under continuous placement).
    """
    if scenario.layout is not Layout.DA:
        raise LayoutMismatchError(
            "nearest-antenna statistics are defined for the DA layout"
        )
    K, L = scenario.K, scenario.L
    if L < K:
        raise InfeasibleError("trimmed antenna set can be empty when L < K")
    D = scenario.user_antenna_distances
    nearest = D.argmin(axis=1)
    rows = np.arange(K)
    d_min_antenna = D[rows, nearest]
    d_min_user = scenario.user_user_distances.min(axis=1)
    counts = np.bincount(nearest, minlength=L)
    cocluster = counts[nearest] - 1
    claimed = counts > 0
    masked = np.where(claimed[None, :], np.inf, D)
    own_free = counts[nearest] == 1
    masked[rows[own_free], nearest[own_free]] = d_min_antenna[own_free]
    trimmed = masked.min(axis=1)
    return NeighborStats(
        nearest_antenna_index=nearest,
        d_min_antenna=d_min_antenna,
        d_min_user=d_min_user,
        cocluster_count=cocluster.astype(np.int64),
        trimmed_d_min=trimmed,
    )
