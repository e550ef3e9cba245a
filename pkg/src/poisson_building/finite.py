"""Finite and semi-infinite Poisson buildings and the window-office model.

Finite sides replace the exponential slab widths by the spacings of
``1 + Poisson(mu*d)`` intervals on ``[0, d]``; the joint Laplace transform of
such spacings is the inverse Laplace transform of a rational function.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .errors import DomainError, NonConvergenceError, ParameterError
from .grid import GridParams
from .series import SeriesControl

SIDES = ((0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1))


# --------------------------------------------------------------------------- interval transform


def interval_laplace(d: float, n: int, s: Sequence[float]) -> float:
    """``E[prod exp(-s_i y_i)]`` for the ``n`` spacings of ``n-1`` uniform points on ``[0, d]``.

    Well separated rates go through the partial-fraction inverse Laplace
    transform.  Rates closer than ``1e-6 * max(s)``, or an alternating sum that
    cancels badly, switch to a uniformized power series of the chained
    convolution whose terms are all non-negative.
    """
    if not d > 0:
        raise DomainError("interval length must be positive")
    n = int(n)
    s = np.asarray(s, dtype=float).ravel()
    if n < 1 or s.size != n:
        raise ParameterError("need n >= 1 and exactly n rates")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise DomainError("rates must be finite and non-negative")
    if n == 1:
        return math.exp(-s[0] * d)
    poles = np.sort(s)
    if n > 32 or np.min(np.diff(poles)) <= 1e-6 * poles[-1]:
        return uniformized_convolution(s, d)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        value, scale = _partial_fractions(poles, d)
    if not math.isfinite(value) or not math.isfinite(scale) or scale > 1e4 * max(abs(value), 1e-300):
        return uniformized_convolution(s, d)
    return float(value * math.exp(math.lgamma(n) - (n - 1) * math.log(d)))


def _partial_fractions(poles, d):
    """Inverse Laplace transform of ``prod 1/(z + p_i)`` at ``d`` for distinct poles.

    Returns the value and the largest term magnitude (a conditioning gauge).
    """
    gaps = poles[None, :] - poles[:, None]
    np.fill_diagonal(gaps, 1.0)
    terms = np.exp(-poles * d) / np.prod(gaps, axis=1)
    return float(terms.sum()), float(np.max(np.abs(terms)))


def uniformized_convolution(s, d: float) -> float:
    """Same quantity as :func:`interval_laplace` from ``exp(d (A - max(s)))``.

    ``A`` holds ``max(s) - s_i`` on the diagonal and ones below it, so the
    power series of ``exp(d A)`` has non-negative terms and no cancellation.
    """
    s = np.asarray(s, dtype=float)
    n = s.size
    top = float(s.max())
    diag = (top - s) * d
    v = np.zeros(n)
    v[0] = 1.0
    log_scale = 0.0
    acc = 0.0
    k = 0
    peak = (top + 1) * d
    while True:
        term = v[n - 1]
        acc += term
        if k >= n - 1 and k > peak and term <= 1e-17 * acc:
            break
        k += 1
        nxt = diag * v
        nxt[1:] += d * v[:-1]
        v = nxt / k
        big = v.max()
        if big > 1e250:
            v /= big
            acc /= big
            log_scale += math.log(big)
    if acc <= 0:
        return 0.0
    return math.exp(math.log(acc) + log_scale - top * d + math.lgamma(n) - (n - 1) * math.log(d))


# --------------------------------------------------------------------------- finite building


@dataclass(frozen=True)
class BuildingExtents:
    """Distances from the user to the boundary in the ``-v1, +v1, -v2, +v2, -v3, +v3`` directions."""

    d: tuple[float, ...]

    def __post_init__(self):
        d = tuple(float(v) for v in self.d)
        if len(d) != 6:
            raise ParameterError("need six extents")
        if any(not v > 0 for v in d):
            raise ParameterError("extents must be positive or inf")
        object.__setattr__(self, "d", d)

    @classmethod
    def unbounded(cls) -> "BuildingExtents":
        return cls((math.inf,) * 6)

    @classmethod
    def half(cls, d_minus_v1: float) -> "BuildingExtents":
        return cls((d_minus_v1,) + (math.inf,) * 5)

    def side(self, axis: int, j: int) -> float:
        return self.d[2 * axis + j]


@dataclass(frozen=True)
class OobInterference:
    """Deterministic out-of-building power arriving at each face, same order as the extents."""

    power: tuple[float, ...] = (0.0,) * 6

    def __post_init__(self):
        p = tuple(float(v) for v in self.power)
        if len(p) != 6 or any(not v >= 0 or not math.isfinite(v) for v in p):
            raise ParameterError("need six finite non-negative OoB powers")
        object.__setattr__(self, "power", p)

    def side(self, axis: int, j: int) -> float:
        return self.power[2 * axis + j]


def _wall_count_range(mu: float, d: float, tail: float) -> tuple[np.ndarray, np.ndarray]:
    """Support and pmf of ``1 + Poisson(mu*d)`` truncated where the tail drops below ``tail``."""
    dist = stats.poisson(mu * d)
    top = int(dist.isf(tail)) + 1
    k = np.arange(0, top + 1)
    return k + 1, dist.pmf(k)


def _axis_weights(k: float, lo: int, hi: int) -> np.ndarray:
    """``K**|a|`` for room indices ``a`` in ``[lo, hi]``."""
    a = np.arange(lo, hi + 1)
    if k == 0:
        a = a[a == 0]
    return np.power(k, np.abs(a))


def _reach(k: float, scale: float, tol: float) -> int:
    if k == 0 or scale == 0:
        return 0
    return max(int(math.ceil(math.log(tol * 1e-3 * (1 - k) / (scale * (1 + k))) / math.log(k))), 1)


class _Direction:
    """Slab rates for the BSs on axis-``i`` edges on one side of the user."""

    def __init__(self, s: float, params: GridParams, axis: int, tol: float):
        self.s = s
        self.params = params
        self.axis = axis
        self.tol = tol
        self.others = [q for q in range(3) if q != axis]

    def rates(self, ranges, count: int) -> np.ndarray:
        """``4 lam sum_{transverse} (1 - 1/(1 + s K_i**(m-1) B))`` for ``m = 1..count``."""
        p = self.params
        grids = [_axis_weights(p.k[q], lo, hi) for q, (lo, hi) in zip(self.others, ranges)]
        b = np.outer(grids[0], grids[1]).ravel()
        m = np.arange(count)
        u = self.s * np.power(p.k[self.axis], m)[:, None] * b[None, :]
        return p.edge_share * p.lam[self.axis] * (u / (1 + u)).sum(axis=1)

    def infinite_side(self, ranges) -> float:
        """``prod_m (1 + rate_m/mu)**(-1)`` over an unbounded side."""
        p = self.params
        ki = p.k[self.axis]
        count = 1 if ki == 0 else max(_reach(ki, self.s * 1e3, self.tol), 8)
        rates = self.rates(ranges, count)
        return float(np.exp(-np.sum(np.log1p(rates / p.mu[self.axis]))))


def finite_building_laplace(s: float, params: GridParams, ext: BuildingExtents,
                            oob: OobInterference = OobInterference(),
                            ctrl: SeriesControl = SeriesControl(), max_terms: int = 1_000_000) -> float:
    """Laplace transform of the Rayleigh interference at a user inside a box-shaped building.

    Sums over the wall counts ``n_ij`` of the finite sides (``1 + Poisson``).
    Given the counts, BSs on axis-``i`` edges on side ``j`` see the transverse
    room ranges cut by the other axes' counts, their slab widths follow the
    uniform-spacing law, and the OoB power of face ``ij`` crosses ``n_ij`` walls.
    Transverse ranges beyond the distance where rooms stop mattering at
    ``ctrl.tol`` are saturated, so long sides share cached factors.
    """
    if params.n != 3:
        raise ParameterError("finite buildings are three-dimensional")
    if not s >= 0:
        raise DomainError("s must be non-negative")
    if s == 0:
        return 1.0
    for axis, j in SIDES:
        if math.isinf(ext.side(axis, j)) and oob.side(axis, j) > 0:
            raise ParameterError("OoB interference needs a finite face")
    finite = [(axis, j) for axis, j in SIDES if not math.isinf(ext.side(axis, j))]
    tail = ctrl.tol / (4 * max(len(finite), 1))
    supports = [_wall_count_range(params.mu[axis], ext.side(axis, j), tail) for axis, j in finite]
    terms = math.prod(len(k) for k, _ in supports)
    if terms > max_terms:
        raise NonConvergenceError(
            f"{terms} wall-count combinations needed at tol {ctrl.tol:.1g}; loosen tol or raise max_terms",
            bound=float(terms))
    scale = s * params.edge_share * max(float(params.ratios.max()), 1e-300)
    reach = [_reach(k, scale, ctrl.tol) for k in params.k]
    dirs = [_Direction(s, params, axis, ctrl.tol) for axis in range(3)]

    @functools.lru_cache(maxsize=None)
    def side_factor(axis: int, j: int, count: int | None, ranges: tuple) -> float:
        if params.lam[axis] == 0:
            return 1.0
        if count is None:
            return dirs[axis].infinite_side(ranges)
        rates = dirs[axis].rates(ranges, count)
        return interval_laplace(ext.side(axis, j), count, rates)

    def bound(q, count):
        return reach[q] if count is None else min(count - 1, reach[q])

    total = 0.0
    mass = 0.0
    for combo in itertools.product(*[range(len(k)) for k, _ in supports]):
        counts = {side: int(supports[t][0][c]) for t, (side, c) in enumerate(zip(finite, combo))}
        weight = math.prod(float(supports[t][1][c]) for t, c in enumerate(combo))
        if weight == 0:
            continue
        value = 1.0
        for axis, j in SIDES:
            ranges = tuple((-bound(q, counts.get((q, 0))), bound(q, counts.get((q, 1))))
                           for q in range(3) if q != axis)
            count = counts.get((axis, j))
            value *= side_factor(axis, j, count, ranges)
            if count is not None:
                value /= 1 + s * oob.side(axis, j) * params.k[axis] ** count
        total += weight * value
        mass += weight
    if 1 - mass > ctrl.tol:
        raise NonConvergenceError("wall-count truncation left too much probability mass", bound=1 - mass)
    return float(total)


def semi_infinite_laplace(s: float, params: GridParams, d_v11: float,
                          ctrl: SeriesControl = SeriesControl()) -> float:
    """User at distance ``d_v11`` from the only boundary of the building (on the ``-v1`` side).

    BSs on ``v2``/``v3`` edges only occupy rooms inside the building, i.e.
    axis-1 room indices ``>= -(n - 1)`` for ``n`` walls towards the boundary.
    """
    if math.isinf(d_v11):
        return finite_building_laplace(s, params, BuildingExtents.unbounded(), ctrl=ctrl)
    return finite_building_laplace(s, params, BuildingExtents.half(d_v11), ctrl=ctrl)


# --------------------------------------------------------------------------- window office


@dataclass(frozen=True)
class WindowModel:
    """Out-of-building loss ``l_fn(m)`` at graph distance ``m`` and window loss ``l_w``."""

    l_fn: Callable[[int], float]
    l_w: float

    def __post_init__(self):
        if not 0 <= self.l_w <= 1:
            raise ParameterError("window loss must lie in [0, 1]")
        levels = [float(self.l_fn(m)) for m in range(64)]
        if any(not 0 <= v <= 1 for v in levels):
            raise ParameterError("OoB loss levels must lie in [0, 1]")
        if any(b > a for a, b in zip(levels, levels[1:])):
            raise ParameterError("OoB loss levels must be non-increasing")

    @classmethod
    def geometric(cls, base: float, l_w: float) -> "WindowModel":
        return cls(lambda m: base**m, l_w)

    def levels(self, top: int) -> np.ndarray:
        return np.array([float(self.l_fn(m)) for m in range(top + 1)])


def _window_terms(s, params: GridParams, w: WindowModel, radius: int):
    k1, k2, k3 = params.k
    i = np.arange(0, radius + 1)
    j = np.arange(-radius, radius + 1)
    ii, jj, kk = np.meshgrid(i, j, j, indexing="ij")
    direct = np.power(k1, ii) * np.power(k2, np.abs(jj)) * np.power(k3, np.abs(kk))
    lev = w.levels(2 * radius)
    oob = lev[np.abs(jj) + np.abs(kk)] * w.l_w**2 * np.power(k1, ii)
    term = 1 - 1 / ((1 + s * direct) * (1 + s * oob))
    share = params.edge_share
    r = params.ratios
    log_val = -np.sum(np.log1p(share * r[0] * term.sum(axis=(1, 2))))
    log_val -= np.sum(np.log1p(share * r[1] * term.sum(axis=(0, 2))))
    log_val -= np.sum(np.log1p(share * r[2] * term.sum(axis=(0, 1))))
    return math.exp(log_val)


def window_laplace(s: float, params: GridParams, w: WindowModel, ctrl: SeriesControl = SeriesControl()) -> float:
    """Laplace transform of the Rayleigh interference in a window room.

    Each BS reaches the window room through the walls and, independently
    faded, through the outside via the window room of its own row.
    """
    if params.n != 3:
        raise ParameterError("the window office is three-dimensional")
    if not s >= 0:
        raise DomainError("s must be non-negative")
    if s == 0:
        return 1.0
    radius = max(ctrl.radius, 8)
    prev = _window_terms(s, params, w, radius)
    while radius < ctrl.max_radius:
        radius *= 2
        cur = _window_terms(s, params, w, min(radius, ctrl.max_radius))
        if abs(cur - prev) < ctrl.tol:
            return cur
        prev = cur
    raise NonConvergenceError("window-office products did not settle", radius=radius)


def window_success(theta: float, params: GridParams, room: Sequence[int], sigma2: float, w: WindowModel,
                   ctrl: SeriesControl = SeriesControl()) -> float:
    """Success probability of a D2D link from ``room`` (``i >= 0``) into the window room."""
    room = tuple(int(v) for v in room)
    if len(room) != 3 or room[0] < 0:
        raise ParameterError("room must be (i, j, k) with i >= 0")
    if not theta > 0 or not sigma2 >= 0:
        raise DomainError("need theta > 0 and sigma2 >= 0")
    gain = math.prod(k ** abs(v) for k, v in zip(params.k, room))
    if gain == 0:
        return 0.0
    return window_laplace(theta / gain, params, w, ctrl) * math.exp(-theta * sigma2 / gain)
