"""Closed-form interference moments in the typical room and at the typical user.

All expressions depend on the grid only through ``r_i = lam_i/mu_i`` and the
losses ``K_i``; ``0**0 == 1`` throughout so ``K_i = 0`` is a valid input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, ParameterError, QuadratureError
from .grid import GridParams


@dataclass(frozen=True)
class MomentReport:
    mean: float
    variance: float
    covariance: float | None = None
    corr_coeff: float | None = None
    room: tuple[int, ...] | None = None


def _room(params: GridParams, room: Sequence[int]) -> tuple[int, ...]:
    room = tuple(int(v) for v in room)
    if len(room) != params.n:
        raise ParameterError(f"room index must have {params.n} entries")
    return room


def geom_sums(k: float, shift: int) -> tuple[float, float]:
    """Two-sided geometric sums used by the joint moment.

    ``S1 = sum_i K**(|i| + |i - shift|)`` and ``S2`` is the same double sum over
    ``i != i'``, i.e. ``((1+K)/(1-K))**2 - S1``.
    """
    if not 0.0 <= k < 1.0:
        raise DomainError(f"K must lie in [0, 1), got {k}")
    if shift < 0:
        raise DomainError("shift must be a non-negative integer")
    s1 = k**shift * (shift + (1 + k * k) / (1 - k * k))
    s2 = ((1 + k) / (1 - k)) ** 2 - s1
    return float(s1), float(s2)


def _a(k):
    return ((1 + k) / (1 - k)) ** 2


def _b(k, x):
    x = abs(x)
    return k**x * (x + (1 + k * k) / (1 - k * k))


def mean_room(params: GridParams) -> float:
    r = params.ratios
    k = np.asarray(params.k)
    return float(params.edge_share * r.sum() * np.prod((1 + k) / (1 - k)))


def joint_moment_room(params: GridParams, room: Sequence[int]) -> float:
    """``E[I_0 I_room]`` without fading."""
    room = _room(params, room)
    share = params.edge_share
    r = params.ratios
    ks = params.k
    prod_b = math.prod(_b(k, x) for k, x in zip(ks, room))
    prod_a = math.prod(_a(k) for k in ks)
    cross = sum(ri * ri * _b(k, x) / _a(k) for ri, k, x in zip(r, ks, room))
    return float(share * r.sum() * prod_b + share * share * prod_a * (r.sum() ** 2 + cross))


def covariance_room(params: GridParams, room: Sequence[int]) -> float:
    """``Cov[I_0, I_room]``; the squared-mean term is cancelled analytically."""
    room = _room(params, room)
    share = params.edge_share
    r = params.ratios
    ks = params.k
    prod_b = math.prod(_b(k, x) for k, x in zip(ks, room))
    prod_a = math.prod(_a(k) for k in ks)
    cross = sum(ri * ri * _b(k, x) / _a(k) for ri, k, x in zip(r, ks, room))
    return float(share * r.sum() * prod_b + share * share * prod_a * cross)


def variance_room(params: GridParams) -> float:
    return covariance_room(params, (0,) * params.n)


def corr_coeff(params: GridParams, room: Sequence[int]) -> float:
    """Correlation coefficient between the typical room and ``room``."""
    var = variance_room(params)
    if var == 0:
        raise ParameterError("correlation undefined: interference variance is zero")
    return covariance_room(params, room) / var


def mean_user(params: GridParams) -> float:
    r = params.ratios
    k = np.asarray(params.k)
    return float(params.edge_share * np.prod((1 + k) / (1 - k)) * np.sum(r * 2 / (1 + k)))


def variance_user(params: GridParams) -> float:
    """Typical-user variance without fading, any dimension.

    Per edge axis ``j`` the user splits the zero cell into two exponential
    pieces, so the slab sums along ``j`` become ``2/(1-K_j**2)``.
    """
    r = params.ratios
    k = np.asarray(params.k)
    share = params.edge_share
    lin = np.prod((1 + k) / (1 - k))
    sq = np.prod((1 + k * k) / (1 - k * k))
    poisson = share * sq * np.sum(r * 2 / (1 + k * k))
    shared = share * share * lin**2 * np.sum(r * r * 2 * (1 - k) / (1 + k) ** 3)
    return float(poisson + shared)


def _require_3d(params: GridParams):
    if params.n != 3:
        raise ParameterError(f"this quantity is defined for n = 3 only, got n = {params.n}")


def uncorr_mean_user_3d(params: GridParams) -> float:
    """Mean user interference with independently drawn wall counts per BS.

    Computed from the Campbell integral ``lam_j * int exp(-mu_j |x| (1-K_j)) dx``
    times the leakage sums of the two transverse axes.
    """
    _require_3d(params)
    total = 0.0
    for j in range(3):
        lam, mu, kj = params.lam[j], params.mu[j], params.k[j]
        if lam == 0:
            continue
        half, err = integrate.quad(lambda x: math.exp(-mu * x * (1 - kj)), 0, math.inf, epsabs=1e-13, epsrel=1e-12)
        if err > 1e-9 * max(half, 1.0):
            raise QuadratureError("Campbell integral did not converge")
        leak = math.prod((1 + params.k[q]) / (1 - params.k[q]) for q in range(3) if q != j)
        total += 4 * lam * 2 * half * leak
    return total


def var_user_corr_3d(params: GridParams) -> float:
    _require_3d(params)
    r = params.ratios
    k = np.asarray(params.k)
    lin = np.prod((1 + k) / (1 - k))
    sq = np.prod((1 + k * k) / (1 - k * k))
    return float(lin**2 * np.sum(32 * (1 - k) / (1 + k) ** 3 * r * r) + sq * np.sum(8 / (1 + k * k) * r))


def var_user_uncorr_3d(params: GridParams) -> float:
    _require_3d(params)
    r = params.ratios
    k = np.asarray(params.k)
    sq = np.prod((1 + k * k) / (1 - k * k))
    return float(4 * sq * np.sum(r * (1 + k) / (1 + k * k)))


def variance_ratio_3d(params: GridParams) -> float:
    """Correlated-to-uncorrelated user variance ratio when only axis-1 edges carry BSs."""
    _require_3d(params)
    if params.lam[1] != 0 or params.lam[2] != 0:
        raise ParameterError("variance ratio closed form requires lam_2 = lam_3 = 0")
    k1, k2, k3 = params.k
    r1 = params.ratios[0]

    def leak(k):
        return (1 + k) ** 3 / ((1 - k) * (1 + k * k))

    return float(2 / (1 + k1) * (1 + 4 * r1 * leak(k2) * leak(k3)))


def room_report(params: GridParams, room: Sequence[int] | None = None) -> MomentReport:
    mean = mean_room(params)
    var = variance_room(params)
    if room is None:
        return MomentReport(mean=mean, variance=var)
    room = _room(params, room)
    cov = covariance_room(params, room)
    rho = corr_coeff(params, room) if var > 0 else None
    return MomentReport(mean=mean, variance=var, covariance=cov, corr_coeff=rho, room=room)
