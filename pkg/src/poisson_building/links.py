"""D2D success, cellular coverage and the free-space baseline.

All SINR metrics assume Rayleigh fading.  D2D links use the typical-room
labelling; cellular coverage uses the typical-user labelling, where the slab
at ``m >= 1`` pseudo-steps along the edge axis has ``m - 1`` walls and appears
on both sides of the user.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, NonConvergenceError, ParameterError, QuadratureError
from .grid import ChannelModel, GridParams, GridRealization
from .laplace import joint_laplace_room, laplace_room, laplace_truncated
from .series import SeriesControl, abs_lattice, rotated, total_weight


@dataclass(frozen=True)
class LinkQuery:
    theta: float
    nu: float = 1.0
    sigma2: float = 0.0
    room: tuple[int, ...] | None = None

    def __post_init__(self):
        if not (self.theta > 0 and self.nu > 0 and self.sigma2 >= 0):
            raise ParameterError("need theta > 0, nu > 0 and sigma2 >= 0")
        if self.room is not None:
            object.__setattr__(self, "room", tuple(int(v) for v in self.room))


@dataclass(frozen=True)
class Coverage:
    """A coverage value with its status: ``exact``, ``upper-bound`` or ``asymptotic``."""

    value: float
    tag: str


def _link_gain(params: GridParams, room) -> float:
    room = (0,) * params.n if room is None else tuple(room)
    if len(room) != params.n:
        raise ParameterError(f"room index must have {params.n} entries")
    return float(np.prod(np.power(params.k, np.abs(room))))


def success_d2d(q: LinkQuery, params: GridParams, ctrl: SeriesControl = SeriesControl()) -> float:
    """Success probability of a D2D link from ``q.room`` into the typical room."""
    gain = _link_gain(params, q.room)
    if gain == 0:
        return 0.0
    s = q.nu * q.theta / gain
    return laplace_room(s, params, ctrl, ChannelModel.RAYLEIGH) * math.exp(-s * q.sigma2)


def joint_success_d2d(theta: float, theta2: float, nu: float, params: GridParams, room: Sequence[int],
                      sigma1: float = 0.0, sigma2: float = 0.0, ctrl: SeriesControl = SeriesControl()) -> float:
    """Both in-room D2D links succeed: one in the typical room, one in ``room``.

    Each transmitter interferes with the other link through the walls between
    the two rooms; that cross term enters at unit transmit power.
    """
    room = tuple(int(v) for v in room)
    if not (theta >= 0 and theta2 >= 0 and nu > 0 and sigma1 >= 0 and sigma2 >= 0):
        raise ParameterError("need theta, theta2, sigma1, sigma2 >= 0 and nu > 0")
    if all(v == 0 for v in room):
        raise ParameterError("the two links must be in different rooms")
    cross = _link_gain(params, room)
    value = joint_laplace_room(nu * theta, nu * theta2, params, room, ctrl)
    value /= (1 + nu * theta * cross) * (1 + nu * theta2 * cross)
    return value * math.exp(-nu * (theta * sigma1 + theta2 * sigma2))


def joint_success_same_room(theta: float, theta2: float, nu: float, params: GridParams, sigma1: float = 0.0,
                            sigma2: float = 0.0, ctrl: SeriesControl = SeriesControl()) -> float:
    """Both D2D links inside the typical room succeed.

    The receivers see the same BSs with independent fades, and each sees the
    other link's transmitter without wall attenuation.
    """
    if not (theta >= 0 and theta2 >= 0 and nu > 0 and sigma1 >= 0 and sigma2 >= 0):
        raise ParameterError("need theta, theta2, sigma1, sigma2 >= 0 and nu > 0")
    value = joint_laplace_room(nu * theta, nu * theta2, params, (0,) * params.n, ctrl)
    value /= (1 + nu * theta) * (1 + nu * theta2)
    return value * math.exp(-nu * (theta * sigma1 + theta2 * sigma2))


# --------------------------------------------------------------------------- cellular coverage


def _user_kernel_sum(x: float, kappa, ks: tuple, radius: int, share: int):
    """``sum_slabs mult * log(1 + share*x*sum_j kappa(delta, w))`` for one edge axis.

    ``kappa(delta, w)`` receives the wall counts and attenuations of every
    ``(slab, transverse room)`` cell; slabs appear twice (both sides).
    """
    k_edge, others = ks[0], ks[1:]
    w, mult, l1 = abs_lattice(tuple(others), radius)
    top = radius if k_edge > 0 else 0
    a = np.arange(top + 1)
    delta = a[:, None] + l1[None, :]
    weight = np.power(k_edge, a)[:, None] * w[None, :]
    inner = (kappa(delta, weight) * mult[None, :]).sum(axis=1)
    return 2.0 * float(np.sum(np.log1p(share * x * inner)))


def _omitted_user_weight(ks: tuple, radius: int) -> float:
    k_edge, others = ks[0], ks[1:]
    w, mult, _ = abs_lattice(tuple(others), radius)
    total = 2.0 / (1 - k_edge) * total_weight(others)
    top = radius if k_edge > 0 else 0
    included = 2.0 * float(np.sum(np.power(k_edge, np.arange(top + 1)))) * float(np.dot(w, mult))
    return max(total - included, 0.0)


def _cov_ctrl(ctrl: SeriesControl) -> SeriesControl:
    return SeriesControl(radius=max(ctrl.radius, 8), tol=ctrl.tol, max_radius=ctrl.max_radius)


def coverage_strongest(theta: float, params: GridParams, sigma2: float = 0.0,
                       ctrl: SeriesControl = SeriesControl(), max_shell: int = 400) -> Coverage:
    """Strongest-BS coverage by the Campbell-Slivnyak sum over serving cells.

    For a candidate serving BS in the cell at slab ``m`` along edge axis ``k``
    and transverse room ``j`` (attenuation ``w``) the Palm expectation factors
    into the typical-user Laplace transform at ``theta/w`` times one extra
    factor for the slab that holds the BS (its width is size-biased).  The sum
    is the coverage for ``theta > 1`` (at most one BS can exceed the
    threshold) and an upper bound otherwise, clipped at 1.
    """
    if not theta > 0 or not sigma2 >= 0:
        raise DomainError("need theta > 0 and sigma2 >= 0")
    share = params.edge_share
    n = params.n
    lap = functools.lru_cache(maxsize=None)(
        lambda w: laplace_truncated(theta / w, params, ctrl, ChannelModel.RAYLEIGH, "user").value)
    cells = []
    for k in range(1, n + 1):
        x = params.ratios[k - 1]
        if x == 0:
            continue
        ks = rotated(params.k, k)
        cells.append((x, ks))
    total = 0.0
    quiet = 0
    for shell in range(max_shell + 1):
        contrib = 0.0
        for x, ks in cells:
            k_edge, others = ks[0], ks[1:]
            for a in range(0, shell + 1):
                if a > 0 and k_edge == 0:
                    break
                w_t, mult, l1 = abs_lattice(tuple(others), shell - a)
                sel = l1 == shell - a
                for wt, mu_t in zip(w_t[sel], mult[sel]):
                    w = k_edge**a * wt
                    if w == 0:
                        continue
                    noise = math.exp(-theta * sigma2 / w)
                    if noise == 0:
                        continue
                    slab = _slab_sum(theta / wt, others, ctrl)
                    contrib += 2 * share * x * mu_t * noise * lap(float(w)) / (1 + share * x * slab)
        total += contrib
        quiet = quiet + 1 if contrib < ctrl.tol / 10 else 0
        if quiet >= 2 and shell >= 2:
            return Coverage(min(float(total), 1.0), "exact" if theta > 1 else "upper-bound")
    raise NonConvergenceError(f"strongest-association series still moving at shell {max_shell}",
                              radius=max_shell, bound=contrib)


def _slab_sum(u: float, others: tuple, ctrl: SeriesControl) -> float:
    """``sum_j u*B_j/(1+u*B_j)`` over the transverse rooms of one slab."""
    m = ctrl.radius
    while True:
        w, mult, _ = abs_lattice(tuple(others), m)
        val = float(np.dot(u * w / (1 + u * w), mult))
        omitted = u * max(total_weight(others) - float(np.dot(w, mult)), 0.0)
        if omitted < ctrl.tol or m >= ctrl.max_radius:
            return val
        m *= 2


def coverage_nearest(theta: float, params: GridParams, sigma2: float = 0.0,
                     ctrl: SeriesControl = SeriesControl(), max_distance: int = 400) -> Coverage:
    """Coverage under nearest graph-distance association with equal losses.

    Given the grid, the serving distance is ``m`` when no cell closer than
    ``m`` holds a BS and the cells at ``m`` hold ``N >= 1``; the serving BS is
    one of them uniformly.  Averaging the Rayleigh interference over the
    Poisson counts gives ``(1+theta) * (A_m - B_m)``, with ``A_m`` and ``B_m``
    typical-user products whose per-cell exponent is 1 closer than ``m``
    (``B``: up to and including ``m``) and ``theta*K**(d-m)/(1+theta*K**(d-m))``
    otherwise.
    """
    if not theta > 0 or not sigma2 >= 0:
        raise DomainError("need theta > 0 and sigma2 >= 0")
    ks0 = set(params.k)
    if len(ks0) != 1:
        raise ParameterError("nearest association needs equal penetration losses")
    kk = params.k[0]
    if kk == 0:
        raise ParameterError("graph-distance association needs K > 0")
    share = params.edge_share
    c = _cov_ctrl(ctrl)

    def product(m: int, inclusive: bool):
        def kappa(delta, weight):
            rel = np.power(kk, np.maximum(delta - m, 0).astype(float))
            out = theta * rel / (1 + theta * rel)
            close = delta <= m if inclusive else delta < m
            return np.where(close, 1.0, out)

        radius = c.radius + m
        while True:
            log_total = 0.0
            bound = 0.0
            for k in range(1, params.n + 1):
                x = params.ratios[k - 1]
                if x == 0:
                    continue
                ks = rotated(params.k, k)
                log_total -= _user_kernel_sum(x, kappa, ks, radius, share)
                bound += share * x * theta * kk ** (-m) * _omitted_user_weight(ks, radius)
            value = math.exp(log_total)
            if value * -math.expm1(-bound) < c.tol / 10 or radius >= c.max_radius + m:
                return value
            radius *= 2

    total = 0.0
    for m in range(max_distance + 1):
        a_m = product(m, False)
        b_m = product(m, True)
        noise = math.exp(-theta * sigma2 / kk**m) if sigma2 > 0 else 1.0
        total += (1 + theta) * noise * (a_m - b_m)
        if (1 + theta) * a_m < ctrl.tol / 10:
            return Coverage(min(max(total, 0.0), 1.0), "exact")
    raise NonConvergenceError(f"nearest-association sum still moving at distance {max_distance}",
                              radius=max_distance, bound=(1 + theta) * a_m)


# --------------------------------------------------------------------------- conditional transform


def _room_table(g: GridRealization, params: GridParams, user):
    """Per-room BS mass and wall distance to the user's room for a frozen grid.

    The window boundary is the building boundary: room faces on it are not
    walls and carry no BSs.
    """
    n = g.n
    bounds, sides, real, index = [], [], [], []
    for i in range(n):
        a, b = g.window[i]
        edges = np.concatenate([[a], g.walls[i], [b]])
        bounds.append(edges)
        sides.append(np.diff(edges))
        m = edges.size - 1
        lo_real = np.arange(m) > 0
        hi_real = np.arange(m) < m - 1
        real.append(lo_real.astype(float) + hi_real.astype(float))
        u = int(np.searchsorted(g.walls[i], user[i], side="right"))
        if np.any(g.walls[i] == user[i]):
            raise ParameterError("the user must not sit on a wall")
        index.append(np.arange(m) - u)
    grids = np.meshgrid(*[np.arange(s.size) for s in sides], indexing="ij")
    idx = [gr.ravel() for gr in grids]
    mass = np.zeros(idx[0].size)
    for k in range(n):
        term = params.lam[k] * sides[k][idx[k]]
        for q in range(n):
            if q != k:
                term = term * real[q][idx[q]]
        mass += term
    offsets = np.stack([index[i][idx[i]] for i in range(n)], axis=1)
    return mass, offsets


def conditional_laplace_delta0(s: float, g: GridRealization, params: GridParams, user=None) -> float:
    """``E[exp(-s I) | grid, the user's room holds a BS]`` with nearest association.

    The serving BS is one of the ``N >= 1`` BSs of the user's room, the other
    ``N - 1`` interfere at unit attenuation and every other room ``R`` adds
    ``exp(-Lambda_R * s*w_R/(1+s*w_R))``.  ``user`` defaults to the window centre.
    """
    if not s >= 0:
        raise DomainError("s must be non-negative")
    if g.n != params.n:
        raise ParameterError("realization and parameters differ in dimension")
    user = np.array([(a + b) / 2 for a, b in g.window]) if user is None else np.asarray(user, dtype=float)
    if not g.contains(user):
        raise ParameterError("user must lie inside the window")
    mass, offsets = _room_table(g, params, user)
    home = np.all(offsets == 0, axis=1)
    lam0 = float(mass[home].sum())
    if lam0 == 0:
        raise DomainError("the user's room carries no BS intensity; delta = 0 is impossible")
    if s == 0:
        return 1.0
    inroom = (1 + s) * (math.exp(-lam0 * s / (1 + s)) - math.exp(-lam0)) / -math.expm1(-lam0)
    w = np.prod(np.power(np.asarray(params.k), np.abs(offsets[~home])), axis=1)
    return float(inroom * math.exp(-np.sum(mass[~home] * s * w / (1 + s * w))))


# --------------------------------------------------------------------------- free space


@dataclass(frozen=True)
class FreeSpaceParams:
    density: float
    alpha: float = 4.0

    def __post_init__(self):
        if not self.density > 0:
            raise ParameterError("density must be positive")
        if not self.alpha > 3:
            raise ParameterError("alpha must exceed 3 in three dimensions")


def interference_shape(theta: float, alpha: float) -> float:
    """``int_1^inf t**2 / (1 + t**alpha/theta) dt``."""
    val, err = integrate.quad(lambda t: t * t / (1 + t**alpha / theta), 1, math.inf, epsabs=1e-13, epsrel=1e-12)
    if not math.isfinite(val) or err > 1e-8 * max(val, 1e-300) + 1e-13:
        raise QuadratureError("interference shape integral did not converge")
    return val


def freespace_coverage(theta: float, fs: FreeSpaceParams) -> float:
    """SIR coverage of the nearest BS in a 3-D PPP with Rayleigh fading.

    Integrates the nearest-distance density against the Laplace transform of
    the interference beyond the serving distance.
    """
    if not theta > 0:
        raise DomainError("theta must be positive")
    shape = interference_shape(theta, fs.alpha)
    lam = fs.density
    c = 4.0 / 3.0 * math.pi * lam

    def integrand(r):
        return 4 * math.pi * lam * r * r * math.exp(-c * r**3 * (1 + 3 * shape))

    scale = (1 / c) ** (1 / 3)
    val, err = integrate.quad(integrand, 0, math.inf, epsabs=1e-13, epsrel=1e-11, points=None)
    if err > 1e-9:
        val2, err2 = integrate.quad(integrand, 0, 20 * scale, epsabs=1e-13, epsrel=1e-11, limit=200)
        val, err = val2, err2
    if err > 1e-9:
        raise QuadratureError("free-space coverage integral did not converge")
    return float(val)
