"""Laplace transforms of the interference in the typical room and at the typical user.

Each transform is a product over edge axes ``k`` of a factor that only involves
``r_k`` and the loss vector rotated so that ``K_k`` comes first.  A factor is
an infinite product over the slabs along the edge axis of
``(1 + 2**(n-1) r_k S)**(-1)`` with ``S`` a lattice sum over the transverse
room indices.  Logs are accumulated shell by shell.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ParameterError
from .grid import ChannelModel, GridParams
from .series import (SeriesControl, Truncated, abs_lattice, certify, leak_sum, rotated, signed_lattice,
                     total_weight)


class Perspective(enum.Enum):
    TYPICAL_ROOM = "room"
    TYPICAL_USER = "user"


@dataclass(frozen=True)
class LaplaceQuery:
    s: float
    channel: ChannelModel = ChannelModel.RAYLEIGH
    perspective: Perspective = Perspective.TYPICAL_ROOM
    room: tuple[int, ...] | None = None
    s2: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "channel", ChannelModel.parse(self.channel))
        if not isinstance(self.perspective, Perspective):
            object.__setattr__(self, "perspective", Perspective(self.perspective))
        if not self.s >= 0 or (self.s2 is not None and not self.s2 >= 0):
            raise DomainError("Laplace arguments must be non-negative")


def kernel(channel: ChannelModel):
    """``1 - E[exp(-x h)]`` for the fading law of ``h``."""
    if channel is ChannelModel.NO_FADING:
        return lambda x: -np.expm1(-x)
    return lambda x: x / (1.0 + x)


def outer_multiplicity(perspective: Perspective, radius: int, k_edge: float) -> np.ndarray:
    """Multiplicity of the slab at ``a`` walls from the receiver, ``a = 0..radius``.

    Typical room: slab 0 once, every other distance on both sides.  Typical
    user: the zero cell is cut into two exponential halves, so every distance
    appears twice (the squared products).
    """
    top = radius if k_edge > 0 else 0
    mult = np.full(top + 1, 2.0)
    if perspective is Perspective.TYPICAL_ROOM:
        mult[0] = 1.0
    return mult


def axis_log_factor(s: float, x: float, k_edge: float, k_other: Sequence[float], radius: int,
                    channel: ChannelModel, perspective: Perspective, share: int) -> tuple[float, float]:
    """Log of one edge-axis factor and a bound on the omitted log-mass."""
    if x == 0 or s == 0:
        return 0.0, 0.0
    phi = kernel(channel)
    w, mult, _ = abs_lattice(tuple(float(k) for k in k_other), radius)
    out_mult = outer_multiplicity(perspective, radius, k_edge)
    a = np.arange(out_mult.size)
    scale = s * np.power(k_edge, a)
    inner = (phi(scale[:, None] * w[None, :]) * mult[None, :]).sum(axis=1)
    log_val = -float(np.sum(out_mult * np.log1p(share * x * inner)))
    total = total_weight(k_other)
    tail_inner = max(total - float(np.dot(w, mult)), 0.0)
    c = share * x
    bound = c * s * tail_inner * 2 * leak_sum(k_edge)
    if k_edge > 0:
        bound += 2 * c * s * total * k_edge ** (radius + 1) / (1 - k_edge)
    return log_val, bound


def _check(params: GridParams, s: float):
    if not s >= 0:
        raise DomainError("Laplace argument must be non-negative")


def _product(s, params, ctrl, channel, perspective) -> Truncated:
    def evaluate(m):
        log_total = 0.0
        bound = 0.0
        for k in range(1, params.n + 1):
            ks = rotated(params.k, k)
            lv, b = axis_log_factor(s, params.ratios[k - 1], ks[0], ks[1:], m, channel, perspective,
                                    params.edge_share)
            log_total += lv
            bound += b
        value = math.exp(log_total)
        return Truncated(value, value * -math.expm1(-bound), m)

    return certify(evaluate, ctrl, f"{perspective.value} Laplace transform")


def laplace_room(q: LaplaceQuery | float, params: GridParams, ctrl: SeriesControl = SeriesControl(),
                 channel: ChannelModel | str | None = None) -> float:
    """Laplace transform of the typical-room interference (no fading or Rayleigh)."""
    q = _as_query(q, channel, Perspective.TYPICAL_ROOM)
    if q.perspective is not Perspective.TYPICAL_ROOM:
        raise ParameterError("laplace_room needs the typical-room perspective")
    _check(params, q.s)
    if q.s == 0:
        return 1.0
    return _product(q.s, params, ctrl, q.channel, Perspective.TYPICAL_ROOM).value


def laplace_user(q: LaplaceQuery | float, params: GridParams, ctrl: SeriesControl = SeriesControl(),
                 channel: ChannelModel | str | None = None) -> float:
    """Laplace transform of the interference seen by the typical user."""
    q = _as_query(q, channel, Perspective.TYPICAL_USER)
    if q.perspective is not Perspective.TYPICAL_USER:
        raise ParameterError("laplace_user needs the typical-user perspective")
    _check(params, q.s)
    if q.s == 0:
        return 1.0
    return _product(q.s, params, ctrl, q.channel, Perspective.TYPICAL_USER).value


def laplace_truncated(s: float, params: GridParams, ctrl: SeriesControl, channel, perspective) -> Truncated:
    """Same as :func:`laplace_room`/:func:`laplace_user` but returns the error bound too."""
    if s == 0:
        return Truncated(1.0, 0.0, 0)
    return _product(s, params, ctrl, ChannelModel.parse(channel), Perspective(perspective))


def _as_query(q, channel, perspective) -> LaplaceQuery:
    if isinstance(q, LaplaceQuery):
        return q
    return LaplaceQuery(s=float(q), channel=ChannelModel.parse(channel or ChannelModel.RAYLEIGH),
                        perspective=perspective)


def joint_laplace_room(s1: float, s2: float, params: GridParams, room: Sequence[int],
                       ctrl: SeriesControl = SeriesControl()) -> float:
    """Joint transform ``E[exp(-s1 I_0 - s2 I_room)]`` under Rayleigh fading.

    Fades towards the two rooms are independent, so each BS contributes
    ``1 - 1/(1+s1 w0) * 1/(1+s2 w1)``.
    """
    if not (s1 >= 0 and s2 >= 0):
        raise DomainError("Laplace arguments must be non-negative")
    room = tuple(int(v) for v in room)
    if len(room) != params.n:
        raise ParameterError(f"room index must have {params.n} entries")
    if s1 == 0 and s2 == 0:
        return 1.0
    share = params.edge_share

    def evaluate(m):
        log_total = 0.0
        bound = 0.0
        for k in range(1, params.n + 1):
            x = params.ratios[k - 1]
            if x == 0:
                continue
            ks = rotated(params.k, k)
            ls = rotated(room, k)
            k1, l1 = ks[0], ls[0]
            w0, w1 = signed_lattice(tuple(ks[1:]), tuple(ls[1:]), m)
            if k1 > 0:
                outer = np.arange(min(0, l1) - m, max(0, l1) + m + 1)
            else:
                outer = np.array(sorted({0, l1}))
            e0 = np.power(k1, np.abs(outer))
            e1 = np.power(k1, np.abs(outer - l1))
            f0 = 1.0 / (1.0 + s1 * e0[:, None] * w0[None, :])
            f1 = 1.0 / (1.0 + s2 * e1[:, None] * w1[None, :])
            inner = (1.0 - f0 * f1).sum(axis=1)
            log_total -= float(np.sum(np.log1p(share * x * inner)))
            total = total_weight(ks[1:])
            t0 = max(total - w0.sum(), 0.0)
            t1 = max(total - w1.sum(), 0.0)
            c = share * x
            lk = leak_sum(k1)
            bound += c * (s1 * t0 + s2 * t1) * lk
            om0 = max(lk - e0.sum(), 0.0)
            om1 = max(lk - e1.sum(), 0.0)
            bound += c * total * (s1 * om0 + s2 * om1)
        value = math.exp(log_total)
        return Truncated(value, value * -math.expm1(-bound), m)

    return certify(evaluate, ctrl, "joint Laplace transform").value
