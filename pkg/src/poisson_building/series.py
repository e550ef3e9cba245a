"""Truncation control and lattice enumeration for the infinite sums and products.

Every lattice sum in the package runs over ``Z**m`` with terms bounded by a
geometric weight ``prod_q K_q**|i_q|``.  Sums are truncated on l1 shells
``|i|_1 <= radius``; the omitted weight is known in closed form, which gives a
certified bound on the truncation error.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NonConvergenceError, ParameterError


@dataclass(frozen=True)
class SeriesControl:
    radius: int = 16
    tol: float = 1e-10
    max_radius: int = 512

    def __post_init__(self):
        if self.radius < 1 or self.max_radius < self.radius:
            raise ParameterError("need 1 <= radius <= max_radius")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")

    def radii(self):
        m = self.radius
        while m < self.max_radius:
            yield m
            m *= 2
        yield self.max_radius


@dataclass(frozen=True)
class Truncated:
    """A truncated evaluation together with a bound on its absolute error."""

    value: float
    bound: float
    radius: int


def certify(evaluate: Callable[[int], Truncated], ctrl: SeriesControl, what: str = "series") -> Truncated:
    """Grow the truncation radius until the error bound drops below ``ctrl.tol``."""
    last = None
    for m in ctrl.radii():
        last = evaluate(m)
        if last.bound < ctrl.tol:
            return last
    raise NonConvergenceError(
        f"{what}: error bound {last.bound:.3g} exceeds tol {ctrl.tol:.3g} at radius {last.radius}",
        radius=last.radius, bound=last.bound,
    )


def rotated(seq: Sequence, k: int) -> tuple:
    """``(seq_{(i+k) % n})_{i=0..n-1}`` with the modulo taking values in ``1..n`` (1-based ``k``)."""
    n = len(seq)
    if not 1 <= k <= n:
        raise ParameterError(f"rotation index must lie in 1..{n}")
    return tuple(seq[(i + k - 1) % n] for i in range(n))


def leak_sum(k: float) -> float:
    """``sum_{i in Z} K**|i|``."""
    return (1 + k) / (1 - k)


@functools.lru_cache(maxsize=256)
def abs_lattice(ks: tuple[float, ...], radius: int):
    """Absolute index tuples with ``sum <= radius``, grouped over sign patterns.

    Returns ``(weights, multiplicity, l1)`` for ``prod K_q**a_q``.  Axes with
    ``K_q = 0`` only keep ``a_q = 0``: every other index has zero weight.
    """
    m = len(ks)
    if m == 0:
        return np.ones(1), np.ones(1), np.zeros(1, dtype=np.int64)
    ranges = [range(radius + 1) if k > 0 else range(1) for k in ks]
    tuples = [t for t in itertools.product(*ranges) if sum(t) <= radius]
    a = np.array(tuples, dtype=np.int64).reshape(-1, m)
    kk = np.asarray(ks, dtype=float)
    weights = np.prod(np.power(kk, a), axis=1)
    mult = np.prod(np.where(a == 0, 1.0, 2.0), axis=1)
    return weights, mult, a.sum(axis=1)


@functools.lru_cache(maxsize=256)
def signed_lattice(ks: tuple[float, ...], offset: tuple[int, ...], radius: int):
    """Signed index tuples within l1 distance ``radius`` of the origin or of ``offset``.

    Returns ``(w0, w1)``: weights ``prod K**|i|`` and ``prod K**|i - offset|``.
    """
    m = len(ks)
    if m == 0:
        return np.ones(1), np.ones(1)
    off = np.asarray(offset, dtype=np.int64)
    lo = np.minimum(0, off) - radius
    hi = np.maximum(0, off) + radius
    grids = np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo, hi)], indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    d0 = np.abs(idx).sum(axis=1)
    d1 = np.abs(idx - off).sum(axis=1)
    idx = idx[np.minimum(d0, d1) <= radius]
    kk = np.asarray(ks, dtype=float)
    w0 = np.prod(np.power(kk, np.abs(idx)), axis=1)
    w1 = np.prod(np.power(kk, np.abs(idx - off)), axis=1)
    return w0, w1


def total_weight(ks: Sequence[float]) -> float:
    return math.prod(leak_sum(k) for k in ks)
