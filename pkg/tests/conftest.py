"""Shared independent oracles and hypothesis settings."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.integrate import solve_ivp

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def slab_moments(params, perspective: str, radius: int = 200):
    """Mean and variance of the no-fading interference by brute-force summation.

    Conditional on the slab widths the per-cell counts are independent Poisson,
    so ``Var = E[Var | widths] + Var[E | widths]``.  Room widths are Exp(mu) for
    every slab.  For the user the zero cell is two Exp(mu) pieces, so every
    wall count ``a >= 0`` appears on both sides with width Exp(mu).
    """
    n = params.n
    share = 2 ** (n - 1)
    mean = 0.0
    var = 0.0
    for k in range(n):
        lam, mu, kk = params.lam[k], params.mu[k], params.k[k]
        if perspective == "room":
            t = np.arange(-radius, radius + 1)
            edge = kk ** np.abs(t) if kk > 0 else (t == 0).astype(float)
        else:
            a = np.arange(radius + 1)
            edge = np.concatenate([kk**a, kk**a]) if kk > 0 else np.array([1.0, 1.0])
        j = np.arange(-radius, radius + 1)
        tr1 = 1.0
        tr2 = 1.0
        for q in range(n):
            if q == k:
                continue
            w = params.k[q] ** np.abs(j) if params.k[q] > 0 else (j == 0).astype(float)
            tr1 *= w.sum()
            tr2 *= (w * w).sum()
        mean += share * lam / mu * edge.sum() * tr1
        var += share * lam / mu * (edge**2).sum() * tr2
        var += (share * lam / mu) ** 2 * (edge**2).sum() * tr1**2
    return mean, var


def slab_covariance(params, room, radius: int = 200) -> float:
    """``Cov[I_0, I_room]`` (typical room, no fading) by brute-force summation."""
    n = params.n
    share = 2 ** (n - 1)
    t = np.arange(-radius - max(map(abs, room)), radius + max(map(abs, room)) + 1)

    def weights(q, off):
        kk = params.k[q]
        return kk ** np.abs(t - off) if kk > 0 else (t == off).astype(float)

    cov = 0.0
    for k in range(n):
        lam, mu = params.lam[k], params.mu[k]
        e0, e1 = weights(k, 0), weights(k, room[k])
        poisson = share * lam / mu * (e0 * e1).sum()
        widths = (share * lam / mu) ** 2 * (e0 * e1).sum()
        for q in range(n):
            if q == k:
                continue
            w0, w1 = weights(q, 0), weights(q, room[q])
            poisson *= (w0 * w1).sum()
            widths *= w0.sum() * w1.sum()
        cov += poisson + widths
    return cov


def chained_convolution(d: float, s) -> float:
    """``(n-1)!/d**(n-1) * (e^{-s_1 t} * ... * e^{-s_n t})(d)`` by integrating the chain ODE.

    The chain is integrated with every rate shifted by ``-max(s)`` so the
    solution does not decay and the absolute tolerance stays negligible; the
    shift comes back as ``exp(-max(s) d)``.
    """
    s = np.asarray(s, dtype=float)
    n = s.size
    top = float(s.max())

    def rhs(_, y):
        dy = (top - s) * y
        dy[1:] += y[:-1]
        return dy

    y0 = np.zeros(n)
    y0[0] = 1.0
    sol = solve_ivp(rhs, (0.0, d), y0, method="DOP853", rtol=1e-13, atol=1e-18)
    fact = float(np.prod(np.arange(1, n)))
    return float(sol.y[-1, -1] * fact / d ** (n - 1) * np.exp(-top * d))


def lattice(radius: int, dim: int):
    return itertools.product(range(-radius, radius + 1), repeat=dim)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record ``(number, part, ok, detail)`` for the acceptance summary."""
    table = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number: int, part: str, ok: bool, detail: str = "") -> bool:
        table.setdefault(number, []).append((part, bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_ACCEPTANCE, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        parts = table[number]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}")
        for part, ok, detail in parts:
            terminalreporter.write_line(f"    [{'pass' if ok else 'fail'}] {part}: {detail}")
