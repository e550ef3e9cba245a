"""Acceptance suite: one test per criterion, summarised as PASS/FAIL lines at the end of the run.

Run with ``pytest tests/test_acceptance.py -v``; the "acceptance criteria"
section of the terminal summary holds one verdict per criterion.
"""

import itertools
import math

import numpy as np
import pytest

from conftest import chained_convolution
from poisson_building import moments
from poisson_building import montecarlo as mc
from poisson_building.finite import (BuildingExtents, WindowModel, finite_building_laplace, interval_laplace,
                                     semi_infinite_laplace, window_success)
from poisson_building.grid import GridParams
from poisson_building.laplace import laplace_room, laplace_user
from poisson_building.links import (FreeSpaceParams, LinkQuery, coverage_nearest, coverage_strongest,
                                    freespace_coverage, success_d2d)
from poisson_building.series import SeriesControl

pytestmark = pytest.mark.slow

K_M5DB = 10 ** -0.5
K_M10DB = 0.1
K_M20DB = 0.01


def _fmt(values):
    return "[" + ", ".join(f"{v:.4g}" for v in values) + "]"


def test_criterion_01_moment_oracle(criterion):
    worst = {"mean": 0.0, "variance": 0.0}
    failures = []
    grid = list(itertools.product((2, 3), (0.0, 0.1, 0.316), (0.05, 0.1)))
    for i, (n, k, r) in enumerate(grid):
        p = GridParams.uniform(n, r, k)
        for perspective in ("room", "user"):
            s = mc.sim_interference(p, mc.SimConfig(samples=100_000, seed=1000 + i), perspective=perspective)
            exact_mean = moments.mean_room(p) if perspective == "room" else moments.mean_user(p)
            exact_var = moments.variance_room(p) if perspective == "room" else moments.variance_user(p)
            for name, est, exact in (("mean", s.mean(), exact_mean), ("variance", s.variance(), exact_var)):
                z = abs(est.point - exact) / est.stderr
                worst[name] = max(worst[name], z)
                if z > 3:
                    failures.append((n, k, r, perspective, name, z))
    ok = criterion(1, "MC mean and variance within 3 se on 12 points x 2 perspectives", not failures,
                   f"max |z| mean {worst['mean']:.2f}, variance {worst['variance']:.2f}; failures {failures}")
    assert ok


def test_criterion_02_exact_identities(criterion):
    params = [GridParams.uniform(n, r, k) for n, k, r in itertools.product((2, 3), (0.0, 0.1, 0.316), (0.05, 0.1))]
    params.append(GridParams(mu=(1, 2, 0.5), lam=(0.1, 0.3, 0.2), k=(0.2, 0.0, 0.4)))
    joint = max(abs(moments.joint_moment_room(p, (0,) * p.n) / (moments.variance_room(p) + moments.mean_room(p) ** 2)
                    - 1) for p in params)
    ok1 = criterion(2, "joint moment at 0 equals var + mean^2", joint <= 1e-12, f"max rel err {joint:.2e}")

    scale = 0.0
    for p, c in itertools.product(params, (0.5, 2.0)):
        q = p.scaled(c)
        for fn in (moments.mean_room, moments.variance_room, moments.mean_user, moments.variance_user):
            scale = max(scale, abs(fn(q) - fn(p)) / fn(p))
        for fn in (laplace_room, laplace_user):
            scale = max(scale, abs(fn(0.7, q) - fn(0.7, p)) / fn(0.7, p))
    ok2 = criterion(2, "scale invariance c in {0.5, 2}", scale <= 1e-13, f"max rel change {scale:.2e}")

    lemma = 0.0
    i = np.arange(-200, 201)
    # Losses where the |i| <= 200 tail is below double precision (0.9**200 would not be).
    for k, shift in itertools.product((0.0, 0.1, 0.316, 0.5), (0, 1, 2, 5, 10)):
        w0 = k ** np.abs(i) if k > 0 else (i == 0).astype(float)
        w1 = k ** np.abs(i - shift) if k > 0 else (i == shift).astype(float)
        b1 = float(np.sum(w0 * w1))
        b2 = float(w0.sum() * w1.sum() - b1)
        s1, s2 = moments.geom_sums(k, shift)
        for got, ref in ((s1, b1), (s2, b2)):
            lemma = max(lemma, abs(got - ref) / ref if ref else abs(got))
    ok3 = criterion(2, "geometric lattice sums vs |i| <= 200 partial sums", lemma <= 1e-12, f"max rel err {lemma:.2e}")
    assert ok1 and ok2 and ok3


def test_criterion_03_laplace_validation(criterion):
    s_grid = (0.1, 1.0, 10.0)
    worst, failures = 0.0, []
    for n in (2, 3):
        p = GridParams.uniform(n, 0.05, 0.1)
        for perspective, channel in itertools.product(("room", "user"), ("none", "rayleigh")):
            seed = 3000 + 10 * n + 2 * (perspective == "user") + (channel == "rayleigh")
            samples = mc.sim_interference(p, mc.SimConfig(samples=1_000_000, seed=seed), channel, perspective)
            fn = laplace_room if perspective == "room" else laplace_user
            for s in s_grid:
                est = samples.laplace(s)
                z = abs(est.point - fn(s, p, SeriesControl(), channel)) / est.stderr
                worst = max(worst, z)
                if z > 3:
                    failures.append((n, perspective, channel, s, z))
    ok1 = criterion(3, "analytic transforms vs 1e6-sample MC within 3 se", not failures,
                    f"max |z| {worst:.2f} over 24 checks; failures {failures}")

    ctrl = SeriesControl(tol=1e-12)
    h = 1e-4
    slope_err = 0.0
    for n, k, r in itertools.product((2, 3), (0.0, 0.1, 0.316), (0.05, 0.1)):
        p = GridParams.uniform(n, r, k)
        for fn, mean in ((laplace_room, moments.mean_room(p)), (laplace_user, moments.mean_user(p))):
            slope = -(-3 + 4 * fn(h, p, ctrl, "none") - fn(2 * h, p, ctrl, "none")) / (2 * h)
            slope_err = max(slope_err, abs(slope / mean - 1))
    ok2 = criterion(3, "-dL/ds at 0 matches the mean", slope_err <= 1e-3, f"max rel err {slope_err:.2e}")

    tol = 1e-10
    moved = 0.0
    for n, k in itertools.product((2, 3), (0.1, 0.316)):
        p = GridParams.uniform(n, 0.1, k)
        for fn, s in itertools.product((laplace_room, laplace_user), s_grid):
            a = fn(s, p, SeriesControl(radius=16, tol=tol))
            b = fn(s, p, SeriesControl(radius=32, tol=tol))
            moved = max(moved, abs(a - b))
    ok3 = criterion(3, "doubling the truncation radius moves results by < tol", moved < tol,
                    f"max move {moved:.2e} at tol {tol:g}")
    assert ok1 and ok2 and ok3


def test_criterion_04_empty_room_limit(criterion):
    p = GridParams.uniform(3, 0.1, 0.0)
    limit = 1.4**-3
    values = [success_d2d(LinkQuery(th), p) for th in (1e3, 1e4, 1e6)]
    ok1 = criterion(4, "analytic success tends to 1/1.4^3 = 0.36443", all(abs(v - limit) < 1e-3 for v in values),
                    f"values at theta 1e3, 1e4, 1e6: {_fmt(values)}")
    q = LinkQuery(1e3)
    est = mc.sim_success_d2d(p, mc.SimConfig(samples=100_000, seed=4000), q)
    ok2 = criterion(4, "MC at 30 dB brackets the limit", est.within(limit, 3) and est.within(success_d2d(q, p), 3),
                    f"MC {est.point:.5f} +- {est.stderr:.5f}")
    assert ok1 and ok2


def test_criterion_05_coverage(criterion):
    p = GridParams.uniform(3, 0.1, 0.1)
    thetas = [0.5, 2.0, 4.0, 8.0]
    ests = mc.sim_coverage(p, mc.SimConfig(samples=100_000, seed=5000), thetas)
    analytic = [coverage_strongest(th, p).value for th in thetas]
    gaps = [abs(a - e.point) for a, e in zip(analytic[1:], ests[1:])]
    ok1 = criterion(5, "strongest series within 0.02 of MC at theta 2, 4, 8", max(gaps) < 0.02,
                    f"analytic {_fmt(analytic[1:])}, MC {_fmt([e.point for e in ests[1:]])}")
    ok2 = criterion(5, "strongest series is an upper bound at theta 0.5",
                    analytic[0] >= ests[0].point - 3 * ests[0].stderr,
                    f"analytic {analytic[0]:.4f} vs MC {ests[0].point:.4f} +- {ests[0].stderr:.4f}")
    ok3 = True
    thetas = [0.5, 1.0, 2.0, 4.0, 8.0]
    for j, r in enumerate((0.1, 1.0)):
        q = GridParams.uniform(3, r, 0.1)
        ests = mc.sim_coverage(q, mc.SimConfig(samples=100_000, seed=5001 + j), thetas, assoc="nearest")
        analytic = [coverage_nearest(th, q).value for th in thetas]
        worst = max(abs(a - e.point) for a, e in zip(analytic, ests))
        ok3 &= criterion(5, f"nearest formula within 0.05 of MC, r = {r}", worst < 0.05,
                         f"max gap {worst:.4f}; analytic {_fmt(analytic)}")
    assert ok1 and ok2 and ok3


def test_criterion_06_feller(criterion):
    p = GridParams.uniform(3, 0.1, 0.3)
    room = mc.sim_interference(p, mc.SimConfig(samples=100_000, seed=6000), perspective="room").mean()
    user = mc.sim_interference(p, mc.SimConfig(samples=100_000, seed=6001), perspective="user").mean()
    sep = (user.point - room.point) / math.hypot(user.stderr, room.stderr)
    ok = criterion(6, "user mean exceeds room mean by > 3 se", moments.mean_user(p) > moments.mean_room(p) and sep > 3,
                   f"MC user {user.point:.3f}, room {room.point:.3f}, separation {sep:.1f} se")
    assert ok


def test_criterion_07_correlation_structure(criterion):
    p0 = GridParams.uniform(3, 0.1, 0.0)
    axial = [moments.corr_coeff(p0, (0, 0, d)) for d in range(11)]
    ok1 = criterion(7, "rho(0,0,d) > 0 at K = 0 for d <= 10", min(axial) > 0, f"min {min(axial):.3e}")
    diag = moments.corr_coeff(p0, (10, 10, 10))
    ok2 = criterion(7, "rho(10,10,10) < 0.01 at K = 0", diag < 0.01, f"{diag:.3e}")
    ks = [0.316, 0.1, 0.01, 0.0]
    a = [moments.corr_coeff(GridParams.uniform(3, 0.1, k), (0, 0, 1)) for k in ks]
    b = [moments.corr_coeff(GridParams.uniform(3, 0.1, k), (1, 1, 1)) for k in ks]
    ok3 = criterion(7, "both curves at d = 1 decrease as K drops to 0",
                    bool(np.all(np.diff(a) < 0) and np.all(np.diff(b) < 0)),
                    f"rho(0,0,1) {_fmt(a)}, rho(1,1,1) {_fmt(b)} for K {ks}")
    assert ok1 and ok2 and ok3


def test_criterion_08_variance_ratio(criterion):
    err_ratio, err_closed = 0.0, 0.0
    for k1, r1, k23 in itertools.product((0.0, 0.1, 0.316, 0.6), (0.05, 0.1, 0.5), ((0.0, 0.0), (0.2, 0.4))):
        p = GridParams(mu=(1.0, 1.0, 1.0), lam=(r1, 0.0, 0.0), k=(k1, *k23))
        ratio = moments.variance_ratio_3d(p)
        err_ratio = max(err_ratio, abs(ratio / (moments.var_user_corr_3d(p) / moments.var_user_uncorr_3d(p)) - 1))
        if k23 == (0.0, 0.0):
            err_closed = max(err_closed, abs(ratio / (2 / (1 + k1) * (1 + 4 * r1)) - 1))
    ok1 = criterion(8, "closed-form ratio equals var_corr / var_uncorr", err_ratio <= 1e-9, f"max rel err {err_ratio:.2e}")
    ok2 = criterion(8, "ratio equals 2(1 + 4 r1)/(1 + K1) when K2 = K3 = 0", err_closed <= 1e-9,
                    f"max rel err {err_closed:.2e}")
    assert ok1 and ok2


def test_criterion_09_finite_reductions(criterion):
    ctrl = SeriesControl(tol=1e-10)
    worst = 0.0
    for k, s in itertools.product((0.1, 0.3), (0.1, 1.0, 10.0)):
        p = GridParams(mu=(1.0,) * 3, lam=(0.1,) * 3, k=(k,) * 3)
        worst = max(worst, abs(finite_building_laplace(s, p, BuildingExtents.unbounded(), ctrl=ctrl)
                               - laplace_user(s, p, ctrl)))
    ok1 = criterion(9, "unbounded building equals the typical-user transform", worst < 2 * ctrl.tol,
                    f"max diff {worst:.2e}")

    zs = []
    for j, k in enumerate((0.1, 0.3)):
        p = GridParams(mu=(1.0,) * 3, lam=(0.1,) * 3, k=(k,) * 3)
        samples = mc.sim_finite_building(p, mc.SimConfig(samples=100_000, seed=9000 + j), BuildingExtents.half(3.0))
        for s in (0.1, 1.0, 10.0):
            est = samples.laplace(s)
            zs.append(abs(est.point - semi_infinite_laplace(s, p, 3.0)) / est.stderr)
    ok2 = criterion(9, "semi-infinite building at d = 3 within 3 se of MC", max(zs) <= 3, f"|z| {_fmt(zs)}")

    rng = np.random.default_rng(9100)
    err = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 6))
        s = rng.uniform(0, 5, n)
        d = float(rng.uniform(0.1, 5))
        ref = chained_convolution(d, s)
        err = max(err, abs(interval_laplace(d, n, s) / ref - 1))
    ok3 = criterion(9, "interval transform vs direct convolution on random n <= 5", err <= 1e-9,
                    f"max rel err {err:.2e}")
    assert ok1 and ok2 and ok3


def _window_curves(thetas):
    leaky = WindowModel.geometric(0.5, 10 ** (-3 / 10))
    out = {}
    for k in (0.0, K_M20DB, K_M10DB):
        p = GridParams(mu=(1.0,) * 3, lam=(0.1,) * 3, k=(k, k, 0.0))
        out[k] = np.array([window_success(th, p, (0, 0, 0), 0.0, leaky) for th in thetas])
    return out


def test_criterion_10_reference_above_leaky(criterion):
    leaky = WindowModel.geometric(0.5, 10 ** (-3 / 10))
    sealed = WindowModel.geometric(0.5, 0.0)
    ref = window_success(1.0, GridParams(mu=(1.0,) * 3, lam=(0.1,) * 3, k=(K_M5DB, K_M5DB, 0.0)), (0, 0, 0), 0.0,
                         sealed)
    low = window_success(1.0, GridParams(mu=(1.0,) * 3, lam=(0.1,) * 3, k=(K_M20DB, K_M20DB, 0.0)), (0, 0, 0), 0.0,
                         leaky)
    ok = criterion(10, "l_w = 0 reference (K = -5 dB) above leaky K = -20 dB at theta = 1", ref > low,
                   f"{ref:.4f} > {low:.4f}")
    assert ok


@pytest.mark.xfail(strict=True, reason="the K = 0 and K = -10 dB window curves differ by up to 0.066, "
                                       "confirmed by Monte Carlo; see the decisions ledger")
def test_criterion_10_leakage_dominance(criterion):
    thetas = 10 ** (np.linspace(-10, 20, 31) / 10)
    curves = _window_curves(thetas)
    gaps = {f"{a:g} vs {b:g}": float(np.max(np.abs(curves[a] - curves[b])))
            for a, b in itertools.combinations(curves, 2)}
    ok = criterion(10, "K in {0, 0.01, 0.1} curves pairwise within 0.03 on -10..20 dB",
                   max(gaps.values()) <= 0.03, "max gaps " + ", ".join(f"{k}: {v:.4f}" for k, v in gaps.items()))
    assert ok


def test_criterion_11_density_separation(criterion):
    ok = True
    for alpha in (3.5, 4.0):
        values = [freespace_coverage(1.0, FreeSpaceParams(lam, alpha)) for lam in (0.1, 0.4, 1.2)]
        spread = max(values) - min(values)
        ests = [mc.sim_freespace(FreeSpaceParams(lam, alpha), mc.SimConfig(samples=20_000, seed=11000 + i), 1.0)
                for i, lam in enumerate((0.1, 0.4, 1.2))]
        zs = [abs(e.point - values[0]) / e.stderr for e in ests]
        ok &= criterion(11, f"free space flat in density, alpha = {alpha}", spread < 1e-8 and max(zs) <= 3,
                        f"analytic {_fmt(values)}, spread {spread:.1e}, MC |z| {_fmt(zs)}")
    for kdb in (-10, -20):
        k = 10 ** (kdb / 10)
        for db in (-5.0, 0.0, 5.0):
            th = 10 ** (db / 10)
            ps = [GridParams(mu=(1.0,) * 3, lam=(lam / 12,) * 3, k=(k,) * 3) for lam in (0.1, 0.4, 1.2)]
            analytic = [coverage_nearest(th, p).value for p in ps]
            ests = [mc.sim_coverage(p, mc.SimConfig(samples=100_000, seed=11100 + 10 * i + int(db) + kdb), [th],
                                    assoc="nearest")[0] for i, p in enumerate(ps)]
            seps = [(a.point - b.point) / math.hypot(a.stderr, b.stderr) for a, b in zip(ests, ests[1:])]
            ok &= criterion(11, f"building coverage decreasing in density, K = {kdb} dB, theta = {db:g} dB",
                            bool(np.all(np.diff(analytic) < 0)) and min(seps) > 3,
                            f"analytic {_fmt(analytic)}, MC {_fmt([e.point for e in ests])}, "
                            f"separations {_fmt(seps)} se")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
