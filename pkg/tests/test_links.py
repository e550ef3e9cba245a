import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from poisson_building import montecarlo as mc
from poisson_building.errors import DomainError, ParameterError
from poisson_building.grid import GridParams, GridRealization, sample_realization
from poisson_building.laplace import joint_laplace_room, laplace_room
from poisson_building.links import (FreeSpaceParams, LinkQuery, conditional_laplace_delta0, coverage_nearest,
                                    coverage_strongest, freespace_coverage, interference_shape,
                                    joint_success_d2d, joint_success_same_room, success_d2d)

P03 = GridParams.uniform(3, 0.1, 0.3)
P01 = GridParams.uniform(3, 0.1, 0.1)


class TestSuccess:
    def test_small_threshold(self):
        assert success_d2d(LinkQuery(1e-9), P03) == pytest.approx(1.0, abs=1e-7)

    def test_empty_room_limit(self):
        p = GridParams.uniform(3, 0.1, 0.0)
        assert success_d2d(LinkQuery(1e9), p) == pytest.approx(1.4**-3, abs=1e-6)

    def test_monte_carlo(self):
        q = LinkQuery(1.0)
        est = mc.sim_success_d2d(P03, mc.SimConfig(samples=100_000, seed=21), q)
        assert est.within(success_d2d(q, P03), 3)

    def test_cross_room_link(self):
        q = LinkQuery(0.5, room=(1, 0, 0))
        assert success_d2d(q, P03) == pytest.approx(laplace_room(0.5 / 0.3, P03), rel=1e-14)
        assert success_d2d(LinkQuery(0.5, room=(1, 0, 0)), GridParams.uniform(3, 0.1, 0.0)) == 0.0

    def test_nu_theta_product(self):
        a = success_d2d(LinkQuery(0.8, nu=2.5), P03)
        b = success_d2d(LinkQuery(2.0, nu=1.0), P03)
        assert a == b

    def test_invalid(self):
        with pytest.raises(ParameterError):
            LinkQuery(-1.0)


class TestJointSuccess:
    def test_zero_second_threshold(self):
        room = (1, 1, 1)
        cross = 0.3**3
        expected = success_d2d(LinkQuery(0.7), P03) / (1 + 0.7 * cross)
        assert joint_success_d2d(0.7, 0.0, 1.0, P03, room) == pytest.approx(expected, rel=1e-12)

    def test_small_thresholds(self):
        assert joint_success_d2d(1e-9, 1e-9, 1.0, P03, (1, 0, 0)) == pytest.approx(1.0, abs=1e-7)

    def test_same_room_rejected(self):
        with pytest.raises(ParameterError):
            joint_success_d2d(1.0, 1.0, 1.0, P03, (0, 0, 0))

    def test_monte_carlo(self):
        est = mc.sim_joint_success_d2d(P03, mc.SimConfig(samples=100_000, seed=22), 1.0, 1.0, 1.0, (1, 1, 1))
        assert est.within(joint_success_d2d(1.0, 1.0, 1.0, P03, (1, 1, 1)), 3)

    def test_same_room_variant(self):
        p = GridParams.uniform(3, 0.1, 0.1)
        value = joint_success_same_room(0.5, 0.5, 1.0, p)
        assert value == pytest.approx(joint_laplace_room(0.5, 0.5, p, (0, 0, 0)) / 1.5**2, rel=1e-14)
        est = mc.sim_joint_success_d2d(p, mc.SimConfig(samples=100_000, seed=23), 0.5, 0.5, 1.0, (0, 0, 0))
        assert est.within(value, 3)


class TestStrongestCoverage:
    def test_large_threshold(self):
        assert coverage_strongest(1e6, P01).value < 1e-6

    def test_tags(self):
        assert coverage_strongest(2.0, P01).tag == "exact"
        assert coverage_strongest(0.5, P01).tag == "upper-bound"

    def test_never_above_one(self):
        assert coverage_strongest(0.05, P01).value <= 1.0

    def test_monte_carlo(self):
        thetas = [0.5, 2.0, 4.0]
        ests = mc.sim_coverage(P01, mc.SimConfig(samples=50_000, seed=24), thetas)
        assert coverage_strongest(0.5, P01).value >= ests[0].point - 3 * ests[0].stderr
        for th, est in zip(thetas[1:], ests[1:]):
            assert abs(coverage_strongest(th, P01).value - est.point) < 0.02

    def test_domain(self):
        with pytest.raises(DomainError):
            coverage_strongest(0.0, P01)


class TestNearestCoverage:
    def test_small_threshold(self):
        assert coverage_nearest(1e-9, P01).value == pytest.approx(1.0, abs=1e-6)

    def test_needs_equal_losses(self):
        with pytest.raises(ParameterError):
            coverage_nearest(1.0, GridParams(mu=(1, 1, 1), lam=(0.1,) * 3, k=(0.1, 0.2, 0.1)))

    @pytest.mark.parametrize("r", [0.1, 1.0])
    def test_monte_carlo(self, r):
        p = GridParams.uniform(3, r, 0.1)
        thetas = [0.5, 1.0, 2.0]
        ests = mc.sim_coverage(p, mc.SimConfig(samples=50_000, seed=25), thetas, assoc="nearest")
        for th, est in zip(thetas, ests):
            assert abs(coverage_nearest(th, p).value - est.point) < 0.05

    def test_strongest_dominates_nearest(self):
        thetas = [0.5, 1.0, 2.0, 4.0]
        ests = mc.sim_coverage(P01, mc.SimConfig(samples=50_000, seed=26), thetas, assoc="nearest")
        for th, est in zip(thetas, ests):
            assert coverage_strongest(th, P01).value >= est.point - 3 * est.stderr


class TestConditionalDeltaZero:
    def _grid(self, k):
        params = GridParams.uniform(3, 0.1, k)
        g = sample_realization(params, [(-3, 3)] * 3, seed=17)
        return params, g

    def test_zero_argument(self):
        params, g = self._grid(0.3)
        assert conditional_laplace_delta0(0.0, g, params) == 1.0

    def test_zero_loss_reduces_to_in_room_count(self):
        params, g = self._grid(0.0)
        from poisson_building.links import _room_table

        user = np.array([0.0, 0.0, 0.0])
        mass, offsets = _room_table(g, params, user)
        lam0 = float(mass[np.all(offsets == 0, axis=1)].sum())
        n = np.arange(1, 200)
        pmf = stats.poisson(lam0).pmf(n) / -math.expm1(-lam0)
        s = 0.8
        expected = float(np.sum(pmf * (1 / (1 + s)) ** (n - 1)))
        assert conditional_laplace_delta0(s, g, params, user) == pytest.approx(expected, rel=1e-12)

    def test_monte_carlo(self):
        params, g = self._grid(0.3)
        value = conditional_laplace_delta0(1.0, g, params)
        est = mc.sim_conditional_delta0(g, params, 1.0, samples=3000, seed=5)
        assert est.within(value, 3)

    def test_needs_base_station_intensity(self):
        params = GridParams.uniform(3, 0.1, 0.3)
        g = GridRealization(window=((0, 1),) * 3, walls=(np.array([]),) * 3)
        with pytest.raises(DomainError):
            conditional_laplace_delta0(1.0, g, params)


class TestFreeSpace:
    def test_shape_integral(self):
        # alpha = 4, theta = 1: int_0^inf = pi/(2 sqrt 2) minus the elementary [0, 1] part
        r2 = math.sqrt(2)
        head = math.log((2 - r2) / (2 + r2)) / (4 * r2) + math.pi / (4 * r2)
        exact = math.pi / (2 * r2) - head
        assert interference_shape(1.0, 4.0) == pytest.approx(exact, rel=1e-10)

    def test_closed_form(self):
        for alpha in (3.5, 4.0):
            c = interference_shape(2.0, alpha)
            assert freespace_coverage(2.0, FreeSpaceParams(0.3, alpha)) == pytest.approx(1 / (1 + 3 * c), rel=1e-8)

    def test_scale_invariance(self):
        a = freespace_coverage(1.0, FreeSpaceParams(0.1))
        b = freespace_coverage(1.0, FreeSpaceParams(1.0))
        assert a == pytest.approx(b, abs=1e-6)

    def test_small_threshold(self):
        assert freespace_coverage(1e-8, FreeSpaceParams(0.5)) == pytest.approx(1.0, abs=1e-5)

    def test_monte_carlo(self):
        fs = FreeSpaceParams(0.5)
        est = mc.sim_freespace(fs, mc.SimConfig(samples=20_000, seed=27), 1.0)
        assert est.within(freespace_coverage(1.0, fs), 3)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            FreeSpaceParams(0.1, alpha=3.0)
        with pytest.raises(DomainError):
            freespace_coverage(0.0, FreeSpaceParams(0.1))


_grids = st.builds(lambda r, k: GridParams.uniform(3, r, k), st.floats(0.02, 0.5), st.floats(0.0, 0.4))


class TestProperties:
    @given(_grids, st.floats(0.01, 50.0), st.floats(1.01, 3.0))
    def test_success_monotone_in_threshold(self, p, theta, factor):
        a = success_d2d(LinkQuery(theta), p)
        b = success_d2d(LinkQuery(theta * factor), p)
        assert 0 <= b <= a <= 1

    @given(_grids, st.floats(0.01, 50.0), st.floats(0.0, 2.0))
    def test_success_monotone_in_noise(self, p, theta, noise):
        assert success_d2d(LinkQuery(theta, sigma2=noise + 0.1), p) <= success_d2d(LinkQuery(theta, sigma2=noise), p)

    @given(st.floats(0.02, 1.0), st.floats(0.01, 0.4), st.floats(0.1, 20.0))
    def test_nearest_monotone(self, r, k, theta):
        p = GridParams.uniform(3, r, k)
        a = coverage_nearest(theta, p).value
        b = coverage_nearest(theta * 1.5, p).value
        assert 0 <= b <= a + 1e-12 <= 1 + 1e-12

    @given(st.floats(0.05, 5.0), st.sampled_from([0.5, 2.0]))
    def test_nu_scaling(self, theta, c):
        assert success_d2d(LinkQuery(theta, nu=c), P03) == success_d2d(LinkQuery(theta * c), P03)

    @given(st.floats(0.1, 20.0))
    def test_building_coverage_decreases_with_density(self, theta):
        values = []
        for lam_avg in (0.1, 0.4, 1.2):
            p = GridParams(mu=(1.0,) * 3, lam=(lam_avg / 12,) * 3, k=(0.1,) * 3)
            values.append(coverage_nearest(theta, p).value)
        assert values[0] > values[1] > values[2]
