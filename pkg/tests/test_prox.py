import math

import numpy as np
import pytest

from pconductance import prox

from oracles import golden_scalar_prox, grid_prox_max_2d


def spec_of(p, w, lam):
    return prox.ProxSpec(p, np.asarray(w, dtype=float), lam)


class TestProxSpec:
    def test_rejects_small_p(self):
        with pytest.raises(ValueError):
            spec_of(0.5, [1.0], 1.0)

    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            spec_of(2.0, [0.0], 1.0)

    def test_rejects_bad_scale(self):
        with pytest.raises(ValueError):
            spec_of(2.0, [1.0], 0.0)


class TestPowerProx:
    def test_soft_threshold(self):
        spec = spec_of(1.0, [0.5], 1.0)  # lam * w = 0.5
        assert prox.prox_weighted_power(spec, np.array([1.0]))[0] == pytest.approx(0.5)
        assert prox.prox_weighted_power(spec, np.array([0.3]))[0] == 0.0

    def test_quadratic_closed_form(self):
        spec = spec_of(2.0, [1.0], 0.5)
        assert prox.prox_weighted_power(spec, np.array([1.0]))[0] == pytest.approx(0.5)

    def test_cubic_golden_ratio(self):
        # u + u^2 = 1 at tau = 1/3, p = 3: the positive root 0.6180339887
        spec = spec_of(3.0, [1.0], 1.0 / 3.0)
        u = prox.prox_weighted_power(spec, np.array([1.0]))[0]
        assert u == pytest.approx((math.sqrt(5.0) - 1.0) / 2.0, abs=1e-10)
        assert u == pytest.approx(golden_scalar_prox(1.0, 1.0 / 3.0, 3.0), abs=1e-6)

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 5.0])
    def test_matches_golden_section(self, p):
        rng = np.random.default_rng(int(p * 10))
        v = rng.normal(size=60) * 2.0
        w = rng.uniform(0.2, 2.0, size=60)
        lam = 0.8
        u = prox.prox_weighted_power(spec_of(p, w, lam), v)
        for e in range(v.shape[0]):
            assert abs(u[e] - golden_scalar_prox(v[e], lam * w[e], p)) < 1e-6

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 5.0])
    def test_nonexpansive(self, p):
        rng = np.random.default_rng(3)
        spec = spec_of(p, rng.uniform(0.5, 1.5, size=40), 0.6)
        for _ in range(20):
            a = rng.normal(size=40)
            b = rng.normal(size=40)
            pa = prox.prox_weighted_power(spec, a)
            pb = prox.prox_weighted_power(spec, b)
            assert (np.linalg.norm(pa - pb)
                    <= np.linalg.norm(a - b) + 1e-10)

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 5.0])
    def test_optimality_residual(self, p):
        rng = np.random.default_rng(4)
        w = rng.uniform(0.5, 1.5, size=30)
        spec = spec_of(p, w, 0.9)
        v = rng.normal(size=30) * 3.0
        u = prox.prox_weighted_power(spec, v)
        z = (v - u) / spec.lam
        assert prox.fenchel_subgradient_check(spec, u, z)

    def test_rejects_infinite_p(self):
        with pytest.raises(ValueError):
            prox.prox_weighted_power(spec_of(math.inf, [1.0], 1.0), np.array([1.0]))


class TestMaxProx:
    def test_two_coordinate_example(self):
        spec = spec_of(math.inf, [1.0, 1.0], 1.0)
        u = prox.prox_weighted_max(spec, np.array([2.0, 1.0]))
        assert np.allclose(u, [1.0, 1.0], atol=1e-12)
        oracle = grid_prox_max_2d(np.array([2.0, 1.0]), np.array([1.0, 1.0]), 1.0)
        assert np.allclose(u, oracle, atol=1e-4)

    def test_shrinks_to_zero_for_large_scale(self):
        spec = spec_of(math.inf, [1.0, 1.0], 2.0)
        u = prox.prox_weighted_max(spec, np.array([1.0, 0.0]))
        assert np.allclose(u, 0.0, atol=1e-12)
        oracle = grid_prox_max_2d(np.array([1.0, 0.0]), np.array([1.0, 1.0]), 2.0)
        assert np.allclose(oracle, 0.0, atol=1e-4)

    def test_small_scale_close_to_identity(self):
        rng = np.random.default_rng(5)
        v = rng.normal(size=10)
        w = rng.uniform(0.5, 1.5, size=10)
        u = prox.prox_weighted_max(spec_of(math.inf, w, 1e-9), v)
        assert np.allclose(u, v, atol=1e-8)

    def test_moreau_identity_exact(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            v = rng.normal(size=25) * 3.0
            w = rng.uniform(0.3, 3.0, size=25)
            lam = float(rng.uniform(0.1, 2.0))
            z, _ = prox.project_weighted_l1(v, w, lam)
            u = prox.prox_weighted_max(spec_of(math.inf, w, lam), v)
            assert np.all(u + z == v)

    def test_nonexpansive(self):
        rng = np.random.default_rng(7)
        spec = spec_of(math.inf, rng.uniform(0.5, 1.5, size=30), 0.8)
        for _ in range(20):
            a = rng.normal(size=30)
            b = rng.normal(size=30)
            pa = prox.prox_weighted_max(spec, a)
            pb = prox.prox_weighted_max(spec, b)
            assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-10

    def test_equal_weighted_magnitude_on_active_set(self):
        rng = np.random.default_rng(8)
        w = rng.uniform(0.5, 2.0, size=12)
        v = rng.normal(size=12) * 2.0
        spec = spec_of(math.inf, w, 0.5)
        u = prox.prox_weighted_max(spec, v)
        mags = w * np.abs(u)
        top = mags.max()
        active = ~np.isclose(u, v)
        assert np.allclose(mags[active], top, atol=1e-10)


class TestProjection:
    def test_inside_ball_unchanged(self):
        v = np.array([0.1, -0.1])
        z, theta = prox.project_weighted_l1(v, np.array([1.0, 1.0]), 5.0)
        assert theta == 0.0 and np.array_equal(z, v)

    def test_projection_feasible_and_closest(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            n = int(rng.integers(2, 8))
            v = rng.normal(size=n) * 2.0
            w = rng.uniform(0.3, 2.0, size=n)
            radius = float(rng.uniform(0.2, 1.5))
            z, _ = prox.project_weighted_l1(v, w, radius)
            assert np.sum(np.abs(z) / w) <= radius + 1e-9
            # no random feasible point is closer
            for _ in range(200):
                cand = rng.normal(size=n)
                s = np.sum(np.abs(cand) / w)
                if s > radius:
                    cand *= radius / s
                assert (np.linalg.norm(v - z)
                        <= np.linalg.norm(v - cand) + 1e-9)


class TestJacobian:
    def test_p2_constant(self):
        spec = spec_of(2.0, [1.0, 2.0], 0.5)
        d = prox.generalized_jacobian_diag(spec, np.array([3.0, -1.0]))
        assert np.allclose(d, [1.0 / 2.0, 1.0 / 3.0])

    def test_p1_zero_one(self):
        spec = spec_of(1.0, [1.0, 1.0], 0.5)
        u = prox.prox_weighted_power(spec, np.array([2.0, 0.1]))
        d = prox.generalized_jacobian_diag(spec, u)
        assert d.tolist() == [1.0, 0.0]

    def test_p3_matches_finite_difference(self):
        spec = spec_of(3.0, [1.0], 1.0 / 3.0)
        v = np.array([1.0])
        u = prox.prox_weighted_power(spec, v)[0]
        d = prox.generalized_jacobian_diag(spec, np.array([u]))[0]
        assert d == pytest.approx(1.0 / (1.0 + 2.0 * u), abs=1e-9)
        h = 1e-6
        fd = (prox.prox_weighted_power(spec, v + h)[0]
              - prox.prox_weighted_power(spec, v - h)[0]) / (2.0 * h)
        assert d == pytest.approx(fd, abs=1e-6)

    def test_p_between_one_and_two_zero_selection(self):
        spec = spec_of(1.5, [1.0, 1.0], 0.5)
        d = prox.generalized_jacobian_diag(spec, np.array([0.0, 0.4]))
        assert d[0] == 0.0 and 0.0 < d[1] < 1.0

    def test_entries_in_unit_interval(self):
        rng = np.random.default_rng(10)
        for p in (1.0, 1.5, 2.0, 3.0, 5.0):
            spec = spec_of(p, rng.uniform(0.5, 2.0, size=20), 0.7)
            u = prox.prox_weighted_power(spec, rng.normal(size=20) * 2.0)
            d = prox.generalized_jacobian_diag(spec, u)
            assert np.all(d >= 0.0) and np.all(d <= 1.0)


class TestSubgradientCheck:
    def test_p2_gradient(self):
        spec = spec_of(2.0, [1.0], 1.0)
        assert prox.fenchel_subgradient_check(spec, np.array([1.0]), np.array([2.0]))
        assert not prox.fenchel_subgradient_check(spec, np.array([1.0]), np.array([1.5]))

    def test_p1_interval_at_zero(self):
        spec = spec_of(1.0, [1.0], 1.0)
        assert prox.fenchel_subgradient_check(spec, np.array([0.0]), np.array([0.7]))
        assert prox.fenchel_subgradient_check(spec, np.array([0.0]), np.array([-1.0]))
        assert not prox.fenchel_subgradient_check(spec, np.array([0.0]), np.array([1.2]))

    def test_pinf_argmax_support(self):
        spec = spec_of(math.inf, [1.0, 1.0, 1.0], 1.0)
        u = np.array([1.0, 1.0, 0.5])
        assert prox.fenchel_subgradient_check(spec, u, np.array([0.6, 0.4, 0.0]))
        assert prox.fenchel_subgradient_check(spec, u, np.array([1.0, 0.0, 0.0]))
        # mass off the argmax set or wrong sign is rejected
        assert not prox.fenchel_subgradient_check(spec, u, np.array([0.5, 0.0, 0.5]))
        assert not prox.fenchel_subgradient_check(spec, u, np.array([1.4, -0.4, 0.0]))
