import math

import numpy as np
import pytest

from pconductance import graphs, measures, solvers, validators

from test_graphs import path3


def dirac_pair(n, s, t):
    mu = np.zeros(n)
    nu = np.zeros(n)
    mu[s], nu[t] = 1.0, 1.0
    return mu, nu


class TestBeckmannOracle:
    def test_path_w1_distance(self):
        g = path3()
        mu, nu = dirac_pair(3, 0, 2)
        val = validators.beckmann_oracle(g, mu, nu, 1.0, 1.0 / g.w)
        assert val == pytest.approx(2.0, abs=1e-9)

    def test_cinfty_pairing_on_path(self):
        g = path3()
        mu, nu = dirac_pair(3, 0, 2)
        st = solvers.ssnal_solve(g, mu - nu, math.inf,
                                 solvers.SolverConfig(tol=1e-7))
        q, wts = validators.conductance_dual_weights(g, math.inf)
        val = validators.beckmann_oracle(g, mu, nu, q, wts)
        assert st.objective * val == pytest.approx(1.0, abs=1e-5)

    def test_projected_gradient_matches_closed_form_at_q2(self):
        rng = np.random.default_rng(0)
        g = validators.random_connected_graph(rng, 8)
        mu, nu = validators.random_disjoint_measures(rng, g.n)
        c = rng.uniform(0.5, 2.0, size=g.N)
        pg = validators._beckmann_projected_gradient(g, mu - nu, 2.0, c)
        closed = validators.beckmann_oracle(g, mu, nu, 2.0, c)
        assert pg == pytest.approx(closed, abs=1e-7)

    def test_dual_weight_transforms(self):
        g = path3()
        q, c = validators.conductance_dual_weights(g, 3.0)
        assert q == pytest.approx(1.5)
        assert np.allclose(c, g.w ** (-0.5))
        q, c = validators.conductance_dual_weights(g, 1.0)
        assert math.isinf(q) and np.allclose(c, 1.0 / g.w)

    def test_oracle_scale_guard(self):
        rng = np.random.default_rng(1)
        g = validators.random_connected_graph(rng, 70, extra_edge_prob=0.02)
        mu, nu = dirac_pair(g.n, 0, 1)
        with pytest.raises(ValueError, match="scale"):
            validators.beckmann_oracle(g, mu, nu, 1.0, 1.0 / g.w)


class TestMincutMaxflow:
    def test_path_unit_cut(self):
        g = path3()
        res = validators.mincut_maxflow_lp(g, *dirac_pair(3, 0, 2))
        assert res.mincut_value == pytest.approx(1.0, abs=1e-9)
        assert res.maxflow_value == pytest.approx(1.0, abs=1e-9)

    def test_four_cycle(self):
        g = graphs.WeightedGraph(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0),
                                     (0, 3, 1.0)])
        res = validators.mincut_maxflow_lp(g, *dirac_pair(4, 0, 2))
        assert res.mincut_value == pytest.approx(2.0, abs=1e-9)
        assert res.maxflow_value == pytest.approx(2.0, abs=1e-9)

    def test_random_instances_match_exhaustive(self):
        rng = np.random.default_rng(2)
        for _ in range(8):
            g = validators.random_connected_graph(rng, int(rng.integers(5, 10)))
            s, t = rng.choice(g.n, size=2, replace=False)
            mu, nu = dirac_pair(g.n, s, t)
            res = validators.mincut_maxflow_lp(g, mu, nu)
            assert abs(res.mincut_value - res.maxflow_value) < 1e-7
            brute = validators.exhaustive_mincut_dirac(g, s, t)
            assert res.mincut_value == pytest.approx(brute, abs=1e-7)

    def test_measure_pairs_strong_duality(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            g = validators.random_connected_graph(rng, 7)
            mu, nu = validators.random_disjoint_measures(rng, g.n)
            res = validators.mincut_maxflow_lp(g, mu, nu)
            assert abs(res.mincut_value - res.maxflow_value) < 1e-7


class TestRandomizedCuts:
    def test_path_hand_example(self):
        g = path3()
        mu, nu = dirac_pair(3, 0, 2)
        out = validators.randomized_cut_check(g, mu, nu,
                                              np.array([1.0, 0.5, 0.0]))
        assert out.ratio == pytest.approx(1.0, abs=1e-12)
        assert out.expected_cut == pytest.approx(1.0, abs=1e-12)
        assert out.expected_separation == pytest.approx(1.0, abs=1e-12)

    def test_monte_carlo_consistency(self):
        rng = np.random.default_rng(4)
        g = validators.random_connected_graph(rng, 9)
        mu, nu = validators.random_disjoint_measures(rng, g.n)
        phi = rng.uniform(0.05, 1.0, size=g.n) + 2.0 * mu
        phi /= float(phi @ (mu - nu))
        out = validators.randomized_cut_check(g, mu, nu, phi,
                                              mc_samples=100000, seed=5)
        assert out.mc_identity_dev <= 3.0 * out.mc_identity_se

    def test_optimal_phi_hits_mincut(self):
        rng = np.random.default_rng(6)
        g = validators.random_connected_graph(rng, 8)
        mu, nu = validators.random_disjoint_measures(rng, g.n)
        st = solvers.ssnal_solve(g, mu - nu, 1.0, solvers.SolverConfig(tol=1e-8))
        phi = st.phi - st.phi.min()
        out = validators.randomized_cut_check(g, mu, nu, phi)
        lp = validators.mincut_maxflow_lp(g, mu, nu)
        assert out.ratio == pytest.approx(lp.mincut_value, abs=1e-6)

    def test_negative_phi_rejected(self):
        g = path3()
        mu, nu = dirac_pair(3, 0, 2)
        with pytest.raises(ValueError):
            validators.randomized_cut_check(g, mu, nu, np.array([1.0, -0.2, 0.0]))


class TestRobustnessBound:
    def test_baseline_at_time_zero(self):
        rng = np.random.default_rng(7)
        g = validators.random_connected_graph(rng, 12)
        mu, nu = validators.random_disjoint_measures(rng, g.n)
        eta = rng.normal(size=g.n)
        eta -= eta.mean()
        rep = validators.robustness_bound_check(g, mu, nu, eta, [0.0])
        row = rep.rows[0]
        assert row.rhs == pytest.approx(row.baseline, abs=1e-12)
        assert row.lhs <= row.rhs + 1e-9

    def test_zero_eta_linear_bound(self):
        rng = np.random.default_rng(8)
        g = validators.random_connected_graph(rng, 10)
        mu, nu = validators.random_disjoint_measures(rng, g.n)
        rep = validators.robustness_bound_check(g, mu, nu, np.zeros(g.n),
                                                [0.1, 0.5, 1.0, 3.0])
        nr = np.linalg.norm(mu - nu)
        for row in rep.rows:
            assert row.lhs <= row.t * nr + 1e-9

    def test_quarter_corruption_interval_nonempty(self):
        # equal class sizes m, corrupt m1 + m2 > m/2 labels: the improvement
        # interval must open up
        rng = np.random.default_rng(9)
        g = validators.random_connected_graph(rng, 20)
        m = 4
        a_nodes = np.arange(0, m)
        b_nodes = np.arange(m, 2 * m)
        mu = np.zeros(g.n)
        nu = np.zeros(g.n)
        mu[a_nodes] = 1.0 / m
        nu[b_nodes] = 1.0 / m
        # corrupt m1 = 2 from A and m2 = 1 from B (3 > m/2 = 2)
        eta = np.zeros(g.n)
        eta[a_nodes[:2]] -= 2.0 / m
        eta[b_nodes[:1]] += 2.0 / m
        eta -= eta.mean()
        ratio = np.linalg.norm(eta) / np.linalg.norm(mu - nu)
        assert ratio > 1.0
        rep = validators.robustness_bound_check(
            g, mu, nu, eta, np.linspace(0.0, 2.0, 9)
        )
        assert rep.improvement_interval[1] > 0
        assert rep.improvement_verified
        assert rep.all_bounded

    def test_random_draws_never_violate(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            g = validators.random_connected_graph(rng, int(rng.integers(6, 24)))
            mu, nu = validators.random_disjoint_measures(rng, g.n)
            eta = rng.normal(size=g.n)
            eta -= eta.mean()
            rep = validators.robustness_bound_check(
                g, mu, nu, eta, rng.uniform(0.0, 4.0, size=5)
            )
            assert rep.all_bounded

    def test_non_mean_zero_eta_rejected(self):
        g = path3()
        mu, nu = dirac_pair(3, 0, 2)
        with pytest.raises(ValueError, match="mean zero"):
            validators.robustness_bound_check(g, mu, nu, np.array([1.0, 0.0, 0.0]),
                                              [0.1])


class TestLatticeBenchmark:
    def test_reaches_tolerance_and_orders_iterations(self):
        res = validators.lattice_benchmark(p=5.0, eps=1e-4)
        assert res.reached_tolerance
        assert res.ssnal_iterations < res.admm_iterations
        final = res.ssnal_state.trace[-1]
        assert max(final.eta1, final.eta2) <= 1e-4

    def test_feasibility_within_eta1(self):
        res = validators.lattice_benchmark(p=5.0, eps=1e-4)
        st = res.ssnal_state
        g = graphs.grid_graph(20, 20)
        gap = np.linalg.norm(graphs.incidence_apply_t(g, st.phi) - st.u)
        assert gap <= 1e-4 * (1.0 + np.linalg.norm(st.u) + math.sqrt(2.0))


class TestValidationSuite:
    def test_default_seed_all_pass(self):
        rows = validators.run_validation_suite(seed=0)
        assert all(r.passed for r in rows)

    def test_csv_report(self, tmp_path):
        rows = validators.run_validation_suite(seed=1)
        path = tmp_path / "report.csv"
        validators.write_validation_csv(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "check,instance,deviation,tolerance,passed"
        assert len(lines) == len(rows) + 1
