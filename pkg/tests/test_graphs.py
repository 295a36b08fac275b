import numpy as np
import pytest

from pconductance import graphs

from oracles import dense_incidence, dense_laplacian, union_find_components


def path3(w=1.0):
    return graphs.WeightedGraph(3, [(0, 1, w), (1, 2, w)])


def random_graph(rng, n, extra=0.4):
    edges = {}
    for v in range(1, n):
        edges[(int(rng.integers(0, v)), v)] = float(rng.uniform(0.5, 2.0))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra:
                edges[(i, j)] = float(rng.uniform(0.5, 2.0))
    return graphs.WeightedGraph(n, [(i, j, w) for (i, j), w in edges.items()])


class TestWeightedGraph:
    def test_basic_fields(self):
        g = path3()
        assert g.n == 3 and g.N == 2
        assert np.allclose(g.degrees, [1.0, 2.0, 1.0])

    def test_rejects_self_loop(self):
        with pytest.raises(ValueError, match="self-loop"):
            graphs.WeightedGraph(3, [(1, 1, 1.0)])

    def test_rejects_duplicate_edge(self):
        with pytest.raises(ValueError, match="duplicate"):
            graphs.WeightedGraph(3, [(0, 1, 1.0), (1, 0, 2.0)])

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(ValueError, match="weight"):
            graphs.WeightedGraph(3, [(0, 1, 0.0)])

    def test_degrees_match_dense_row_sums(self):
        g = random_graph(np.random.default_rng(0), 12)
        W = np.diag(g.degrees) - dense_laplacian(g)
        assert np.allclose(g.degrees, W.sum(axis=1) + 0.0, atol=1e-12)


class TestLaplacianApply:
    def test_path_hand_value(self):
        out = graphs.laplacian_apply(path3(), np.array([1.0, 0.0, 0.0]))
        assert np.allclose(out, [1.0, -1.0, 0.0])

    def test_all_ones_in_kernel(self):
        g = random_graph(np.random.default_rng(1), 10)
        out = graphs.laplacian_apply(g, np.ones(g.n))
        assert np.max(np.abs(out)) < 1e-12

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(2)
        g = random_graph(rng, 10)
        x = rng.normal(size=g.n)
        assert np.allclose(graphs.laplacian_apply(g, x),
                           dense_laplacian(g) @ x, atol=1e-12)

    def test_column_sums_vanish(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            g = random_graph(rng, 8)
            phi = rng.normal(size=g.n)
            assert abs(graphs.laplacian_apply(g, phi).sum()) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            graphs.laplacian_apply(path3(), np.zeros(4))


class TestIncidence:
    def test_path_examples(self):
        g = path3()
        bt = graphs.incidence_apply_t(g, np.array([1.0, 0.0, -1.0]))
        assert np.allclose(bt, [1.0, 1.0])
        assert np.allclose(graphs.incidence_apply(g, np.array([1.0, 1.0])),
                           [1.0, 0.0, -1.0])

    def test_adjoint_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            g = random_graph(rng, 9)
            phi = rng.normal(size=g.n)
            J = rng.normal(size=g.N)
            lhs = graphs.incidence_apply_t(g, phi) @ J
            rhs = phi @ graphs.incidence_apply(g, J)
            assert abs(lhs - rhs) < 1e-12

    def test_weighted_factorization(self):
        rng = np.random.default_rng(5)
        for n in (5, 20, 50):
            g = random_graph(rng, n, extra=0.2)
            phi = rng.normal(size=g.n)
            via_incidence = graphs.incidence_apply(
                g, g.w * graphs.incidence_apply_t(g, phi)
            )
            assert np.allclose(via_incidence, graphs.laplacian_apply(g, phi),
                               atol=1e-12)

    def test_matches_dense_incidence(self):
        rng = np.random.default_rng(6)
        g = random_graph(rng, 8)
        B = dense_incidence(g)
        phi = rng.normal(size=g.n)
        assert np.allclose(graphs.incidence_apply_t(g, phi), B.T @ phi)

    def test_composition_is_unweighted_laplacian(self):
        rng = np.random.default_rng(7)
        g = random_graph(rng, 11)
        unit = graphs.WeightedGraph(g.n, [(i, j, 1.0) for i, j, _ in g.edge_list()])
        phi = rng.normal(size=g.n)
        composed = graphs.incidence_apply(g, graphs.incidence_apply_t(g, phi))
        assert np.allclose(composed, graphs.laplacian_apply(unit, phi),
                           atol=1e-12)


class TestComponents:
    def test_path_connected(self):
        assert len(graphs.connected_components(path3())) == 1

    def test_two_disjoint_edges(self):
        g = graphs.WeightedGraph(4, [(0, 1, 1.0), (2, 3, 1.0)])
        assert len(graphs.connected_components(g)) == 2

    def test_empty_edge_graph(self):
        g = graphs.WeightedGraph(3, [])
        assert len(graphs.connected_components(g)) == 3

    def test_induced_subgraph(self):
        g = graphs.WeightedGraph(5, [(0, 1, 1.0), (1, 2, 2.0), (3, 4, 1.0)])
        sub, node_map = graphs.induced_subgraph(g, [0, 1, 2])
        assert sub.n == 3 and sub.N == 2
        assert node_map[3] == -1 and node_map[1] == 1


class TestKnnGraph:
    def test_two_points(self):
        g = graphs.build_knn_graph(np.array([[0.0], [3.0]]), 1)
        assert g.N == 1
        assert np.isclose(g.w[0], np.exp(-4.0))

    def test_three_collinear(self):
        g = graphs.build_knn_graph(np.array([[0.0], [1.0], [2.0]]), 1)
        assert g.N == 2
        assert np.allclose(g.w, np.exp(-4.0))
        assert {(0, 1), (1, 2)} == set(zip(g.src.tolist(), g.dst.tolist()))

    def test_two_clusters_components(self):
        rng = np.random.default_rng(7)
        X = np.vstack([
            rng.normal(size=(25, 2)) * 0.1,
            rng.normal(size=(25, 2)) * 0.1 + 50.0,
        ])
        g = graphs.build_knn_graph(X, 5)
        assert len(graphs.connected_components(g)) == 2
        # independent union-find on the produced edge list
        assert union_find_components(g.edge_list(), g.n) == 2

    def test_weights_in_unit_interval(self):
        rng = np.random.default_rng(8)
        g = graphs.build_knn_graph(rng.normal(size=(30, 3)), 4)
        assert np.all(g.w > 0) and np.all(g.w <= 1.0)

    def test_kth_neighbor_weight(self):
        # equally spaced line, k=2: node 0 selects nodes 1 and 2 with
        # d_k(0) = 2, so the (0, 2) edge carries weight exactly exp(-4)
        # while (0, 1) keeps the larger of its two directed weights
        X = np.arange(6, dtype=float)[:, None]
        g = graphs.build_knn_graph(X, 2)
        lookup = {(i, j): w for i, j, w in g.edge_list()}
        assert np.isclose(lookup[(0, 2)], np.exp(-4.0))
        assert np.isclose(lookup[(0, 1)], np.exp(-1.0))

    def test_duplicate_points_error(self):
        X = np.array([[1.0], [1.0], [5.0]])
        with pytest.raises(ValueError, match="node (0|1)"):
            graphs.build_knn_graph(X, 1)

    def test_k_too_large(self):
        with pytest.raises(ValueError, match="k must"):
            graphs.build_knn_graph(np.zeros((3, 2)) + np.arange(3)[:, None], 3)


class TestGraphIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        g = random_graph(rng, 9)
        path = tmp_path / "g.txt"
        graphs.write_graph_file(g, path)
        g2 = graphs.read_graph_file(path)
        assert g2.n == g.n
        assert np.array_equal(g2.src, g.src)
        assert np.array_equal(g2.dst, g.dst)
        assert np.allclose(g2.w, g.w, rtol=0, atol=0)

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("# a comment\n\n0 1 0.5\n1 2 1.5\n")
        g = graphs.read_graph_file(path)
        assert g.n == 3 and g.N == 2

    def test_bad_line_reports_lineno(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("0 1 1.0\n2 1 1.0\n")
        with pytest.raises(graphs.GraphFormatError, match=":2:"):
            graphs.read_graph_file(path)

    def test_features_csv(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("0.0,1.0\n2.0,3.5\n")
        X = graphs.read_features_csv(path)
        assert X.shape == (2, 2) and X[1, 1] == 3.5

    def test_features_ragged_row(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("0.0,1.0\n2.0\n")
        with pytest.raises(graphs.GraphFormatError, match=":2:"):
            graphs.read_features_csv(path)
