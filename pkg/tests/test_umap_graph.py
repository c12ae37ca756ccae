"""Neighborhood graph: exact kNN, bandwidth calibration, fuzzy union."""

import numpy as np
import pytest

from cluster_annotate.umap import graph as g


def _brute_knn(A, k):
    """Oracle: all-pairs distances, per-row selection by (distance, index)."""
    n = A.shape[0]
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k))
    for i in range(n):
        cand = []
        for j in range(n):
            if j != i:
                cand.append((float(np.linalg.norm(A[i] - A[j])), j))
        cand.sort()
        idx[i] = [c[1] for c in cand[:k]]
        dist[i] = [c[0] for c in cand[:k]]
    return idx, dist


class TestKnn:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for n, d, k in ((12, 3, 2), (30, 5, 7), (50, 2, 15)):
            A = rng.standard_normal((n, d))
            idx, dist = g.knn_graph(A, k)
            oidx, odist = _brute_knn(A, k)
            np.testing.assert_allclose(dist, odist, atol=1e-9)
            np.testing.assert_array_equal(idx, oidx)

    def test_duplicate_points_tie_to_smaller_index(self):
        A = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [5.0, 5.0]])
        idx, dist = g.knn_graph(A, 3)
        # rows 1..3 are identical; each one's nearest neighbors are the
        # other duplicates in index order
        np.testing.assert_array_equal(idx[1], [2, 3, 0])
        np.testing.assert_array_equal(idx[2], [1, 3, 0])
        np.testing.assert_array_equal(idx[3], [1, 2, 0])
        assert dist[1][0] == 0.0

    def test_self_never_a_neighbor(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((20, 4))
        idx, _ = g.knn_graph(A, 5)
        for i in range(20):
            assert i not in idx[i]

    def test_k_bounds(self):
        A = np.zeros((5, 2))
        with pytest.raises(g.KTooLarge):
            g.knn_graph(A, 5)
        with pytest.raises(ValueError):
            g.knn_graph(A, 1)


class TestCalibrate:
    def test_residual_at_most_1e5_on_random_rows(self):
        rng = np.random.default_rng(2)
        k = 10
        d = np.sort(rng.uniform(0.1, 4.0, size=(200, k)), axis=1)
        rho, sigma, clamped = g.calibrate(d, k)
        target = np.log2(k)
        mass = np.exp(-np.maximum(d - rho[:, None], 0.0) / sigma[:, None]).sum(axis=1)
        assert not clamped.any()
        np.testing.assert_allclose(mass, target, atol=1e-5)

    def test_rho_is_smallest_positive_distance(self):
        d = np.array([[0.0, 0.0, 0.7, 1.0], [0.2, 0.5, 0.6, 0.9]])
        rho, _, _ = g.calibrate(d, 4)
        assert rho[0] == pytest.approx(0.7)
        assert rho[1] == pytest.approx(0.2)

    def test_all_zero_row_gets_floor_sigma_and_clamp_flag(self):
        d = np.zeros((1, 4))
        rho, sigma, clamped = g.calibrate(d, 4)
        assert rho[0] == 0.0
        assert sigma[0] == pytest.approx(g.SIGMA_FLOOR)
        assert clamped[0]

    def test_duplicate_heavy_row_clamps_low(self):
        # three zero-distance neighbors already exceed the log2(4)=2 target
        d = np.array([[0.0, 0.0, 0.0, 5.0]])
        rho, sigma, clamped = g.calibrate(d, 4)
        assert clamped[0]
        assert sigma[0] == pytest.approx(g.MIN_SCALE * d.mean())

    def test_scale_equivariance(self):
        # scaling all distances scales sigma and rho linearly
        rng = np.random.default_rng(3)
        d = np.sort(rng.uniform(0.5, 2.0, size=(50, 8)), axis=1)
        rho1, sigma1, _ = g.calibrate(d, 8)
        rho2, sigma2, _ = g.calibrate(d * 100.0, 8)
        np.testing.assert_allclose(rho2, rho1 * 100.0, rtol=1e-12)
        np.testing.assert_allclose(sigma2, sigma1 * 100.0, rtol=1e-3)


class TestUnion:
    def test_dense_matrix_exactly_symmetric(self):
        rng = np.random.default_rng(4)
        A = rng.standard_normal((40, 3))
        mg = g.membership_graph(A, 6)
        W = mg.to_dense()
        assert (W == W.T).all()

    def test_weights_in_unit_interval(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((60, 4))
        mg = g.membership_graph(A, 8)
        assert (mg.weights > 0.0).all()
        assert (mg.weights <= 1.0).all()

    def test_tconorm_against_directed_oracle(self):
        rng = np.random.default_rng(6)
        A = rng.standard_normal((25, 3))
        k = 5
        idx, dist = g.knn_graph(A, k)
        rho, sigma, clamped = g.calibrate(dist, k)
        w = g.directed_weights(dist, rho, sigma)
        directed = np.zeros((25, 25))
        for i in range(25):
            directed[i, idx[i]] = w[i]
        expected = directed + directed.T - directed * directed.T
        mg = g.fuzzy_union(idx, w, rho, sigma, clamped, k)
        np.testing.assert_allclose(mg.to_dense(), expected, atol=1e-12)

    def test_nearest_neighbor_weight_is_one(self):
        # the rho-defining neighbor sits at shifted distance zero
        rng = np.random.default_rng(7)
        A = rng.standard_normal((30, 3))
        idx, dist = g.knn_graph(A, 4)
        rho, sigma, _ = g.calibrate(dist, 4)
        w = g.directed_weights(dist, rho, sigma)
        np.testing.assert_allclose(w[:, 0], 1.0)

    def test_edges_sorted_and_unique(self):
        rng = np.random.default_rng(8)
        A = rng.standard_normal((30, 3))
        mg = g.membership_graph(A, 5)
        pairs = list(zip(mg.heads.tolist(), mg.tails.tolist()))
        assert all(i < j for i, j in pairs)
        assert pairs == sorted(pairs)
        assert len(set(pairs)) == len(pairs)
