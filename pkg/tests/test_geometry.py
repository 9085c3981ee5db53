import numpy as np
import pytest
from scipy.spatial.distance import cdist

from src.errors import ParameterError
from src.geometry.boundary import boundary_distance, default_boundary_epsilon, split_near_boundary
from src.geometry.neighbors import build_knn, median_spacing, nearest
from src.geometry.point_cloud import (
    ManifoldKind,
    fill_distance,
    intrinsic_from_ambient,
    load_cloud,
    sample_cloud,
    sample_grid,
    save_cloud,
    torus_residual,
)


class TestSampleCloud:
    def test_points_lie_on_the_torus(self, torus_cloud):
        assert np.abs(torus_residual(torus_cloud.points, 2.0, 1.0)).max() < 1e-12

    def test_same_seed_reproduces_the_cloud(self):
        a = sample_cloud(ManifoldKind.TORUS, 50, seed=9)
        b = sample_cloud(ManifoldKind.TORUS, 50, seed=9)
        assert np.array_equal(a.points, b.points)

    def test_semi_torus_angles(self, semi_torus_cloud):
        phi = semi_torus_cloud.intrinsic[:, 1]
        assert phi.min() >= 0.0 and phi.max() <= np.pi
        assert semi_torus_cloud.has_boundary

    def test_intrinsic_round_trip(self, torus_cloud):
        recovered = intrinsic_from_ambient(torus_cloud.points, 2.0, 1.0)
        assert np.allclose(recovered, torus_cloud.intrinsic, atol=1e-10)

    @pytest.mark.parametrize("N,R,r", [(0, 2.0, 1.0), (10, 1.0, 1.0), (10, 1.0, 2.0)])
    def test_invalid_arguments(self, N, R, r):
        with pytest.raises(ParameterError):
            sample_cloud(ManifoldKind.TORUS, N, R, r)

    def test_points_are_read_only(self, torus_cloud):
        with pytest.raises(ValueError):
            torus_cloud.points[0, 0] = 1.0


class TestSampleGrid:
    def test_shape_and_seam(self):
        grid = sample_grid(ManifoldKind.TORUS, 4, 6)
        assert grid.size == 24
        assert grid.grid_shape == (4, 6)
        # no duplicate point across the periodic seam
        assert np.min(cdist(grid.points, grid.points) + np.eye(24) * 10) > 1e-6

    def test_semi_torus_includes_both_boundary_edges(self):
        grid = sample_grid(ManifoldKind.SEMI_TORUS, 4, 5)
        phi = grid.intrinsic[:, 1]
        assert phi.min() == 0.0
        assert phi.max() == pytest.approx(np.pi)


class TestPersistence:
    def test_save_and_load(self, tmp_path, torus_cloud):
        save_cloud(torus_cloud, tmp_path)
        loaded = load_cloud(tmp_path)
        assert np.array_equal(loaded.points, torus_cloud.points)
        assert np.array_equal(loaded.intrinsic, torus_cloud.intrinsic)
        assert loaded.kind == ManifoldKind.TORUS
        assert loaded.seed == torus_cloud.seed

    def test_grid_shape_survives(self, tmp_path):
        grid = sample_grid(ManifoldKind.TORUS, 3, 5)
        save_cloud(grid, tmp_path, "grid")
        assert load_cloud(tmp_path, "grid").grid_shape == (3, 5)


class TestBuildKnn:
    def test_matches_brute_force(self):
        points = np.random.default_rng(0).normal(size=(80, 3))
        knn = build_knn(points, 7)
        expected = np.argsort(cdist(points, points), axis=1, kind="stable")[:, :7]
        assert np.array_equal(knn.lists, expected)

    def test_self_first_and_sorted(self, torus_cloud):
        knn = build_knn(torus_cloud, 10)
        assert np.array_equal(knn.lists[:, 0], np.arange(torus_cloud.size))
        assert np.all(np.diff(knn.distances, axis=1) >= 0)

    def test_self_first_with_duplicates(self):
        points = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
        knn = build_knn(points, 2)
        assert np.array_equal(knn.lists[:, 0], np.arange(4))
        assert knn.lists[0, 1] == 1 and knn.lists[1, 1] == 0

    @pytest.mark.parametrize("k", [0, 301])
    def test_k_out_of_range(self, torus_cloud, k):
        with pytest.raises(ParameterError):
            build_knn(torus_cloud, k)

    def test_truncation_keeps_prefix(self, torus_cloud):
        knn = build_knn(torus_cloud, 12)
        assert np.array_equal(knn.truncated(5).lists, knn.lists[:, :5])

    def test_symmetric_pattern(self, torus_cloud):
        rows, cols = build_knn(torus_cloud, 6).symmetric_pattern()
        pairs = set(zip(rows.tolist(), cols.tolist()))
        assert all((j, i) in pairs for i, j in pairs)


class TestSpacing:
    def test_nearest_and_fill_distance(self, torus_cloud):
        idx, sq = nearest(torus_cloud.points, torus_cloud.points[:5])
        assert np.array_equal(idx, np.arange(5))
        assert np.all(sq == 0.0)
        assert fill_distance(torus_cloud, torus_cloud.points) == 0.0

    def test_median_spacing_of_a_line(self):
        points = np.column_stack([np.arange(10.0) * 0.5, np.zeros(10), np.zeros(10)])
        assert median_spacing(points) == pytest.approx(0.5)


class TestBoundarySplit:
    def test_torus_has_no_boundary(self, torus_cloud):
        split = split_near_boundary(torus_cloud, 0.5)
        assert split.near_boundary.size == 0
        assert split.interior.size == torus_cloud.size

    def test_semi_torus_partition(self, semi_torus_cloud):
        eps = default_boundary_epsilon(semi_torus_cloud)
        split = split_near_boundary(semi_torus_cloud, eps)
        distance = boundary_distance(semi_torus_cloud)
        assert np.all(distance[split.near_boundary] <= eps)
        assert np.all(distance[split.interior] > eps)
        assert np.union1d(split.interior, split.near_boundary).size == semi_torus_cloud.size
        assert split.near_boundary.size > 0

    def test_edge_points_are_near(self):
        grid = sample_grid(ManifoldKind.SEMI_TORUS, 6, 6)
        split = split_near_boundary(grid, 1e-9)
        phi = grid.intrinsic[:, 1]
        assert set(split.near_boundary.tolist()) == set(np.flatnonzero((phi == 0.0) | np.isclose(phi, np.pi)).tolist())

    def test_permutation_stable(self, semi_torus_cloud):
        distance = boundary_distance(semi_torus_cloud)
        order = np.random.default_rng(1).permutation(semi_torus_cloud.size)
        near = set(np.flatnonzero(distance <= 0.3).tolist())
        near_permuted = set(order[np.flatnonzero(distance[order] <= 0.3)].tolist())
        assert near == near_permuted

    def test_negative_epsilon(self, semi_torus_cloud):
        with pytest.raises(ParameterError):
            split_near_boundary(semi_torus_cloud, -1.0)
