import numpy as np
import pytest

from src.errors import ConfigurationError, ParameterError, RangeConfigurationError, ShapeError
from src.fields.datasets import (
    DatasetConfig,
    ProblemKind,
    Split,
    derive_seed,
    family_schedule,
    generate_dataset,
    load_dataset,
    save_dataset,
)
from src.fields.kappa import (
    PARAMETRIC_FAMILIES,
    KappaFamily,
    KappaField,
    evaluate,
    grid_field,
    point_field,
    sample_kappa,
)
from src.fields.sensors import build_sensor_grid, sensors_from_cloud
from src.fields.sources import source_values
from src.geometry.boundary import default_boundary_epsilon, split_near_boundary
from src.geometry.point_cloud import ManifoldKind, sample_cloud, sample_grid


@pytest.fixture(scope="module")
def small_cloud():
    return sample_cloud(ManifoldKind.TORUS, 150, seed=1)


@pytest.fixture(scope="module")
def small_sensors():
    return build_sensor_grid(ManifoldKind.TORUS, 5, 5)


class TestKappaFamilies:
    def test_linear_offset(self):
        kappa = KappaField(KappaFamily.LINEAR, {"a": 0.0, "b": 0.0, "c": 0.0})
        assert np.array_equal(evaluate(kappa, np.random.default_rng(0).normal(size=(4, 3))), np.full(4, 6.0))

    def test_exponential(self):
        kappa = KappaField(KappaFamily.EXPONENTIAL, {"a": 0.0, "b": 0.0, "c": 2.0})
        assert np.array_equal(evaluate(kappa, np.ones((3, 3))), np.full(3, 2.0))

    def test_piecewise_quadrants(self):
        kappa = KappaField(KappaFamily.PIECEWISE_LINEAR, {"a1": 1.0, "a2": 2.0, "b1": 3.0, "b2": 4.0})
        points = np.array([[1.0, 1.0, 0.0], [-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [-1.0, -1.0, 0.0]])
        assert evaluate(kappa, points).tolist() == [16.0, 13.0, 8.0, 6.0]

    def test_quadratic(self):
        kappa = KappaField(KappaFamily.QUADRATIC, {"a1": 1.0, "b1": 0.5, "a2": -1.0, "b2": 2.0, "c": 10.0})
        assert evaluate(kappa, np.array([[2.0, 1.0, 0.0]])).tolist() == [4.0 + 0.5 - 2.0 + 2.0 + 10.0]

    def test_radial_matches_ring_radius(self, torus_cloud):
        kappa = KappaField(KappaFamily.RADIAL, {"a": 1.5})
        theta = torus_cloud.intrinsic[:, 0]
        assert np.allclose(evaluate(kappa, torus_cloud.points), 1.5 * (2.0 + np.cos(theta)), atol=1e-12)

    def test_points_shape(self):
        with pytest.raises(ShapeError):
            evaluate(KappaField(KappaFamily.LINEAR, {"a": 0.0, "b": 0.0, "c": 0.0}), np.ones((3, 2)))


class TestSampleKappa:
    @pytest.mark.parametrize("family", PARAMETRIC_FAMILIES)
    def test_positive_on_the_cloud(self, torus_cloud, family):
        kappa = sample_kappa(family, 7, torus_cloud.points)
        assert evaluate(kappa, torus_cloud.points).min() > 0.1
        assert kappa.seed == 7

    def test_seed_reproduces_coefficients(self, torus_cloud):
        a = sample_kappa(KappaFamily.QUADRATIC, 3, torus_cloud.points)
        b = sample_kappa(KappaFamily.QUADRATIC, 3, torus_cloud.points)
        c = sample_kappa(KappaFamily.QUADRATIC, 4, torus_cloud.points)
        assert a.coeffs == b.coeffs
        assert a.coeffs != c.coeffs

    def test_impossible_ranges(self, torus_cloud):
        ranges = {"a": (-100.0, -99.0), "b": (-100.0, -99.0), "c": (-100.0, -99.0)}
        with pytest.raises(RangeConfigurationError):
            sample_kappa(KappaFamily.LINEAR, 0, torus_cloud.points, ranges, max_rejections=5)

    def test_missing_range(self, torus_cloud):
        with pytest.raises(ConfigurationError):
            sample_kappa(KappaFamily.LINEAR, 0, torus_cloud.points, {"a": (0.0, 1.0)})

    @pytest.mark.parametrize("family", [KappaFamily.GRID_SAMPLES, KappaFamily.RADIAL])
    def test_non_parametric_family(self, torus_cloud, family):
        with pytest.raises(ParameterError):
            sample_kappa(family, 0, torus_cloud.points)


class TestNonParametricFields:
    def test_grid_field_reproduces_nodes(self):
        grid = sample_grid(ManifoldKind.TORUS, 8, 12)
        values = np.random.default_rng(3).uniform(1.0, 2.0, size=(8, 12))
        field = grid_field(values)
        assert np.allclose(evaluate(field, grid.points), values.ravel(), atol=1e-10)

    def test_grid_field_wraps_the_seam(self):
        values = np.ones((6, 6))
        values[0] = 3.0
        field = grid_field(values)
        # halfway between the last row and the first one
        theta = np.array([2 * np.pi * 5.5 / 6])
        point = np.column_stack([(2.0 + np.cos(theta)), [0.0], np.sin(theta)])
        assert evaluate(field, point)[0] == pytest.approx(2.0)

    def test_point_field_nearest_lookup(self, small_grid):
        values = np.arange(small_grid.size, dtype=float) + 1.0
        field = point_field(values, small_grid.points)
        assert np.array_equal(evaluate(field, small_grid.points[[4, 9]]), [5.0, 10.0])

    def test_point_field_shape(self, small_grid):
        with pytest.raises(ShapeError):
            point_field(np.ones(3), small_grid.points)


class TestSensorsAndSources:
    def test_default_sensor_grid(self):
        sensors = build_sensor_grid()
        assert sensors.m == 676
        assert sensors.shape == (26, 26)

    def test_sensors_from_cloud(self, small_grid):
        sensors = sensors_from_cloud(small_grid)
        assert sensors.m == small_grid.size
        assert sensors.shape == (10, 10)

    def test_empty_sensor_grid(self):
        with pytest.raises(ParameterError):
            build_sensor_grid(ManifoldKind.TORUS, 0, 4)

    def test_named_sources(self, torus_cloud):
        assert np.allclose(source_values("ambient-sum", torus_cloud.points), torus_cloud.points.sum(axis=1))
        assert np.allclose(source_values("cos-theta", torus_cloud.points), np.cos(torus_cloud.intrinsic[:, 0]),
                           atol=1e-12)
        assert not np.any(source_values("zero", torus_cloud.points))

    def test_unknown_source(self, torus_cloud):
        with pytest.raises(ConfigurationError):
            source_values("no-such-source", torus_cloud.points)


class TestSeeds:
    def test_derive_seed_separates_splits(self):
        seeds = {derive_seed(0, split, 0) for split in Split}
        assert len(seeds) == len(Split)
        assert derive_seed(0, Split.TRAIN, 1) == derive_seed(0, Split.TRAIN, 1)
        assert derive_seed(0, Split.TRAIN, 1) != derive_seed(1, Split.TRAIN, 1)

    def test_mixed_schedule(self):
        labels = family_schedule("mixed", 10)
        assert labels == ["linear"] * 3 + ["exponential"] * 3 + ["piecewise"] * 2 + ["quadratic"] * 2

    def test_single_family_schedule(self):
        assert family_schedule("exponential", 2) == ["exponential", "exponential"]


class TestGenerateDataset:
    def test_shapes_and_residuals(self, small_cloud, small_sensors):
        dataset = generate_dataset(DatasetConfig(n_samples=3, seed=2), small_cloud, small_sensors)
        assert dataset.kappa_sensors.shape == (3, 25)
        assert dataset.solutions.shape == (3, 150)
        assert len(dataset.residuals) == 3
        assert max(dataset.residuals) < 1e-8
        assert dataset.split == Split.TRAIN

    def test_deterministic(self, small_cloud, small_sensors):
        config = DatasetConfig(n_samples=3, family="mixed", seed=4)
        a = generate_dataset(config, small_cloud, small_sensors)
        b = generate_dataset(config, small_cloud, small_sensors)
        assert np.array_equal(a.kappa_sensors, b.kappa_sensors)
        assert np.array_equal(a.solutions, b.solutions)
        assert a.seeds == b.seeds

    def test_splits_draw_different_kappas(self, small_cloud, small_sensors):
        train = generate_dataset(DatasetConfig(n_samples=2, solve=False), small_cloud, small_sensors)
        pde = generate_dataset(DatasetConfig(n_samples=2, split=Split.PDE, solve=False), small_cloud, small_sensors)
        assert pde.solutions is None
        assert not np.array_equal(train.kappa_sensors, pde.kappa_sensors)

    def test_save_and_load(self, tmp_path, small_cloud, small_sensors):
        dataset = generate_dataset(DatasetConfig(n_samples=2, seed=1), small_cloud, small_sensors)
        save_dataset(dataset, tmp_path)
        loaded = load_dataset(tmp_path)
        assert np.array_equal(loaded.kappa_sensors, dataset.kappa_sensors)
        assert np.array_equal(loaded.solutions, dataset.solutions)
        assert np.array_equal(loaded.cloud.points, small_cloud.points)
        assert loaded.seeds == dataset.seeds

    def test_load_missing(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_dataset(tmp_path)

    def test_semilinear_kappa_is_radial(self, small_cloud, small_sensors):
        dataset = generate_dataset(DatasetConfig(n_samples=2, problem=ProblemKind.SEMILINEAR, solve=False),
                                   small_cloud, small_sensors)
        ring = np.hypot(small_cloud.points[:, 0], small_cloud.points[:, 1])
        ratio = dataset.kappa_points / ring
        assert np.allclose(ratio, ratio[:, :1])
        assert np.all((ratio[:, 0] >= 0.5) & (ratio[:, 0] <= 1.5))
        assert dataset.families == ["semilinear", "semilinear"]

    def test_prior_dataset(self, small_grid):
        sensors = sensors_from_cloud(small_grid)
        dataset = generate_dataset(
            DatasetConfig(n_samples=2, problem=ProblemKind.PRIOR, solve=False),
            small_grid, sensors, kappa_sampler=lambda seed: np.full(small_grid.size, 1.0 + seed % 3),
        )
        assert np.array_equal(dataset.kappa_sensors, dataset.kappa_points)

    def test_subset_and_counts(self, small_cloud, small_sensors):
        dataset = generate_dataset(DatasetConfig(n_samples=4, family="mixed", solve=False), small_cloud, small_sensors)
        assert dataset.family_counts() == {"exponential": 1, "linear": 1, "piecewise": 1, "quadratic": 1}
        sub = dataset.subset([2, 0])
        assert sub.families == ["piecewise", "linear"]
        assert np.array_equal(sub.kappa_sensors[1], dataset.kappa_sensors[0])
        assert sorted(dataset.permuted(0).seeds) == sorted(dataset.seeds)

    def test_dirichlet_needs_a_semi_torus(self, small_cloud, small_sensors):
        with pytest.raises(ConfigurationError):
            generate_dataset(DatasetConfig(n_samples=1, problem=ProblemKind.DIRICHLET), small_cloud, small_sensors)

    def test_prior_needs_a_sampler(self, small_grid):
        with pytest.raises(ConfigurationError):
            generate_dataset(DatasetConfig(n_samples=1, problem=ProblemKind.PRIOR), small_grid,
                             sensors_from_cloud(small_grid))

    def test_needs_samples(self, small_cloud, small_sensors):
        with pytest.raises(ParameterError):
            generate_dataset(DatasetConfig(n_samples=0), small_cloud, small_sensors)

    def test_dirichlet_dataset(self, semi_torus_cloud):
        sensors = build_sensor_grid(ManifoldKind.SEMI_TORUS, 5, 5)
        dataset = generate_dataset(
            DatasetConfig(n_samples=1, problem=ProblemKind.DIRICHLET, boundary_source="unit", seed=3),
            semi_torus_cloud, sensors,
        )
        near = split_near_boundary(semi_torus_cloud, default_boundary_epsilon(semi_torus_cloud)).near_boundary
        assert near.size > 0
        assert np.allclose(dataset.solutions[0, near], 1.0, atol=1e-10)
