import numpy as np
import pytest

from src.errors import DegenerateProblemError, NonConvergenceError, ParameterError, ShapeError
from src.geometry.boundary import default_boundary_epsilon, split_near_boundary
from src.geometry.point_cloud import ManifoldKind, sample_cloud
from src.operators.assembly import EstimatorSettings, OperatorFactory
from src.operators.discrete_operator import EstimatorKind
from src.solvers.forward import ForwardProblem, SolveMethod, save_solution, solve_dirichlet, solve_linear, solve_system
from src.solvers.manufactured import laplace_beltrami_cos_theta, semilinear_benchmark, semilinear_defect
from src.solvers.semilinear import semilinear_residual, semilinear_source, solve_semilinear


@pytest.fixture(scope="module")
def dm_operator(torus_cloud):
    theta = torus_cloud.intrinsic[:, 0]
    kappa = 2.0 + np.cos(theta)
    operator = OperatorFactory(torus_cloud, EstimatorSettings(kind=EstimatorKind.DM)).build(kappa)
    return operator, kappa


@pytest.fixture(scope="module")
def semi_torus_operator(semi_torus_cloud):
    return OperatorFactory(semi_torus_cloud, EstimatorSettings(kind=EstimatorKind.DM)).build(
        np.ones(semi_torus_cloud.size)
    )


class TestForwardProblem:
    def test_nonpositive_c(self, dm_operator):
        operator, _ = dm_operator
        with pytest.raises(ParameterError):
            ForwardProblem(operator, 0.0, np.ones(operator.size))

    def test_vector_c_must_match(self, dm_operator):
        operator, _ = dm_operator
        with pytest.raises(ShapeError):
            ForwardProblem(operator, np.ones(3), np.ones(operator.size))

    def test_rhs_shape(self, dm_operator):
        operator, _ = dm_operator
        with pytest.raises(ShapeError):
            ForwardProblem(operator, 1.0, np.ones(operator.size + 1))


class TestSolveLinear:
    def test_residual_is_small(self, dm_operator):
        operator, _ = dm_operator
        f = np.random.default_rng(0).normal(size=operator.size)
        report = solve_linear(ForwardProblem(operator, 1.0, f), SolveMethod.DENSE_LU)
        assert report.residual_norm <= 1e-8 * np.linalg.norm(f)
        assert report.condition_estimate is not None

    def test_methods_agree(self, dm_operator):
        operator, _ = dm_operator
        f = np.random.default_rng(1).normal(size=operator.size)
        problem = ForwardProblem(operator, 1.0, f)
        dense = solve_linear(problem, SolveMethod.DENSE_LU).solution
        sparse = solve_linear(problem, SolveMethod.SPARSE_LU).solution
        iterative = solve_linear(problem, SolveMethod.ITERATIVE).solution
        assert np.allclose(dense, sparse, rtol=1e-9, atol=1e-10)
        assert np.linalg.norm(iterative - dense) <= 1e-6 * np.linalg.norm(dense)

    def test_zero_rhs(self, dm_operator):
        operator, _ = dm_operator
        report = solve_linear(ForwardProblem(operator, 1.0, np.zeros(operator.size)))
        assert np.array_equal(report.solution, np.zeros(operator.size))

    def test_constant_solution(self, dm_operator):
        # L annihilates constants, so (L + c) 1 = c
        operator, _ = dm_operator
        report = solve_linear(ForwardProblem(operator, 2.0, np.full(operator.size, 2.0)), SolveMethod.SPARSE_LU)
        assert np.allclose(report.solution, 1.0, atol=1e-8)

    def test_rejects_boundary_problems(self, semi_torus_cloud, semi_torus_operator):
        split = split_near_boundary(semi_torus_cloud, default_boundary_epsilon(semi_torus_cloud))
        problem = ForwardProblem(semi_torus_operator, 1.0, np.ones(semi_torus_cloud.size), split,
                                 np.zeros(semi_torus_cloud.size))
        with pytest.raises(ParameterError):
            solve_linear(problem)

    def test_newton_is_not_a_linear_method(self, dm_operator):
        operator, _ = dm_operator
        with pytest.raises(ParameterError):
            solve_system(operator.shifted(1.0), np.ones(operator.size), SolveMethod.NEWTON)

    def test_save_solution(self, tmp_path, dm_operator):
        operator, _ = dm_operator
        report = solve_linear(ForwardProblem(operator, 1.0, np.ones(operator.size)))
        path = save_solution(report, tmp_path, extra={"estimator": "dm"})
        table = np.loadtxt(path, delimiter=",", skiprows=1)
        assert np.array_equal(table[:, 1], report.solution)
        assert (tmp_path / "solution.json").exists()


class TestSolveDirichlet:
    def test_boundary_rows_are_exact(self, semi_torus_cloud, semi_torus_operator):
        split = split_near_boundary(semi_torus_cloud, default_boundary_epsilon(semi_torus_cloud))
        g = np.sin(semi_torus_cloud.intrinsic[:, 0])
        f = np.ones(semi_torus_cloud.size)
        report = solve_dirichlet(ForwardProblem(semi_torus_operator, 1.0, f, split, g), SolveMethod.DENSE_LU)
        near = split.near_boundary
        assert np.allclose(report.solution[near], g[near], rtol=0.0, atol=1e-10)
        assert report.residual_norm <= 1e-8 * np.linalg.norm(f)

    def test_boundary_values_per_near_point(self, semi_torus_cloud, semi_torus_operator):
        split = split_near_boundary(semi_torus_cloud, default_boundary_epsilon(semi_torus_cloud))
        g_near = np.full(split.near_boundary.size, 3.0)
        report = solve_dirichlet(
            ForwardProblem(semi_torus_operator, 1.0, np.ones(semi_torus_cloud.size), split, g_near)
        )
        assert np.allclose(report.solution[split.near_boundary], 3.0, atol=1e-10)

    def test_empty_interior_returns_boundary_data(self, semi_torus_cloud, semi_torus_operator):
        split = split_near_boundary(semi_torus_cloud, 100.0)
        g = np.linspace(0.0, 1.0, semi_torus_cloud.size)
        problem = ForwardProblem(semi_torus_operator, 1.0, np.ones(semi_torus_cloud.size), split, g)
        assert np.array_equal(solve_dirichlet(problem).solution, g)
        with pytest.raises(DegenerateProblemError):
            solve_dirichlet(problem, allow_empty_interior=False)

    def test_needs_boundary_data(self, semi_torus_operator, semi_torus_cloud):
        with pytest.raises(ParameterError):
            solve_dirichlet(ForwardProblem(semi_torus_operator, 1.0, np.ones(semi_torus_cloud.size)))


class TestManufactured:
    def test_cos_theta_image(self):
        problem = laplace_beltrami_cos_theta()
        theta = np.linspace(0.0, 2 * np.pi, 17)
        phi = np.zeros_like(theta)
        expected = (2.0 * np.cos(theta) + np.cos(2 * theta)) / (2.0 + np.cos(theta))
        assert np.allclose(problem.operator(theta, phi), expected, atol=1e-12)

    @pytest.mark.parametrize("a", [0.5, 1.0, 1.3])
    def test_semilinear_benchmark_is_exact(self, a):
        problem = semilinear_benchmark(a)
        theta, phi = np.meshgrid(np.linspace(0, 2 * np.pi, 9), np.linspace(0, 2 * np.pi, 5))
        assert np.abs(semilinear_defect(problem, theta, phi)).max() < 1e-12

    def test_rhs_adds_the_shift(self):
        problem = laplace_beltrami_cos_theta()
        theta = np.array([0.3])
        assert problem.rhs(theta, theta, c=2.0) == pytest.approx(problem.operator(theta, theta) + 2.0 * np.cos(0.3))


class TestSolveSemilinear:
    def test_recovers_a_discrete_solution(self, torus_cloud, dm_operator):
        operator, kappa = dm_operator
        theta = torus_cloud.intrinsic[:, 0]
        exact = -2.0 - 0.2 * np.cos(theta)
        shift = semilinear_residual(operator, exact, kappa)

        def source(u, k):
            return semilinear_source(u, k) + shift

        init = exact + 0.1 * np.sin(theta)
        report = solve_semilinear(operator, kappa, init=init, source=source)
        assert report.residual_history[-1] < 1e-10
        assert np.allclose(report.solution, exact, atol=1e-8)
        assert report.iterations >= 1
        assert report.method == SolveMethod.NEWTON

    def test_exact_start_takes_no_steps(self, torus_cloud, dm_operator):
        operator, kappa = dm_operator
        exact = -2.0 - 0.2 * np.cos(torus_cloud.intrinsic[:, 0])
        shift = semilinear_residual(operator, exact, kappa)
        report = solve_semilinear(operator, kappa, init=exact,
                                  source=lambda u, k: semilinear_source(u, k) + shift)
        assert report.iterations == 0

    def test_iteration_limit(self, dm_operator):
        operator, kappa = dm_operator
        with pytest.raises(NonConvergenceError) as excinfo:
            solve_semilinear(operator, kappa, tol=1e-300, max_iter=1)
        assert len(excinfo.value.residual_history) == 2

    def test_invalid_arguments(self, dm_operator):
        operator, kappa = dm_operator
        with pytest.raises(ParameterError):
            solve_semilinear(operator, kappa, max_iter=0)
        with pytest.raises(ShapeError):
            solve_semilinear(operator, kappa, init=np.zeros(4))

    @pytest.mark.slow
    def test_manufactured_cos_theta(self):
        cloud = sample_cloud(ManifoldKind.TORUS, 2500, seed=0)
        theta = cloud.intrinsic[:, 0]
        problem = semilinear_benchmark(1.0)
        kappa = problem.kappa(theta, cloud.intrinsic[:, 1])
        operator = OperatorFactory(cloud, EstimatorSettings(kind=EstimatorKind.DM)).build(kappa)
        report = solve_semilinear(operator, kappa, init=np.cos(theta) + 0.1 * np.sin(theta))
        exact = np.cos(theta)
        assert report.iterations <= 10
        assert np.linalg.norm(report.solution - exact) / np.linalg.norm(exact) < 0.05
