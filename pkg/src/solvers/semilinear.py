# src/solvers/semilinear.py
import logging
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from src.errors import NewtonFailure, NonConvergenceError, ParameterError, ShapeError, SolverError
from src.operators.discrete_operator import DiscreteOperator, check_kappa
from src.solvers.forward import SolveMethod, SolveReport, solve_system

logger = logging.getLogger(__name__)

MIN_STEP = 2.0 ** -10

SourceFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def semilinear_source(u: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """f(u, κ) = 3/2 u² + u + 2κu − 1/2 κ²."""
    return 1.5 * u ** 2 + u + 2.0 * kappa * u - 0.5 * kappa ** 2


def semilinear_source_du(u: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """∂f/∂u = 3u + 1 + 2κ."""
    return 3.0 * u + 1.0 + 2.0 * kappa


def semilinear_residual(operator: DiscreteOperator, u: np.ndarray, kappa: np.ndarray,
                        source: SourceFn = semilinear_source) -> np.ndarray:
    """F(u) = L u + u − f(u, κ)."""
    return operator.apply(u) + u - source(u, kappa)


def _jacobian(operator: DiscreteOperator, u: np.ndarray, kappa: np.ndarray, source_du: SourceFn):
    return operator.shifted(1.0 - source_du(u, kappa))


def _newton_step(jacobian, residual: np.ndarray, u: np.ndarray) -> np.ndarray:
    try:
        method = SolveMethod.SPARSE_LU if sp.issparse(jacobian) and residual.size > 4096 else SolveMethod.DENSE_LU
        return -solve_system(jacobian, residual, method).solution
    except SolverError as e:
        logger.error(f"Newton Jacobian singular: {e}")
        raise NewtonFailure(f"Jacobian is singular: {e}", iterate=u) from e


def _line_search(operator, kappa, u, step, norm, source) -> Tuple[np.ndarray, np.ndarray, float]:
    t = 1.0
    while True:
        candidate = u + t * step
        residual = semilinear_residual(operator, candidate, kappa, source)
        candidate_norm = np.linalg.norm(residual)
        if candidate_norm < norm or t <= MIN_STEP:
            return candidate, residual, candidate_norm
        t *= 0.5


def solve_semilinear(
    operator: DiscreteOperator,
    kappa_at_points: np.ndarray,
    init: Optional[np.ndarray] = None,
    tol: float = 1e-10,
    max_iter: int = 50,
    source: SourceFn = semilinear_source,
    source_du: SourceFn = semilinear_source_du,
) -> SolveReport:
    """
    Newton iteration for L u + u = f(u, κ).

    Args:
        operator: operator built for the same κ
        kappa_at_points: κ at the cloud points
        init: starting iterate, zeros when None
        tol: stop when ‖F(u)‖₂ / √N < tol
        max_iter: Newton step limit
        source: f(u, κ)
        source_du: ∂f/∂u

    Returns:
        SolveReport with the per-step residual history
    """
    n = operator.size
    kappa = check_kappa(kappa_at_points, n)
    if max_iter < 1:
        raise ParameterError(f"max_iter must be positive, got {max_iter}")
    u = np.zeros(n) if init is None else np.array(init, dtype=np.float64)
    if u.shape != (n,):
        raise ShapeError(f"init must have shape ({n},), got {u.shape}")

    scale = np.sqrt(n)
    residual = semilinear_residual(operator, u, kappa, source)
    norm = np.linalg.norm(residual)
    history = [float(norm / scale)]

    iterations = 0
    while history[-1] >= tol:
        if iterations == max_iter:
            logger.error(f"Newton did not converge in {max_iter} steps (|F|/sqrt(N)={history[-1]:.3e})")
            raise NonConvergenceError(f"Newton did not converge in {max_iter} iterations", residual_history=history)
        step = _newton_step(_jacobian(operator, u, kappa, source_du), residual, u)
        u, residual, norm = _line_search(operator, kappa, u, step, norm, source)
        iterations += 1
        history.append(float(norm / scale))
        logger.debug(f"Newton step {iterations}: |F|/sqrt(N) = {history[-1]:.3e}")

    logger.info(f"Newton converged in {iterations} steps, |F|/sqrt(N) = {history[-1]:.3e}")
    return SolveReport(
        solution=u, residual_norm=float(norm), iterations=iterations, method=SolveMethod.NEWTON,
        residual_history=history,
    )
