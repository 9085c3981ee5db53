# src/solvers/forward.py
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from config.config import Config
from src.errors import DegenerateProblemError, NonConvergenceError, ParameterError, ShapeError, SolverError
from src.geometry.boundary import BoundarySplit
from src.operators.discrete_operator import DiscreteOperator, Matrix

logger = logging.getLogger(__name__)

SINGULAR_RCOND = np.finfo(np.float64).eps


class SolveMethod(str, Enum):
    AUTO = "auto"
    DENSE_LU = "dense-lu"
    SPARSE_LU = "sparse-lu"
    ITERATIVE = "iterative"
    NEWTON = "newton"


@dataclass
class ForwardProblem:
    """(L + cI) u = f, optionally with near-boundary Dirichlet rows.

    Attributes:
        operator: discrete approximation of −div_g(κ grad_g ·)
        c: positive scalar or per-point vector
        f_values: right-hand side at the cloud points
        boundary: near-boundary split, only for manifolds with boundary
        g_values: Dirichlet data g̃, either length N or one value per near-boundary point
    """

    operator: DiscreteOperator
    c: Union[float, np.ndarray]
    f_values: np.ndarray
    boundary: Optional[BoundarySplit] = None
    g_values: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.operator.size
        self.f_values = np.asarray(self.f_values, dtype=np.float64)
        if self.f_values.shape != (n,):
            raise ShapeError(f"f must have shape ({n},), got {self.f_values.shape}")
        c = np.asarray(self.c, dtype=np.float64)
        if c.ndim > 0 and c.shape != (n,):
            raise ShapeError(f"c must be a scalar or have shape ({n},)")
        if np.any(c <= 0):
            raise ParameterError("c must be positive everywhere")
        if self.boundary is not None and self.boundary.size != n:
            raise ShapeError(f"boundary split covers {self.boundary.size} points, operator has {n}")

    @property
    def size(self) -> int:
        return self.operator.size

    def system_matrix(self) -> Matrix:
        return self.operator.shifted(self.c)

    def boundary_values(self) -> np.ndarray:
        """g̃ restricted to the near-boundary points."""
        if self.boundary is None or self.g_values is None:
            raise ParameterError("Dirichlet solve needs a boundary split and g values")
        g = np.asarray(self.g_values, dtype=np.float64)
        near = self.boundary.near_boundary
        if g.shape == (self.size,):
            return g[near]
        if g.shape == (near.size,):
            return g
        raise ShapeError(f"g must have length N={self.size} or {near.size}, got {g.shape}")


@dataclass
class SolveReport:
    solution: np.ndarray
    residual_norm: float
    iterations: int
    method: SolveMethod
    residual_history: List[float] = field(default_factory=list)
    condition_estimate: Optional[float] = None

    def manifest(self) -> Dict[str, object]:
        return {
            "method": self.method.value,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "condition_estimate": self.condition_estimate,
        }


def _dense_lu(matrix: np.ndarray, rhs: np.ndarray):
    a = np.asarray(matrix, dtype=np.float64)
    anorm = np.linalg.norm(a, 1)
    lu, piv = la.lu_factor(a, check_finite=True)
    rcond, _ = la.lapack.dgecon(lu, anorm, norm="1")
    if not rcond > SINGULAR_RCOND:
        condition = np.inf if rcond == 0 else 1.0 / rcond
        logger.error(f"Dense system is singular to working precision (cond ~ {condition:.3g})")
        raise SolverError(f"system matrix is singular (condition estimate {condition:.3g})", condition)
    return la.lu_solve((lu, piv), rhs), 1.0 / rcond


def _sparse_lu(matrix: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    try:
        return spla.splu(sp.csc_matrix(matrix)).solve(rhs)
    except RuntimeError as e:
        logger.error(f"Sparse LU failed: {e}")
        raise SolverError(f"sparse LU factorization failed: {e}") from e


def _iterative(matrix: Matrix, rhs: np.ndarray, rtol: float, maxiter: Optional[int]):
    a = sp.csr_matrix(matrix)
    diagonal = a.diagonal()
    if np.any(diagonal == 0):
        diagonal = np.where(diagonal == 0, 1.0, diagonal)
    jacobi = spla.LinearOperator(a.shape, matvec=lambda v: v / diagonal, dtype=np.float64)

    history: List[float] = []
    rhs_norm = np.linalg.norm(rhs)

    def record(xk):
        history.append(float(np.linalg.norm(rhs - a @ xk) / rhs_norm))

    x, info = spla.bicgstab(a, rhs, rtol=rtol, atol=0.0, maxiter=maxiter, M=jacobi, callback=record)
    if info > 0:
        logger.error(f"BiCGSTAB stalled after {info} iterations")
        raise NonConvergenceError(f"iterative solve did not reach rtol={rtol:g}", residual_history=history)
    if info < 0:
        raise SolverError(f"iterative solve broke down (info={info})")
    return x, history


def solve_system(matrix: Matrix, rhs: np.ndarray, method: SolveMethod = SolveMethod.AUTO,
                 rtol: Optional[float] = None, maxiter: Optional[int] = None) -> SolveReport:
    """
    Solve a square linear system with the requested method.

    AUTO picks dense LU up to MOL_DENSE_SOLVE_CAP unknowns and BiCGSTAB with a
    Jacobi preconditioner above it.
    """
    config = Config()
    method = SolveMethod(method)
    n = rhs.shape[0]
    if method == SolveMethod.AUTO:
        method = SolveMethod.DENSE_LU if n <= config.DENSE_SOLVE_CAP else SolveMethod.ITERATIVE
    rtol = config.ITERATIVE_RTOL if rtol is None else rtol

    history: List[float] = []
    condition = None
    iterations = 1
    if not np.any(rhs):
        solution = np.zeros(n)
    elif method == SolveMethod.DENSE_LU:
        dense = matrix.toarray() if sp.issparse(matrix) else matrix
        solution, condition = _dense_lu(dense, rhs)
    elif method == SolveMethod.SPARSE_LU:
        solution = _sparse_lu(matrix, rhs)
    elif method == SolveMethod.ITERATIVE:
        solution, history = _iterative(matrix, rhs, rtol, maxiter)
        iterations = len(history)
    else:
        raise ParameterError(f"{method.value} is not a linear solve method")

    residual = float(np.linalg.norm(matrix @ solution - rhs))
    return SolveReport(
        solution=solution, residual_norm=residual, iterations=iterations, method=method,
        residual_history=history, condition_estimate=condition,
    )


def solve_linear(problem: ForwardProblem, method: SolveMethod = SolveMethod.AUTO) -> SolveReport:
    """
    Solve (L + cI) u = f on a closed manifold.

    Args:
        problem: forward problem without a boundary block
        method: AUTO, DENSE_LU, SPARSE_LU or ITERATIVE

    Returns:
        SolveReport with the residual ‖(L + cI) u − f‖₂
    """
    if problem.boundary is not None and problem.boundary.near_boundary.size:
        raise ParameterError("problem has near-boundary points; use solve_dirichlet")
    report = solve_system(problem.system_matrix(), problem.f_values, method)
    logger.debug(
        f"Linear solve ({report.method.value}): N={problem.size}, residual={report.residual_norm:.3e}"
    )
    return report


def solve_dirichlet(problem: ForwardProblem, method: SolveMethod = SolveMethod.AUTO,
                    allow_empty_interior: bool = True) -> SolveReport:
    """
    Solve with identity rows on the near-boundary set.

    Args:
        problem: forward problem with boundary split and g̃
        method: linear solve method
        allow_empty_interior: when every point is near the boundary, return g̃
            instead of raising DegenerateProblemError

    Returns:
        SolveReport whose residual covers interior rows only
    """
    g_near = problem.boundary_values()
    interior = problem.boundary.interior
    near = problem.boundary.near_boundary
    n = problem.size

    if interior.size == 0:
        if not allow_empty_interior:
            logger.error("Dirichlet problem has no interior unknowns")
            raise DegenerateProblemError("every point lies within epsilon of the boundary")
        logger.warning("No interior points; the solution is the boundary data")
        solution = np.zeros(n)
        solution[near] = g_near
        return SolveReport(solution=solution, residual_norm=0.0, iterations=0, method=SolveMethod(method))

    matrix = problem.system_matrix()
    keep = np.zeros(n)
    keep[interior] = 1.0
    replaced = np.zeros(n)
    replaced[near] = 1.0
    if sp.issparse(matrix):
        system = (sp.diags(keep) @ matrix + sp.diags(replaced)).tocsr()
    else:
        system = keep[:, None] * matrix + np.diag(replaced)

    rhs = problem.f_values.copy()
    rhs[near] = g_near
    report = solve_system(system, rhs, method)
    full_residual = matrix @ report.solution - problem.f_values
    report.residual_norm = float(np.linalg.norm(full_residual[interior]))
    logger.debug(
        f"Dirichlet solve ({report.method.value}): {interior.size} interior, {near.size} near boundary, "
        f"residual={report.residual_norm:.3e}"
    )
    return report


def save_solution(report: SolveReport, directory: Path, stem: str = "solution",
                  extra: Optional[Dict[str, object]] = None) -> Path:
    """Write `idx,u` CSV plus a JSON manifest (method, residual, iterations and any extras)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{stem}.csv"
    table = np.column_stack([np.arange(report.solution.size), report.solution])
    np.savetxt(path, table, delimiter=",", header="idx,u", comments="", fmt=["%d", "%.17g"])

    manifest = report.manifest()
    manifest.update(extra or {})
    with open(directory / f"{stem}.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    logger.info(f"Saved solution to {path}")
    return path
