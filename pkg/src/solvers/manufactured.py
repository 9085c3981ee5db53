# src/solvers/manufactured.py
"""Symbolic manufactured solutions on the torus metric diag(r², (R + r cos θ)²)."""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy

from src.solvers.semilinear import semilinear_source

logger = logging.getLogger(__name__)

THETA, PHI = sympy.symbols("theta phi", real=True)


def ambient_coordinates(R: float, r: float):
    """x, y, z of the torus embedding as sympy expressions in θ, φ."""
    ring = R + r * sympy.cos(THETA)
    return ring * sympy.cos(PHI), ring * sympy.sin(PHI), r * sympy.sin(THETA)


def divergence_form(kappa: sympy.Expr, u: sympy.Expr, R: float, r: float) -> sympy.Expr:
    """−div_g(κ grad_g u) with √g = r (R + r cos θ)."""
    ring = R + r * sympy.cos(THETA)
    sqrt_g = r * ring
    flux_theta = sqrt_g * kappa * sympy.diff(u, THETA) / r ** 2
    flux_phi = sqrt_g * kappa * sympy.diff(u, PHI) / ring ** 2
    return sympy.simplify(-(sympy.diff(flux_theta, THETA) + sympy.diff(flux_phi, PHI)) / sqrt_g)


def _vectorize(expr: sympy.Expr) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    fn = sympy.lambdify((THETA, PHI), expr, modules="numpy")

    def evaluate(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        phi = np.asarray(phi, dtype=np.float64)
        shape = np.broadcast(theta, phi).shape
        return np.broadcast_to(np.asarray(fn(theta, phi), dtype=np.float64), shape).copy()

    return evaluate


@dataclass
class ManufacturedProblem:
    """Closed-form κ and u with their exact operator image, evaluated pointwise.

    Attributes:
        kappa: κ(θ, φ)
        u: u(θ, φ)
        operator: −div_g(κ grad_g u)(θ, φ)
        expressions: the sympy expressions behind the callables
    """

    kappa: Callable[[np.ndarray, np.ndarray], np.ndarray]
    u: Callable[[np.ndarray, np.ndarray], np.ndarray]
    operator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    expressions: dict

    def rhs(self, theta: np.ndarray, phi: np.ndarray, c: float = 1.0) -> np.ndarray:
        """f = −div_g(κ grad_g u) + c u."""
        return self.operator(theta, phi) + c * self.u(theta, phi)

    def at(self, intrinsic: np.ndarray):
        """(κ, u, −div_g(κ grad_g u)) at an (N, 2) array of (θ, φ)."""
        theta, phi = intrinsic[:, 0], intrinsic[:, 1]
        return self.kappa(theta, phi), self.u(theta, phi), self.operator(theta, phi)


def manufacture(kappa: sympy.Expr, u: sympy.Expr, R: float = 2.0, r: float = 1.0) -> ManufacturedProblem:
    """
    Build a manufactured problem from sympy expressions in THETA, PHI.

    Args:
        kappa: diffusion coefficient expression
        u: solution expression
        R: major radius
        r: minor radius

    Returns:
        ManufacturedProblem with vectorized callables
    """
    image = divergence_form(kappa, u, R, r)
    logger.debug(f"Manufactured operator image: {image}")
    return ManufacturedProblem(
        kappa=_vectorize(kappa),
        u=_vectorize(u),
        operator=_vectorize(image),
        expressions={"kappa": kappa, "u": u, "operator": image},
    )


def laplace_beltrami_cos_theta(R: float = 2.0, r: float = 1.0) -> ManufacturedProblem:
    """κ ≡ 1, u = cos θ; the image is (R cos θ + r cos 2θ) / (r² (R + r cos θ))."""
    return manufacture(sympy.Integer(1), sympy.cos(THETA), R, r)


def semilinear_benchmark(a: float = 1.0, R: float = 2.0, r: float = 1.0) -> ManufacturedProblem:
    """κ = a (R + r cos θ), u = a cos θ; solves −div(κ grad u) + u = f(u, κ) exactly when R = 2, r = 1."""
    a = sympy.nsimplify(a)
    return manufacture(a * (R + r * sympy.cos(THETA)), a * sympy.cos(THETA), R, r)


def semilinear_defect(problem: ManufacturedProblem, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """−div(κ grad u) + u − f(u, κ) at the given angles; zero for an exact solution."""
    kappa = problem.kappa(theta, phi)
    u = problem.u(theta, phi)
    return problem.operator(theta, phi) + u - semilinear_source(u, kappa)
