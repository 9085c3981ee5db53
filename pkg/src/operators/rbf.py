# src/operators/rbf.py
import logging
from typing import Optional

import numpy as np
import scipy.linalg as la
from scipy.spatial.distance import cdist

from config.config import Config
from src.errors import ConditioningError, ParameterError
from src.geometry.neighbors import build_knn, median_spacing
from src.geometry.point_cloud import PointCloud
from src.operators.discrete_operator import DiscreteOperator, EstimatorKind, check_kappa, kappa_hash
from src.operators.tangent import FRAME_NEIGHBORS, tangent_projectors

logger = logging.getLogger(__name__)

DEFAULT_PINV_TOL = 1e-6


def inverse_quadratic(t: np.ndarray, shape_s: float) -> np.ndarray:
    """φ_s(t) = 1 / (1 + (s t)²)."""
    return 1.0 / (1.0 + (shape_s * t) ** 2)


def default_shape(cloud: PointCloud) -> float:
    """s = 1 / (2 · median nearest-neighbour distance)."""
    return 1.0 / (2.0 * median_spacing(cloud))


class RbfDifferentiation:
    """Global RBF interpolation differentiated through tangent projectors.

    Precomputes the dense gradient matrices G_ℓ = B_ℓ Φ⁺ (ℓ over ambient
    coordinates), which do not depend on κ.
    """

    def __init__(
        self,
        cloud: PointCloud,
        shape_s: Optional[float] = None,
        pinv_tol: float = DEFAULT_PINV_TOL,
        frame_neighbors: int = FRAME_NEIGHBORS,
        d: int = 2,
    ):
        self.config = Config()
        n = cloud.size
        if n > self.config.RBF_DENSE_CAP:
            logger.error(f"RBF requested for N={n} above the dense cap {self.config.RBF_DENSE_CAP}")
            raise ParameterError(
                f"RBF operators are dense; N={n} exceeds the cap of {self.config.RBF_DENSE_CAP} (MOL_RBF_DENSE_CAP)"
            )
        self.shape_s = default_shape(cloud) if shape_s is None else float(shape_s)
        if self.shape_s <= 0:
            raise ParameterError(f"shape parameter must be positive, got {self.shape_s}")
        self.pinv_tol = float(pinv_tol)

        points = cloud.points
        distance = cdist(points, points)
        phi = inverse_quadratic(distance, self.shape_s)
        self.phi_pinv, self.rank = la.pinv(phi, atol=self.pinv_tol, rtol=0.0, return_rank=True)
        if self.rank == 0:
            logger.error("RBF interpolation matrix is numerically rank zero")
            raise ConditioningError(f"interpolation matrix has rank 0 at tolerance {self.pinv_tol:g}")
        self._phi = phi

        knn = build_knn(points, min(n, frame_neighbors))
        projectors = tangent_projectors(points, knn, d)

        # d/dx φ_s(|x − x_j|) at x = x_i is −2 s² (x_i − x_j) / (1 + s² t²)²
        radial = -2.0 * self.shape_s ** 2 * phi ** 2
        dim = points.shape[1]
        b = np.zeros((dim, n, n))
        for m in range(dim):
            ambient = radial * (points[:, m, None] - points[None, :, m])
            for ell in range(dim):
                b[ell] += projectors[:, ell, m, None] * ambient
        self.gradients = np.stack([b[ell] @ self.phi_pinv for ell in range(dim)])

        logger.info(f"RBF differentiation ready: N={n}, s={self.shape_s:.4g}, rank={self.rank}")

    @property
    def params(self) -> dict:
        return {"shape_s": self.shape_s, "pinv_tol": self.pinv_tol, "rank": int(self.rank)}

    def interpolate(self, values: np.ndarray) -> np.ndarray:
        """Interpolant of the data evaluated back at the nodes, Φ Φ⁺ f."""
        return self._phi @ (self.phi_pinv @ values)

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Surface gradient at the nodes, shape (N, n)."""
        return np.einsum("lij,j->il", self.gradients, values)

    def build(self, kappa_at_points: np.ndarray) -> DiscreteOperator:
        """L = −Σ_ℓ G_ℓ diag(κ) G_ℓ (dense)."""
        kappa = check_kappa(kappa_at_points, self.gradients.shape[1])
        matrix = -sum((g * kappa[None, :]) @ g for g in self.gradients)
        return DiscreteOperator(
            matrix=matrix, estimator=EstimatorKind.RBF, params=self.params, kappa_hash=kappa_hash(kappa)
        )


def build_rbf_operator(
    cloud: PointCloud,
    kappa_at_points: np.ndarray,
    shape_s: Optional[float] = None,
    pinv_tol: float = DEFAULT_PINV_TOL,
) -> DiscreteOperator:
    """
    RBF projection approximation of −div_g(κ grad_g ·).

    Args:
        cloud: point cloud (N at most MOL_RBF_DENSE_CAP)
        kappa_at_points: positive κ at the cloud points
        shape_s: inverse-quadratic shape parameter; default from the node spacing
        pinv_tol: absolute singular-value cut of the pseudo-inverse

    Returns:
        Dense DiscreteOperator
    """
    check_kappa(kappa_at_points, cloud.size)
    return RbfDifferentiation(cloud, shape_s, pinv_tol).build(kappa_at_points)
