# src/geometry/boundary.py
import logging
from dataclasses import dataclass

import numpy as np

from src.errors import ConfigurationError, ParameterError
from src.geometry.neighbors import median_spacing
from src.geometry.point_cloud import ManifoldKind, PointCloud

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundarySplit:
    """Partition of the cloud indices into interior and near-boundary sets."""

    interior: np.ndarray
    near_boundary: np.ndarray
    epsilon: float

    @property
    def size(self) -> int:
        return self.interior.size + self.near_boundary.size

    def interior_mask(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        mask[self.interior] = True
        return mask


def boundary_distance(cloud: PointCloud) -> np.ndarray:
    """
    Distance of every point to the manifold boundary.

    Semi-torus distances are analytic, (R + r cos θ) · min(φ, π − φ).
    Custom clouds use their boundary_distance_fn(points, intrinsic).
    Closed manifolds return +inf everywhere.
    """
    if cloud.kind == ManifoldKind.TORUS:
        return np.full(cloud.size, np.inf)
    if cloud.kind == ManifoldKind.SEMI_TORUS:
        if cloud.intrinsic is None:
            raise ConfigurationError("semi-torus boundary distance needs intrinsic coordinates")
        theta, phi = cloud.intrinsic[:, 0], cloud.intrinsic[:, 1]
        return (cloud.R + cloud.r * np.cos(theta)) * np.minimum(phi, np.pi - phi)
    if cloud.boundary_distance_fn is None:
        return np.full(cloud.size, np.inf)
    return np.asarray(cloud.boundary_distance_fn(cloud.points, cloud.intrinsic), dtype=np.float64)


def split_near_boundary(cloud: PointCloud, epsilon: float) -> BoundarySplit:
    """
    Split the cloud into X_eps (distance > epsilon) and its complement.

    Args:
        cloud: the point cloud
        epsilon: distance threshold

    Returns:
        BoundarySplit with sorted index arrays
    """
    if epsilon < 0:
        raise ParameterError(f"epsilon must be non-negative, got {epsilon}")

    distance = boundary_distance(cloud)
    near = distance <= epsilon
    split = BoundarySplit(
        interior=np.flatnonzero(~near), near_boundary=np.flatnonzero(near), epsilon=float(epsilon)
    )
    if split.interior.size == 0:
        logger.warning(f"Every point is within {epsilon:.3g} of the boundary")
    logger.info(f"Boundary split: {split.interior.size} interior, {split.near_boundary.size} near boundary")
    return split


def default_boundary_epsilon(cloud: PointCloud) -> float:
    """Twice the median nearest-neighbour spacing, used as a fill-distance estimate."""
    return 2.0 * median_spacing(cloud)
