# src/operators/tangent.py
import logging
from dataclasses import dataclass

import numpy as np

from src.errors import DegenerateStencilError, ParameterError
from src.geometry.neighbors import NeighborIndex
from src.geometry.point_cloud import PointCloud

logger = logging.getLogger(__name__)

FRAME_NEIGHBORS = 12
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class TangentFrame:
    base_index: int
    vectors: np.ndarray  # (d, n) orthonormal rows
    projector: np.ndarray  # (n, n)

    @property
    def normal_projector(self) -> np.ndarray:
        return np.eye(self.projector.shape[0]) - self.projector


def _principal_directions(neighbors: np.ndarray, d: int) -> np.ndarray:
    """Top-d right singular vectors of the centred neighbour block(s), shape (..., d, n)."""
    centred = neighbors - neighbors.mean(axis=-2, keepdims=True)
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    scale = np.maximum(s[..., :1], np.finfo(float).tiny)
    deficient = s[..., d - 1] <= RANK_TOLERANCE * scale[..., 0]
    if np.any(deficient):
        bad = int(np.flatnonzero(np.atleast_1d(deficient))[0])
        raise DegenerateStencilError(f"neighbourhood {bad} has rank < {d}; cannot fit a tangent plane")
    return vt[..., :d, :]


def estimate_tangent_frame(cloud: PointCloud, knn: NeighborIndex, base: int, d: int = 2) -> TangentFrame:
    """
    Local PCA tangent frame at one point.

    Args:
        cloud: point cloud
        knn: neighbour index; its lists define the local neighbourhood
        base: index of the base point
        d: intrinsic dimension

    Returns:
        TangentFrame with orthonormal vectors and P = Σ t tᵀ
    """
    if knn.k < d + 1:
        raise ParameterError(f"a {d}-dimensional frame needs at least {d + 1} neighbours, got {knn.k}")
    try:
        vectors = _principal_directions(cloud.points[knn.lists[base]], d)
    except DegenerateStencilError as e:
        raise DegenerateStencilError(f"point {base}: {e}") from e
    return TangentFrame(base_index=base, vectors=vectors, projector=vectors.T @ vectors)


def tangent_bases(points: np.ndarray, knn: NeighborIndex, d: int = 2) -> np.ndarray:
    """Tangent vectors at every point at once, shape (N, d, n)."""
    if knn.k < d + 1:
        raise ParameterError(f"a {d}-dimensional frame needs at least {d + 1} neighbours, got {knn.k}")
    bases = _principal_directions(points[knn.lists], d)
    logger.debug(f"Estimated {bases.shape[0]} tangent frames from {knn.k} neighbours")
    return bases


def tangent_projectors(points: np.ndarray, knn: NeighborIndex, d: int = 2) -> np.ndarray:
    """Projectors P_i = T_iᵀ T_i at every point, shape (N, n, n)."""
    bases = tangent_bases(points, knn, d)
    return np.einsum("kai,kaj->kij", bases, bases)
