# src/operators/diffusion_maps.py
import logging
import math

import numpy as np
import scipy.sparse as sp

from src.errors import DegenerateCloudError, ParameterError
from src.geometry.neighbors import NeighborIndex
from src.geometry.point_cloud import PointCloud
from src.operators.discrete_operator import DiscreteOperator, EstimatorKind, check_kappa, kappa_hash

logger = logging.getLogger(__name__)


def dm_neighbor_count(n: int) -> int:
    """Stencil size ⌈1.5 √N⌉, capped at N."""
    return min(n, max(1, math.ceil(1.5 * math.sqrt(n))))


def heat_kernel(s: np.ndarray, d: int) -> np.ndarray:
    """h(s) = exp(−s/4) / (4π)^{d/2}."""
    return np.exp(-s / 4.0) / (4.0 * np.pi) ** (d / 2.0)


class DiffusionMapsKernel:
    """κ-independent part of the Diffusion Maps estimator.

    Holds H_ij = ε^{−d/2−1} N^{−1} h(|x_i − x_j|²/ε) / Q_j on the symmetrized kNN
    support, so that W(κ) = diag(√κ) H diag(√κ) for any κ.
    """

    def __init__(self, cloud: PointCloud, knn: NeighborIndex, epsilon: float, d: int = 2):
        if epsilon <= 0:
            raise ParameterError(f"epsilon must be positive, got {epsilon}")
        if knn.size != cloud.size:
            raise ParameterError(f"neighbour index covers {knn.size} points, cloud has {cloud.size}")

        self.epsilon = float(epsilon)
        self.d = int(d)
        self.k = knn.k
        n = cloud.size

        rows, cols = knn.symmetric_pattern()
        diff = cloud.points[rows] - cloud.points[cols]
        sq = np.einsum("ij,ij->i", diff, diff)
        kernel = heat_kernel(sq / self.epsilon, self.d)

        k_matrix = sp.csr_matrix((kernel, (rows, cols)), shape=(n, n))
        self.q = self.epsilon ** (-self.d / 2.0) / n * np.asarray(k_matrix.sum(axis=1)).ravel()
        if np.any(self.q <= 0):
            bad = int(np.flatnonzero(self.q <= 0)[0])
            logger.error(f"Kernel density vanished at point {bad}")
            raise DegenerateCloudError(f"kernel density Q is zero at point {bad}; increase epsilon")

        scale = self.epsilon ** (-self.d / 2.0 - 1.0) / n
        self.h = (k_matrix @ sp.diags(scale / self.q)).tocsr()
        self.h.sort_indices()
        logger.info(f"DM kernel ready: N={n}, k={self.k}, eps={self.epsilon:.4g}, nnz={self.h.nnz}")

    @property
    def params(self) -> dict:
        return {"epsilon": self.epsilon, "d": self.d, "k": self.k}

    def affinity(self, kappa_at_points: np.ndarray) -> sp.csr_matrix:
        """W(κ) with W_ij = H_ij √(κ_i κ_j)."""
        kappa = check_kappa(kappa_at_points, self.h.shape[0])
        root = sp.diags(np.sqrt(kappa))
        return (root @ self.h @ root).tocsr()

    def build(self, kappa_at_points: np.ndarray) -> DiscreteOperator:
        """L = D − W with D_ii = Σ_j W_ij, assembled so the row sums cancel."""
        w = self.affinity(kappa_at_points)
        off = w - sp.diags(w.diagonal())
        off.eliminate_zeros()
        degree = np.asarray(off.sum(axis=1)).ravel()
        matrix = (sp.diags(degree) - off).tocsr()
        matrix.sort_indices()
        return DiscreteOperator(
            matrix=matrix,
            estimator=EstimatorKind.DM,
            params=self.params,
            kappa_hash=kappa_hash(kappa_at_points),
        )


def build_dm_operator(
    cloud: PointCloud,
    knn: NeighborIndex,
    kappa_at_points: np.ndarray,
    epsilon: float,
    d: int = 2,
) -> DiscreteOperator:
    """
    Diffusion Maps approximation of −div_g(κ grad_g ·).

    Args:
        cloud: point cloud
        knn: neighbour index defining the kernel support
        kappa_at_points: positive κ at the cloud points
        epsilon: kernel bandwidth
        d: intrinsic dimension

    Returns:
        Sparse DiscreteOperator with zero row sums
    """
    check_kappa(kappa_at_points, cloud.size)
    return DiffusionMapsKernel(cloud, knn, epsilon, d).build(kappa_at_points)
