# src/operators/gmls.py
import logging
import math
from itertools import product
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from src.errors import ParameterError, StencilError
from src.geometry.neighbors import NeighborIndex, build_knn
from src.geometry.point_cloud import PointCloud
from src.operators.discrete_operator import DiscreteOperator, EstimatorKind, check_kappa, kappa_hash
from src.operators.stabilization import stabilize_row
from src.operators.tangent import tangent_bases

logger = logging.getLogger(__name__)

DEFAULT_DEGREE = 2
MAX_CONDITION = 1e13


def basis_size(degree_p: int, d: int = 2) -> int:
    """m = C(p + d, d)."""
    return math.comb(degree_p + d, d)


def default_stencil_size(degree_p: int = DEFAULT_DEGREE, d: int = 2) -> int:
    """K = ⌈3 m⌉."""
    return math.ceil(3 * basis_size(degree_p, d))


def monomial_exponents(degree_p: int, d: int = 2) -> np.ndarray:
    """All multi-indices with |α| ≤ p, constant first, ordered by total degree."""
    exps: List[Tuple[int, ...]] = [a for a in product(range(degree_p + 1), repeat=d) if sum(a) <= degree_p]
    exps.sort(key=lambda a: (sum(a), tuple(-x for x in a)))
    return np.array(exps, dtype=np.int64)


def vandermonde(z: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    """Φ[k, α] = Π_a z[k, a]^α_a."""
    return np.prod(z[:, None, :] ** exponents[None, :, :], axis=2)


def monomial_derivatives(z: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    """D[k, α, a] = ∂p_α/∂z_a at z[k]."""
    K, d = z.shape
    out = np.zeros((K, exponents.shape[0], d))
    for a in range(d):
        lowered = exponents.copy()
        lowered[:, a] = np.maximum(lowered[:, a] - 1, 0)
        out[:, :, a] = exponents[None, :, a] * vandermonde(z, lowered)
    return out


class GmlsStencils:
    """κ-independent GMLS stencil weights for every base point.

    For each base point the stencil carries the first rows of the gradient
    matrices G_ℓ (one per ambient coordinate) and the stabilized Laplacian row.
    """

    def __init__(
        self,
        cloud: PointCloud,
        knn: Optional[NeighborIndex] = None,
        K: Optional[int] = None,
        degree_p: int = DEFAULT_DEGREE,
        d: int = 2,
        stabilize: bool = True,
    ):
        if degree_p < 2:
            raise ParameterError(f"GMLS needs polynomial degree >= 2, got {degree_p}")
        m = basis_size(degree_p, d)
        K = default_stencil_size(degree_p, d) if K is None else int(K)
        if K <= m:
            raise ParameterError(f"stencil size K={K} must exceed the basis size m={m}")
        if K > cloud.size:
            raise ParameterError(f"stencil size K={K} exceeds the cloud size N={cloud.size}")
        if knn is None or knn.k < K:
            knn = build_knn(cloud, K)
        elif knn.k > K:
            knn = knn.truncated(K)

        self.K = K
        self.degree_p = degree_p
        self.d = d
        self.stencils = knn.lists
        self.exponents = monomial_exponents(degree_p, d)

        points = cloud.points
        frames = tangent_bases(points, knn, d)
        projectors = np.einsum("kai,kaj->kij", frames, frames)

        n, dim = points.shape
        self.gradient_rows = np.zeros((n, dim, K))
        self.laplacian_rows = np.zeros((n, K))
        self.unstabilized = 0
        for i in range(n):
            grads, lap, phi = self._stencil_weights(i, points, frames, projectors)
            self.gradient_rows[i] = grads
            if stabilize:
                row = stabilize_row(lap, phi)
                lap = row.weights
                self.unstabilized += int(not row.feasible)
            self.laplacian_rows[i] = lap

        logger.info(
            f"GMLS stencils ready: N={n}, K={K}, p={degree_p}, {self.unstabilized} rows left unstabilized"
        )

    def _stencil_weights(self, i, points, frames, projectors):
        idx = self.stencils[i]
        z = (points[idx] - points[i]) @ frames[i].T
        radius = np.sqrt((z ** 2).sum(axis=1).max())
        if radius == 0:
            raise StencilError(f"stencil of point {i} collapses to a single location", point_index=i)
        z_hat = z / radius

        phi = vandermonde(z_hat, self.exponents)
        normal = phi.T @ phi
        try:
            if np.linalg.cond(normal) > MAX_CONDITION:
                raise np.linalg.LinAlgError("ill-conditioned")
            fit = np.linalg.solve(normal, phi.T)
        except np.linalg.LinAlgError:
            logger.error(f"GMLS normal equations singular at point {i}")
            raise StencilError(f"normal-equation matrix ΦᵀΦ is singular at point {i}", point_index=i)

        # B[ℓ, k, α] = Σ_a (P_k t_a)_ℓ ∂_a p_α(z_k)
        tangents = np.einsum("kij,aj->kia", projectors[idx], frames[i])
        derivs = monomial_derivatives(z_hat, self.exponents) / radius
        b = np.einsum("kla,kpa->lkp", tangents, derivs)
        g = b @ fit  # (dim, K, K)

        grads = g[:, 0, :]
        lap = np.einsum("lk,lkj->j", grads, g)
        return grads, lap, phi

    @property
    def params(self) -> dict:
        return {"K": self.K, "degree_p": self.degree_p, "d": self.d}

    def _csr(self, rows: np.ndarray) -> sp.csr_matrix:
        n = rows.shape[0]
        indptr = np.arange(0, n * self.K + 1, self.K)
        matrix = sp.csr_matrix((rows.ravel(), self.stencils.ravel(), indptr), shape=(n, n))
        matrix.sort_indices()
        return matrix

    def laplacian(self) -> sp.csr_matrix:
        """Stabilized Δ^GMLS (no κ, no sign flip)."""
        return self._csr(self.laplacian_rows)

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Surface gradient at every base point, shape (N, n)."""
        return np.einsum("nlk,nk->nl", self.gradient_rows, values[self.stencils])

    def build(self, kappa_at_points: np.ndarray) -> DiscreteOperator:
        """Row i: −Σ_ℓ (G_ℓ κ)_i G_ℓ[i, :] − κ_i Δ[i, :]."""
        kappa = check_kappa(kappa_at_points, self.stencils.shape[0])
        grad_kappa = self.gradient(kappa)
        rows = -np.einsum("nl,nlk->nk", grad_kappa, self.gradient_rows) - kappa[:, None] * self.laplacian_rows
        return DiscreteOperator(
            matrix=self._csr(rows), estimator=EstimatorKind.GMLS, params=self.params, kappa_hash=kappa_hash(kappa)
        )


def gmls_laplacian(
    cloud: PointCloud,
    knn: Optional[NeighborIndex] = None,
    K: Optional[int] = None,
    degree_p: int = DEFAULT_DEGREE,
    stabilize: bool = True,
) -> sp.csr_matrix:
    """Stabilized GMLS Laplace–Beltrami matrix."""
    return GmlsStencils(cloud, knn, K, degree_p, stabilize=stabilize).laplacian()


def build_gmls_operator(
    cloud: PointCloud,
    knn: Optional[NeighborIndex],
    kappa_at_points: np.ndarray,
    K: Optional[int] = None,
    degree_p: int = DEFAULT_DEGREE,
) -> DiscreteOperator:
    """
    GMLS approximation of −div_g(κ grad_g ·).

    Args:
        cloud: point cloud
        knn: neighbour index with at least K entries per list (built when None)
        kappa_at_points: positive κ at the cloud points
        K: stencil size, default ⌈3 m⌉
        degree_p: polynomial degree, at least 2

    Returns:
        Sparse DiscreteOperator with K nonzeros per row
    """
    check_kappa(kappa_at_points, cloud.size)
    return GmlsStencils(cloud, knn, K, degree_p).build(kappa_at_points)
