# src/inversion/prior.py
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from src.errors import ParameterError, ShapeError
from src.geometry.neighbors import build_knn
from src.geometry.point_cloud import PointCloud
from src.operators.bandwidth import tune_epsilon

logger = logging.getLogger(__name__)

PRIOR_NEIGHBORS = 16
DEFAULT_TAU = 0.08
DEFAULT_S = 6.0
CONNECTIVITY_TOL = 1e-8


class KlExponent(str, Enum):
    """Exponent on (τ + λ_i) in the Karhunen–Loève coefficients.

    HALF gives −s/2, consistent with covariance c_N (τI + Δ_N)^{−s};
    PRINTED gives −s.
    """

    HALF = "half"
    PRINTED = "printed"


@dataclass(frozen=True)
class GaussianPrior:
    """Graph Matérn prior N(0, c_N (τI + Δ_N)^{−s}) on a point cloud."""

    laplacian: sp.csr_matrix
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    tau: float
    s_exponent: float
    c_n: float
    kl_exponent: KlExponent = KlExponent.HALF
    epsilon: float = float("nan")
    connected: bool = True

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    @property
    def coefficients(self) -> np.ndarray:
        """c_N^{1/2} (τ + λ_i)^{−e} with e = s/2 or s."""
        exponent = self.s_exponent / 2.0 if self.kl_exponent == KlExponent.HALF else self.s_exponent
        shifted = self.tau + np.clip(self.eigenvalues, 0.0, None)
        return np.sqrt(self.c_n) * shifted ** (-exponent)

    def covariance(self) -> np.ndarray:
        """Covariance implied by the sampler, Σ_i coef_i² φ_i φ_iᵀ."""
        return (self.eigenvectors * self.coefficients ** 2) @ self.eigenvectors.T


def normalizer(eigenvalues: np.ndarray, tau: float, s_exponent: float) -> float:
    """c_N = N / Σ_i (τ + λ_i)^{−s}."""
    shifted = tau + np.clip(np.asarray(eigenvalues, dtype=np.float64), 0.0, None)
    return float(eigenvalues.size / np.sum(shifted ** (-s_exponent)))


def graph_laplacian(cloud: PointCloud, neighbors: int = PRIOR_NEIGHBORS, epsilon: Optional[float] = None):
    """
    Unnormalized symmetric kNN graph Laplacian D − W with Gaussian edge weights.

    Args:
        cloud: point cloud
        neighbors: graph degree before symmetrization
        epsilon: kernel bandwidth in exp(−|x_i − x_j|²/(4ε)); from the bandwidth sweep when omitted

    Returns:
        (Laplacian as CSR, ε)
    """
    n = cloud.size
    k = min(neighbors + 1, n)
    knn = build_knn(cloud, k)
    if epsilon is None:
        epsilon = tune_epsilon(cloud, knn).chosen_epsilon
    rows = np.repeat(np.arange(n), k - 1)
    cols = knn.lists[:, 1:].ravel()
    weights = np.exp(-knn.distances[:, 1:].ravel() / (4.0 * epsilon))
    adjacency = sp.csr_matrix((weights, (rows, cols)), shape=(n, n))
    adjacency = 0.5 * (adjacency + adjacency.T)
    degree = np.asarray(adjacency.sum(axis=1)).ravel()
    return (sp.diags(degree) - adjacency).tocsr(), float(epsilon)


def build_prior(
    cloud: PointCloud,
    neighbors: int = PRIOR_NEIGHBORS,
    tau: float = DEFAULT_TAU,
    s_exponent: float = DEFAULT_S,
    kl_exponent: KlExponent = KlExponent.HALF,
    epsilon: Optional[float] = None,
) -> GaussianPrior:
    """
    Build the graph Matérn prior with a full symmetric eigendecomposition.

    Args:
        cloud: point cloud
        neighbors: kNN graph degree (16)
        tau: τ > 0
        s_exponent: s > d/2
        kl_exponent: HALF (covariance-consistent) or PRINTED
        epsilon: graph bandwidth override

    Returns:
        GaussianPrior
    """
    if tau <= 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    if s_exponent <= cloud.intrinsic_dim / 2.0:
        raise ParameterError(f"s must exceed d/2 = {cloud.intrinsic_dim / 2.0}, got {s_exponent}")

    laplacian, epsilon = graph_laplacian(cloud, neighbors, epsilon)
    eigenvalues, eigenvectors = la.eigh(laplacian.toarray())
    if eigenvalues.min() < -1e-10:
        logger.warning(f"Graph Laplacian has a negative eigenvalue {eigenvalues.min():.3e}")
    connected = bool(eigenvalues.size < 2 or eigenvalues[1] > CONNECTIVITY_TOL)
    if not connected:
        logger.warning(f"Prior graph looks disconnected (lambda_2 = {eigenvalues[1]:.3e})")

    prior = GaussianPrior(
        laplacian=laplacian,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        tau=float(tau),
        s_exponent=float(s_exponent),
        c_n=normalizer(eigenvalues, tau, s_exponent),
        kl_exponent=KlExponent(kl_exponent),
        epsilon=epsilon,
        connected=connected,
    )
    logger.info(f"Prior ready: N={cloud.size}, tau={tau}, s={s_exponent}, c_N={prior.c_n:.4e}, "
                f"kl={prior.kl_exponent.value}")
    return prior


def sample_prior(prior: GaussianPrior, seed: Optional[int] = None, xi: Optional[np.ndarray] = None) -> np.ndarray:
    """
    α = Σ_i coef_i ξ_i φ_i.

    Args:
        prior: the prior
        seed: seed for ξ ~ N(0, I)
        xi: explicit KL coordinates instead of a seed

    Returns:
        α at the cloud points
    """
    if xi is None:
        xi = np.random.default_rng(seed).standard_normal(prior.size)
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (prior.size,):
        raise ShapeError(f"xi must have shape ({prior.size},), got {xi.shape}")
    return prior.eigenvectors @ (prior.coefficients * xi)


def kappa_sampler(prior: GaussianPrior) -> Callable[[int], np.ndarray]:
    """seed → κ = e^α at the cloud points, for prior-family datasets."""
    return lambda seed: np.exp(sample_prior(prior, seed))
