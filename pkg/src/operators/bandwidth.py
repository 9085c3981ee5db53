# src/operators/bandwidth.py
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.errors import DiagnosticsError, ParameterError
from src.geometry.neighbors import NeighborIndex
from src.geometry.point_cloud import PointCloud

logger = logging.getLogger(__name__)

SLOPE_TOLERANCE = 0.05


def default_epsilon_grid(num: int = 121) -> np.ndarray:
    """Log-spaced candidates over [2^-14, 10]."""
    return np.geomspace(2.0 ** -14, 10.0, num)


@dataclass(frozen=True)
class BandwidthReport:
    epsilon_grid: np.ndarray
    log_s: np.ndarray
    slopes: np.ndarray
    chosen_epsilon: float
    estimated_d: int

    @property
    def max_slope(self) -> float:
        return float(self.slopes.max())

    @property
    def argmax_epsilon(self) -> float:
        return float(self.epsilon_grid[np.argmax(self.slopes)])


def kernel_sum(knn: NeighborIndex, epsilon_grid: np.ndarray) -> np.ndarray:
    """Monte Carlo S(ε): mean of exp(−|x_i − x_j|²/(4ε)) over every kNN pair."""
    sq = knn.distances.ravel()
    return np.array([np.mean(np.exp(-sq / (4.0 * eps))) for eps in epsilon_grid])


def tune_epsilon(
    cloud: PointCloud,
    knn: NeighborIndex,
    grid: Optional[np.ndarray] = None,
    d: Optional[int] = None,
) -> BandwidthReport:
    """
    Pick the Diffusion Maps bandwidth from the log-log slope of S(ε).

    Args:
        cloud: point cloud the index was built on
        knn: neighbour index
        grid: candidate ε values (at least three decades); defaults to [2^-14, 10]
        d: target intrinsic dimension; the estimated one when omitted

    Returns:
        BandwidthReport with the chosen ε and the dimension estimate
    """
    grid = default_epsilon_grid() if grid is None else np.sort(np.asarray(grid, dtype=np.float64))
    if grid.size < 3 or np.any(grid <= 0):
        raise ParameterError("epsilon grid needs at least three positive values")
    if np.log10(grid[-1] / grid[0]) < 3:
        raise ParameterError("epsilon grid must span at least three decades")
    if knn.size != cloud.size:
        raise ParameterError(f"neighbour index covers {knn.size} points, cloud has {cloud.size}")

    log_eps = np.log(grid)
    log_s = np.log(kernel_sum(knn, grid))
    slopes = np.gradient(log_s, log_eps)

    peak = int(np.argmax(slopes))
    if slopes[peak] < 0.5:
        logger.error(f"Bandwidth sweep is flat (max slope {slopes[peak]:.3f})")
        raise DiagnosticsError(f"all log S slopes are below 0.5 (max {slopes[peak]:.3f}); degenerate cloud")

    estimated_d = int(np.rint(2.0 * slopes[peak]))
    target = (d if d is not None else estimated_d) / 2.0

    rising = slopes[: peak + 1]
    close = np.flatnonzero(np.abs(rising - target) <= SLOPE_TOLERANCE)
    chosen = int(close[-1]) if close.size else peak

    report = BandwidthReport(
        epsilon_grid=grid, log_s=log_s, slopes=slopes, chosen_epsilon=float(grid[chosen]), estimated_d=estimated_d
    )
    logger.info(
        f"Bandwidth sweep: eps={report.chosen_epsilon:.4g}, max slope {slopes[peak]:.3f}, d_hat={estimated_d}"
    )
    return report
