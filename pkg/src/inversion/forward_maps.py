# src/inversion/forward_maps.py
import logging
from enum import Enum
from typing import Optional, Union

import numpy as np
import torch

from src.errors import ConfigurationError, ShapeError
from src.geometry.neighbors import NeighborIndex, build_knn, nearest
from src.geometry.point_cloud import PointCloud
from src.network.deeponet import DeepONet
from src.operators.bandwidth import tune_epsilon
from src.operators.diffusion_maps import build_dm_operator, dm_neighbor_count
from src.solvers.forward import ForwardProblem, SolveMethod, solve_linear

logger = logging.getLogger(__name__)


class ForwardKind(str, Enum):
    SURROGATE = "surrogate"
    LOCAL_KERNEL = "local-kernel"


def forward_local_kernel(
    alpha: np.ndarray,
    cloud: PointCloud,
    knn: NeighborIndex,
    epsilon: float,
    c: Union[float, np.ndarray],
    f_values: np.ndarray,
    method: SolveMethod = SolveMethod.SPARSE_LU,
) -> np.ndarray:
    """u = (L^κ + cI)^{-1} f with κ = e^α, assembled and solved from scratch."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (cloud.size,):
        raise ShapeError(f"alpha must have shape ({cloud.size},), got {alpha.shape}")
    operator = build_dm_operator(cloud, knn, np.exp(alpha), epsilon)
    return solve_linear(ForwardProblem(operator=operator, c=c, f_values=f_values), method).solution


class LocalKernelForward:
    """Diffusion Maps direct-solve forward map on a fixed cloud."""

    kind = ForwardKind.LOCAL_KERNEL

    def __init__(self, cloud: PointCloud, f_values: np.ndarray, c: float = 1.0, epsilon: Optional[float] = None,
                 neighbors: Optional[int] = None, method: SolveMethod = SolveMethod.SPARSE_LU):
        self.cloud = cloud
        self.knn = build_knn(cloud, neighbors or dm_neighbor_count(cloud.size))
        self.epsilon = tune_epsilon(cloud, self.knn).chosen_epsilon if epsilon is None else float(epsilon)
        self.c = c
        self.f_values = np.asarray(f_values, dtype=np.float64)
        self.method = SolveMethod(method)

    def __call__(self, alpha: np.ndarray) -> np.ndarray:
        return forward_local_kernel(alpha, self.cloud, self.knn, self.epsilon, self.c, self.f_values, self.method)


def sensor_index(cloud: PointCloud, sensors: Optional[np.ndarray], m: int, rule: Optional[str] = None):
    """
    Indices of the cloud values fed to each sensor.

    Sensors at the cloud points map to themselves; any other sensor set needs
    the "nearest" rule.
    """
    if sensors is None:
        if m != cloud.size:
            raise ConfigurationError(
                f"model expects {m} sensors but the cloud has {cloud.size} points; pass sensors and a rule"
            )
        return np.arange(cloud.size)
    sensors = np.asarray(sensors, dtype=np.float64)
    if sensors.shape != (m, 3):
        raise ShapeError(f"sensors must have shape ({m}, 3), got {sensors.shape}")
    if sensors.shape == cloud.points.shape and np.array_equal(sensors, cloud.points):
        return np.arange(cloud.size)
    if rule != "nearest":
        raise ConfigurationError("sensors differ from the cloud points and no interpolation rule was given")
    idx, _ = nearest(cloud.points, sensors)
    return idx


def forward_surrogate(model: DeepONet, alpha: np.ndarray, cloud: PointCloud,
                      index: Optional[np.ndarray] = None) -> np.ndarray:
    """One network evaluation of u at the cloud points for κ = e^α."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (cloud.size,):
        raise ShapeError(f"alpha must have shape ({cloud.size},), got {alpha.shape}")
    index = sensor_index(cloud, None, model.config.m) if index is None else index
    kappa = torch.as_tensor(np.exp(alpha[index]))
    with torch.no_grad():
        return model(kappa, torch.as_tensor(np.array(cloud.points))).numpy()


class SurrogateForward:
    """PI-DeepONet forward map; sensors default to the cloud points (N = m)."""

    kind = ForwardKind.SURROGATE

    def __init__(self, model: DeepONet, cloud: PointCloud, sensors: Optional[np.ndarray] = None,
                 rule: Optional[str] = None):
        self.model = model.eval()
        self.cloud = cloud
        self.index = sensor_index(cloud, sensors, model.config.m, rule)
        self._locations = torch.as_tensor(np.array(cloud.points))

    def __call__(self, alpha: np.ndarray) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=np.float64)
        if alpha.shape != (self.cloud.size,):
            raise ShapeError(f"alpha must have shape ({self.cloud.size},), got {alpha.shape}")
        with torch.no_grad():
            return self.model(torch.as_tensor(np.exp(alpha[self.index])), self._locations).numpy()
