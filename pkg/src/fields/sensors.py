# src/fields/sensors.py
import logging
from dataclasses import dataclass

import numpy as np

from config.config import Config
from src.errors import ParameterError
from src.geometry.point_cloud import ManifoldKind, PointCloud, sample_grid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SensorGrid:
    """Branch-network sensor locations Ξ, equi-spaced in intrinsic coordinates."""

    locations: np.ndarray
    intrinsic: np.ndarray
    rows: int
    cols: int

    @property
    def m(self) -> int:
        return self.locations.shape[0]

    @property
    def shape(self):
        return (self.rows, self.cols)


def build_sensor_grid(kind: ManifoldKind = ManifoldKind.TORUS, rows: int = None, cols: int = None,
                      R: float = None, r: float = None) -> SensorGrid:
    """
    Sensor grid on the torus or semi-torus (26 × 26 unless configured otherwise).

    The periodic seam is not duplicated.
    """
    config = Config()
    rows = config.SENSOR_ROWS if rows is None else rows
    cols = config.SENSOR_COLS if cols is None else cols
    R = config.MAJOR_RADIUS if R is None else R
    r = config.MINOR_RADIUS if r is None else r
    if rows < 1 or cols < 1:
        raise ParameterError(f"sensor grid must be at least 1x1, got {rows}x{cols}")

    grid = sample_grid(kind, rows, cols, R, r)
    logger.debug(f"Sensor grid {rows}x{cols} on {ManifoldKind(kind).value}")
    return SensorGrid(locations=np.array(grid.points), intrinsic=np.array(grid.intrinsic), rows=rows, cols=cols)


def sensors_from_cloud(cloud: PointCloud) -> SensorGrid:
    """Use the cloud itself as the sensor set (inversion surrogates, N = m)."""
    rows, cols = cloud.grid_shape if cloud.grid_shape else (cloud.size, 1)
    intrinsic = cloud.intrinsic if cloud.intrinsic is not None else np.full((cloud.size, 2), np.nan)
    return SensorGrid(locations=np.array(cloud.points), intrinsic=np.array(intrinsic), rows=rows, cols=cols)
