# src/operators/assembly.py
import logging
from dataclasses import asdict, dataclass, replace
from typing import Dict, Optional

import numpy as np

from src.errors import ConfigurationError
from src.geometry.neighbors import NeighborIndex, build_knn
from src.geometry.point_cloud import PointCloud
from src.operators.bandwidth import tune_epsilon
from src.operators.diffusion_maps import DiffusionMapsKernel, dm_neighbor_count
from src.operators.discrete_operator import DiscreteOperator, EstimatorKind
from src.operators.gmls import DEFAULT_DEGREE, GmlsStencils, default_stencil_size
from src.operators.rbf import DEFAULT_PINV_TOL, RbfDifferentiation, default_shape

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimatorSettings:
    """Everything needed to assemble one estimator on a cloud."""

    kind: EstimatorKind = EstimatorKind.DM
    d: int = 2
    # Diffusion Maps
    epsilon: Optional[float] = None
    dm_neighbors: Optional[int] = None
    # RBF
    shape_s: Optional[float] = None
    pinv_tol: float = DEFAULT_PINV_TOL
    # GMLS
    stencil_size: Optional[int] = None
    degree_p: int = DEFAULT_DEGREE
    stabilize: bool = True

    def to_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["kind"] = self.kind.value
        return out

    @classmethod
    def from_dict(cls, values: Dict[str, object]) -> "EstimatorSettings":
        values = dict(values)
        values["kind"] = EstimatorKind(values.get("kind", EstimatorKind.DM.value))
        return cls(**values)


def default_for(cloud: PointCloud, kind: EstimatorKind, **overrides) -> EstimatorSettings:
    """
    Settings with the documented defaults filled in for this cloud.

    DM: k = ⌈1.5 √N⌉ and ε from the bandwidth sweep. RBF: s = 1/(2 · median
    spacing). GMLS: p = 2, K = ⌈3 m⌉.
    """
    settings = replace(EstimatorSettings(kind=EstimatorKind(kind)), **overrides)
    if settings.kind == EstimatorKind.DM:
        if settings.dm_neighbors is None:
            settings = replace(settings, dm_neighbors=dm_neighbor_count(cloud.size))
        if settings.epsilon is None:
            report = tune_epsilon(cloud, build_knn(cloud, settings.dm_neighbors), d=settings.d)
            settings = replace(settings, epsilon=report.chosen_epsilon)
    elif settings.kind == EstimatorKind.RBF:
        if settings.shape_s is None:
            settings = replace(settings, shape_s=default_shape(cloud))
    elif settings.stencil_size is None:
        settings = replace(settings, stencil_size=default_stencil_size(settings.degree_p, settings.d))
    return settings


class OperatorFactory:
    """Assembles DiscreteOperators for many κ samples on one cloud.

    The κ-independent work (DM kernel normalisation, RBF gradient matrices,
    GMLS stencil weights) happens once in the constructor.
    """

    def __init__(self, cloud: PointCloud, settings: EstimatorSettings, knn: Optional[NeighborIndex] = None):
        self.cloud = cloud
        self.settings = default_for(cloud, settings.kind, **{
            k: v for k, v in asdict(settings).items() if k != "kind"
        })
        kind = self.settings.kind

        if kind == EstimatorKind.DM:
            knn = self._neighbors(knn, self.settings.dm_neighbors)
            self._engine = DiffusionMapsKernel(cloud, knn, self.settings.epsilon, self.settings.d)
        elif kind == EstimatorKind.RBF:
            self._engine = RbfDifferentiation(cloud, self.settings.shape_s, self.settings.pinv_tol, d=self.settings.d)
        elif kind == EstimatorKind.GMLS:
            knn = self._neighbors(knn, self.settings.stencil_size)
            self._engine = GmlsStencils(
                cloud, knn, self.settings.stencil_size, self.settings.degree_p, self.settings.d,
                stabilize=self.settings.stabilize,
            )
        else:
            raise ConfigurationError(f"unknown estimator {kind}")
        logger.info(f"Operator factory ready for {kind.value} on N={cloud.size}")

    def _neighbors(self, knn: Optional[NeighborIndex], k: int) -> NeighborIndex:
        if knn is None or knn.k < k:
            return build_knn(self.cloud, k)
        return knn.truncated(k) if knn.k > k else knn

    @property
    def kind(self) -> EstimatorKind:
        return self.settings.kind

    @property
    def engine(self):
        return self._engine

    def build(self, kappa_values: np.ndarray) -> DiscreteOperator:
        return self._engine.build(kappa_values)
