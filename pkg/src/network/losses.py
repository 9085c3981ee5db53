# src/network/losses.py
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import torch

from src.errors import MetricError, ParameterError, ShapeError
from src.fields.datasets import OperatorDataset
from src.geometry.boundary import BoundarySplit
from src.operators.assembly import OperatorFactory
from src.operators.discrete_operator import DiscreteOperator, EstimatorKind
from src.network.deeponet import DTYPE, DeepONet

logger = logging.getLogger(__name__)


def _tensor(values) -> torch.Tensor:
    return torch.as_tensor(np.array(values, dtype=np.float64), dtype=DTYPE)


def _torch_operator(matrix) -> torch.Tensor:
    """scipy sparse or dense matrix as a constant torch tensor (sparse COO when sparse)."""
    if sp.issparse(matrix):
        coo = matrix.tocoo()
        indices = torch.as_tensor(np.vstack([coo.row, coo.col]).astype(np.int64))
        return torch.sparse_coo_tensor(indices, _tensor(coo.data), coo.shape).coalesce()
    return _tensor(matrix)


def _matvec(matrix: torch.Tensor, u: torch.Tensor) -> torch.Tensor:
    if matrix.is_sparse:
        return torch.sparse.mm(matrix, u.unsqueeze(1)).squeeze(1)
    return matrix @ u


@dataclass
class LossBundle:
    obs: torch.Tensor
    pde: torch.Tensor
    bc: torch.Tensor
    total: torch.Tensor

    def as_floats(self) -> dict:
        return {name: float(getattr(self, name).detach()) for name in ("obs", "pde", "bc", "total")}


@dataclass
class ObsBatch:
    """Labelled samples: κ at the sensors, cloud locations and reference solutions."""

    kappa_sensors: torch.Tensor
    locations: torch.Tensor
    solutions: torch.Tensor

    @classmethod
    def from_dataset(cls, dataset: OperatorDataset) -> "ObsBatch":
        if not dataset.has_solutions:
            raise ParameterError("observation loss needs a dataset with solutions")
        return cls(_tensor(dataset.kappa_sensors), _tensor(dataset.cloud.points), _tensor(dataset.solutions))

    @property
    def size(self) -> int:
        return self.kappa_sensors.shape[0]


@dataclass
class PdeBatch:
    """N_PDE κ samples with their (constant) discrete operators.

    Operators are held either as one torch matrix per sample, or, for RBF, as the
    shared gradient matrices G_ℓ so that L u = −Σ_ℓ G_ℓ (κ ∘ G_ℓ u) is applied
    without materialising N×N matrices per sample.

    Attributes:
        kappa_sensors: (K, m)
        locations: (N, 3)
        kappa_points: (K, N), used by the RBF form and the semilinear source
        c: reaction coefficient (ignored when semilinear, where it is 1)
        f: (N,) right-hand side, None when semilinear
        matrices: per-sample L_k
        gradients: (dim, N, N) RBF gradient matrices
        interior: rows entering the residual mean (None means all rows)
        near: near-boundary rows for the boundary loss
        g: Dirichlet values on the near-boundary rows
        semilinear: residual L u + u − f(u, κ) instead of (L + cI) u − f
    """

    kappa_sensors: torch.Tensor
    locations: torch.Tensor
    kappa_points: torch.Tensor
    c: float = 1.0
    f: Optional[torch.Tensor] = None
    matrices: Optional[List[torch.Tensor]] = None
    gradients: Optional[torch.Tensor] = None
    interior: Optional[torch.Tensor] = None
    near: Optional[torch.Tensor] = None
    g: Optional[torch.Tensor] = None
    semilinear: bool = False

    def __post_init__(self):
        n = self.locations.shape[0]
        if self.kappa_points.shape != (self.size, n):
            raise ShapeError(f"kappa_points must be ({self.size}, {n}), got {tuple(self.kappa_points.shape)}")
        if self.matrices is None and self.gradients is None:
            raise ParameterError("a physics batch needs operators")
        if self.matrices is not None:
            if len(self.matrices) != self.size:
                raise ShapeError(f"{len(self.matrices)} operators for {self.size} kappa samples")
            for matrix in self.matrices:
                if tuple(matrix.shape) != (n, n):
                    raise ShapeError(f"operator of shape {tuple(matrix.shape)} on a {n}-point cloud")
        if self.gradients is not None and tuple(self.gradients.shape[1:]) != (n, n):
            raise ShapeError(f"gradient matrices of shape {tuple(self.gradients.shape)} on a {n}-point cloud")
        if not self.semilinear and (self.f is None or self.f.shape != (n,)):
            raise ShapeError(f"f must have shape ({n},)")

    @property
    def size(self) -> int:
        return self.kappa_sensors.shape[0]

    @property
    def n(self) -> int:
        return self.locations.shape[0]

    def apply_operator(self, u: torch.Tensor) -> torch.Tensor:
        """L_k u_k for every sample; u has shape (K, N)."""
        if self.matrices is not None:
            return torch.stack([_matvec(matrix, u[k]) for k, matrix in enumerate(self.matrices)])
        out = torch.zeros_like(u)
        for g in self.gradients:
            out = out - (g @ (self.kappa_points * (u @ g.T)).T).T
        return out

    def residual(self, u: torch.Tensor) -> torch.Tensor:
        lu = self.apply_operator(u)
        if self.semilinear:
            kappa = self.kappa_points
            source = 1.5 * u ** 2 + u + 2.0 * kappa * u - 0.5 * kappa ** 2
            return lu + u - source
        return lu + self.c * u - self.f


def _split_tensors(boundary: Optional[BoundarySplit], g_values, n: int):
    if boundary is None:
        return None, None, None
    if boundary.size != n:
        raise ShapeError(f"boundary split covers {boundary.size} points, cloud has {n}")
    near = torch.as_tensor(boundary.near_boundary, dtype=torch.long)
    interior = torch.as_tensor(boundary.interior, dtype=torch.long)
    g = None
    if g_values is not None:
        g_values = np.asarray(g_values, dtype=np.float64)
        g = _tensor(g_values[boundary.near_boundary] if g_values.shape == (n,) else g_values)
        if g.shape != near.shape:
            raise ShapeError(f"g must have length {n} or {near.numel()}")
    return interior, near, g


def pde_batch_from_operators(
    kappa_sensors: np.ndarray,
    locations: np.ndarray,
    operators: Sequence[DiscreteOperator],
    kappa_points: np.ndarray,
    c: float = 1.0,
    f_values: Optional[np.ndarray] = None,
    boundary: Optional[BoundarySplit] = None,
    g_values: Optional[np.ndarray] = None,
    semilinear: bool = False,
) -> PdeBatch:
    """Physics batch from explicitly assembled operators."""
    interior, near, g = _split_tensors(boundary, g_values, np.asarray(locations).shape[0])
    return PdeBatch(
        kappa_sensors=_tensor(kappa_sensors),
        locations=_tensor(locations),
        kappa_points=_tensor(kappa_points),
        c=float(c),
        f=None if f_values is None else _tensor(f_values),
        matrices=[_torch_operator(op.matrix) for op in operators],
        interior=interior,
        near=near,
        g=g,
        semilinear=semilinear,
    )


def build_pde_batch(
    dataset: OperatorDataset,
    factory: OperatorFactory,
    c: float = 1.0,
    f_values: Optional[np.ndarray] = None,
    boundary: Optional[BoundarySplit] = None,
    g_values: Optional[np.ndarray] = None,
    semilinear: bool = False,
) -> PdeBatch:
    """
    Precompute the physics batch for a label-free κ set.

    Args:
        dataset: N_PDE κ samples (solutions not needed)
        factory: operator factory on the dataset's cloud
        c: reaction coefficient
        f_values: right-hand side at the cloud points
        boundary: near-boundary split for semi-torus problems
        g_values: Dirichlet values (length N or one per near-boundary point)
        semilinear: use the semilinear residual

    Returns:
        PdeBatch
    """
    if factory.cloud.size != dataset.cloud.size:
        raise ShapeError(f"factory cloud has {factory.cloud.size} points, dataset cloud {dataset.cloud.size}")
    if factory.kind == EstimatorKind.RBF:
        interior, near, g = _split_tensors(boundary, g_values, dataset.cloud.size)
        batch = PdeBatch(
            kappa_sensors=_tensor(dataset.kappa_sensors),
            locations=_tensor(dataset.cloud.points),
            kappa_points=_tensor(dataset.kappa_points),
            c=float(c),
            f=None if f_values is None else _tensor(f_values),
            gradients=_tensor(factory.engine.gradients),
            interior=interior,
            near=near,
            g=g,
            semilinear=semilinear,
        )
    else:
        operators = [factory.build(kappa) for kappa in dataset.kappa_points]
        batch = pde_batch_from_operators(dataset.kappa_sensors, dataset.cloud.points, operators,
                                         dataset.kappa_points, c, f_values, boundary, g_values, semilinear)
    logger.info(f"Physics batch ready: {batch.size} kappa samples, {factory.kind.value} operators")
    return batch


ObsData = Union[ObsBatch, OperatorDataset]


def _as_obs(data: ObsData) -> ObsBatch:
    return ObsBatch.from_dataset(data) if isinstance(data, OperatorDataset) else data


def loss_obs(model: DeepONet, data: ObsData) -> torch.Tensor:
    """Mean squared error against the reference solutions over samples and points."""
    batch = _as_obs(data)
    if batch.size == 0:
        raise ParameterError("observation loss on an empty dataset")
    prediction = model(batch.kappa_sensors, batch.locations)
    return torch.mean((prediction - batch.solutions) ** 2)


def loss_pde(model: DeepONet, batch: PdeBatch) -> torch.Tensor:
    """Mean squared discrete residual over samples and interior rows."""
    if batch.size == 0:
        raise ParameterError("physics loss on an empty batch")
    residual = batch.residual(model(batch.kappa_sensors, batch.locations))
    if batch.interior is not None:
        residual = residual[:, batch.interior]
    return torch.mean(residual ** 2)


def loss_bc(model: DeepONet, batch: PdeBatch, boundary: Optional[BoundarySplit] = None,
            g_values: Optional[np.ndarray] = None) -> torch.Tensor:
    """Mean squared mismatch with g̃ on the near-boundary points.

    The split and values default to the ones the batch was built with.
    """
    near, g = batch.near, batch.g
    if boundary is not None:
        _, near, g = _split_tensors(boundary, g_values, batch.n)
    if near is None or near.numel() == 0:
        raise ParameterError("boundary loss needs a nonempty near-boundary set")
    if g is None:
        raise ParameterError("boundary loss needs Dirichlet values")
    prediction = model(batch.kappa_sensors, batch.locations[near])
    return torch.mean((prediction - g) ** 2)


def relative_l2_error(prediction: np.ndarray, reference: np.ndarray) -> float:
    """‖prediction − reference‖₂ / ‖reference‖₂."""
    reference = np.asarray(reference, dtype=np.float64)
    norm = np.linalg.norm(reference)
    if norm == 0.0:
        raise MetricError("relative error against a zero-norm reference")
    return float(np.linalg.norm(np.asarray(prediction, dtype=np.float64) - reference) / norm)


def mean_l2_relative_error(model: DeepONet, data: ObsData, order: Optional[np.ndarray] = None) -> float:
    """
    Mean over test samples of the relative L² error of the network predictions.

    Args:
        model: trained network
        data: test dataset with reference solutions
        order: optional evaluation order of the samples

    Returns:
        Scalar error (0.03 means 3%)
    """
    batch = _as_obs(data)
    if batch.size == 0:
        raise MetricError("empty test set")
    indices = np.arange(batch.size) if order is None else np.asarray(order)
    with torch.no_grad():
        prediction = model(batch.kappa_sensors[indices], batch.locations).numpy()
    reference = batch.solutions[indices].numpy()
    errors = [relative_l2_error(prediction[j], reference[j]) for j in range(len(indices))]
    return float(np.mean(errors))
