# src/operators/discrete_operator.py
import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Union

import numpy as np
import scipy.sparse as sp

from src.errors import ParameterError, ShapeError

logger = logging.getLogger(__name__)

Matrix = Union[np.ndarray, sp.csr_matrix]


class EstimatorKind(str, Enum):
    DM = "dm"
    RBF = "rbf"
    GMLS = "gmls"


def kappa_hash(values: np.ndarray) -> str:
    """First 16 hex characters of the SHA-1 of the float64 bytes."""
    data = np.ascontiguousarray(values, dtype="<f8").tobytes()
    return hashlib.sha1(data).hexdigest()[:16]


def check_kappa(kappa_at_points: np.ndarray, n: int) -> np.ndarray:
    kappa = np.asarray(kappa_at_points, dtype=np.float64)
    if kappa.shape != (n,):
        raise ShapeError(f"kappa must have shape ({n},), got {kappa.shape}")
    if not np.all(np.isfinite(kappa)) or np.any(kappa <= 0):
        raise ParameterError(f"kappa must be finite and positive, min value {np.min(kappa):.3g}")
    return kappa


@dataclass(frozen=True)
class DiscreteOperator:
    """N×N approximation of −div_g(κ grad_g ·) on a point cloud.

    Attributes:
        matrix: scipy CSR for DM and GMLS, dense ndarray for RBF
        estimator: which estimator produced it
        params: estimator parameters (ε and d, shape and tolerance, K and degree)
        kappa_hash: identifier of the κ values the operator was built with
    """

    matrix: Matrix
    estimator: EstimatorKind
    params: Dict[str, object] = field(default_factory=dict)
    kappa_hash: str = ""

    def __post_init__(self):
        rows, cols = self.matrix.shape
        if rows != cols:
            raise ShapeError(f"operator must be square, got {self.matrix.shape}")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def apply(self, u: np.ndarray) -> np.ndarray:
        if u.shape[0] != self.size:
            raise ShapeError(f"vector of length {u.shape[0]} applied to a {self.size}-point operator")
        return np.asarray(self.matrix @ u)

    def shifted(self, c) -> Matrix:
        """L + diag(c) in the operator's own storage."""
        shift = np.broadcast_to(np.asarray(c, dtype=np.float64), (self.size,))
        if self.is_sparse:
            return (self.matrix + sp.diags(shift)).tocsr()
        return self.matrix + np.diag(shift)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.array(self.matrix)

    def to_sparse(self) -> sp.csr_matrix:
        return self.matrix.tocsr() if self.is_sparse else sp.csr_matrix(self.matrix)

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()


def export_operator(operator: DiscreteOperator, directory: Path, stem: str = "operator") -> Path:
    """
    Write the operator as `row,col,value` text plus a JSON sidecar.

    Args:
        operator: operator to export
        directory: output directory
        stem: file stem

    Returns:
        Path to the coordinate-list file
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    coo = operator.to_sparse().tocoo()
    table = np.column_stack([coo.row, coo.col, coo.data])

    path = directory / f"{stem}.txt"
    np.savetxt(path, table, delimiter=",", header="row,col,value", comments="", fmt=["%d", "%d", "%.17g"])
    sidecar = {
        "estimator": operator.estimator.value,
        "params": operator.params,
        "N": operator.size,
        "kappa_hash": operator.kappa_hash,
        "storage": "sparse" if operator.is_sparse else "dense",
    }
    with open(directory / f"{stem}.json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)

    logger.info(f"Exported {operator.estimator.value} operator ({coo.nnz} nonzeros) to {path}")
    return path


def load_operator(directory: Path, stem: str = "operator") -> DiscreteOperator:
    """Read an operator written by export_operator."""
    directory = Path(directory)
    with open(directory / f"{stem}.json", "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    n = int(sidecar["N"])
    table = np.loadtxt(directory / f"{stem}.txt", delimiter=",", skiprows=1, ndmin=2)

    matrix = sp.csr_matrix((table[:, 2], (table[:, 0].astype(np.int64), table[:, 1].astype(np.int64))), shape=(n, n))
    if sidecar.get("storage") == "dense":
        matrix = matrix.toarray()
    return DiscreteOperator(
        matrix=matrix,
        estimator=EstimatorKind(sidecar["estimator"]),
        params=sidecar["params"],
        kappa_hash=sidecar["kappa_hash"],
    )
