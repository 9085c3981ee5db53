# src/geometry/point_cloud.py
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from src.errors import ParameterError, ShapeError

logger = logging.getLogger(__name__)

CLOUD_HEADER = "idx,x,y,z,theta,phi"


class ManifoldKind(str, Enum):
    TORUS = "torus"
    SEMI_TORUS = "semi-torus"
    CUSTOM = "custom"


@dataclass(frozen=True)
class PointCloud:
    """N sample points on a 2-manifold embedded in R^3.

    Attributes:
        points: ambient coordinates, shape (N, 3)
        intrinsic: (theta, phi) pairs in radians, shape (N, 2), or None
        kind: which benchmark manifold the points were drawn from
        R: major radius
        r: minor radius
        seed: RNG seed used for sampling (None for grid clouds)
        grid_shape: (rows, cols) when the points form an intrinsic grid
    """

    points: np.ndarray
    intrinsic: Optional[np.ndarray]
    kind: ManifoldKind
    R: float
    r: float
    seed: Optional[int] = None
    grid_shape: Optional[Tuple[int, int]] = None
    boundary_distance_fn: Optional[object] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ShapeError(f"points must have shape (N, 3), got {self.points.shape}")
        if self.points.shape[0] < 1:
            raise ParameterError("a point cloud needs at least one point")
        if self.intrinsic is not None and self.intrinsic.shape != (self.points.shape[0], 2):
            raise ShapeError("intrinsic coordinates must have shape (N, 2)")
        self.points.setflags(write=False)
        if self.intrinsic is not None:
            self.intrinsic.setflags(write=False)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def intrinsic_dim(self) -> int:
        return 2

    @property
    def has_boundary(self) -> bool:
        return self.kind == ManifoldKind.SEMI_TORUS or (
            self.kind == ManifoldKind.CUSTOM and self.boundary_distance_fn is not None
        )

    def manifest(self) -> Dict[str, object]:
        return {
            "kind": self.kind.value,
            "N": self.size,
            "R": self.R,
            "r": self.r,
            "seed": self.seed,
            "grid_shape": list(self.grid_shape) if self.grid_shape else None,
        }


def _check_radii(R: float, r: float):
    if not (R > r > 0):
        raise ParameterError(f"torus radii must satisfy R > r > 0, got R={R}, r={r}")


def embed_torus(theta: np.ndarray, phi: np.ndarray, R: float, r: float) -> np.ndarray:
    """Map intrinsic angles through the torus embedding.

    Args:
        theta: tube angle(s)
        phi: angle(s) around the symmetry axis
        R: major radius
        r: minor radius

    Returns:
        Ambient coordinates, shape (..., 3)
    """
    ring = R + r * np.cos(theta)
    return np.stack([ring * np.cos(phi), ring * np.sin(phi), r * np.sin(theta)], axis=-1)


def intrinsic_from_ambient(points: np.ndarray, R: float, r: float) -> np.ndarray:
    """Invert the torus embedding; returns (theta, phi) in [0, 2π)."""
    rho = np.hypot(points[:, 0], points[:, 1])
    theta = np.mod(np.arctan2(points[:, 2], rho - R), 2 * np.pi)
    phi = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2 * np.pi)
    return np.column_stack([theta, phi])


def sample_cloud(kind: ManifoldKind, N: int, R: float = 2.0, r: float = 1.0, seed: int = 0) -> PointCloud:
    """
    Sample N points i.i.d. uniformly in intrinsic coordinates.

    Args:
        kind: TORUS (phi in [0, 2π)) or SEMI_TORUS (phi in [0, π])
        N: number of points
        R: major radius
        r: minor radius
        seed: RNG seed; the same seed reproduces the cloud bitwise

    Returns:
        PointCloud with intrinsic coordinates retained
    """
    kind = ManifoldKind(kind)
    _check_radii(R, r)
    if N < 1:
        raise ParameterError(f"N must be at least 1, got {N}")
    if kind == ManifoldKind.CUSTOM:
        raise ParameterError("custom clouds are built with PointCloud(...) directly")

    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, size=N)
    phi_max = np.pi if kind == ManifoldKind.SEMI_TORUS else 2 * np.pi
    phi = rng.uniform(0.0, phi_max, size=N)

    points = embed_torus(theta, phi, R, r)
    logger.info(f"Sampled {kind.value} cloud: N={N}, R={R}, r={r}, seed={seed}")
    return PointCloud(points=points, intrinsic=np.column_stack([theta, phi]), kind=kind, R=R, r=r, seed=seed)


def grid_angles(kind: ManifoldKind, rows: int, cols: int) -> Tuple[np.ndarray, np.ndarray]:
    """Equi-spaced intrinsic angles; periodic directions drop the seam duplicate."""
    theta = 2 * np.pi * np.arange(rows) / rows
    if ManifoldKind(kind) == ManifoldKind.SEMI_TORUS:
        phi = np.linspace(0.0, np.pi, cols)
    else:
        phi = 2 * np.pi * np.arange(cols) / cols
    return theta, phi


def sample_grid(kind: ManifoldKind, rows: int, cols: int, R: float = 2.0, r: float = 1.0) -> PointCloud:
    """Intrinsic grid cloud with rows × cols points, theta-major ordering."""
    kind = ManifoldKind(kind)
    _check_radii(R, r)
    if rows < 1 or cols < 1:
        raise ParameterError(f"grid shape must be positive, got {rows}x{cols}")

    theta, phi = grid_angles(kind, rows, cols)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    intrinsic = np.column_stack([tt.ravel(), pp.ravel()])
    points = embed_torus(intrinsic[:, 0], intrinsic[:, 1], R, r)
    return PointCloud(
        points=points, intrinsic=intrinsic, kind=kind, R=R, r=r, seed=None, grid_shape=(rows, cols)
    )


def torus_residual(points: np.ndarray, R: float, r: float) -> np.ndarray:
    """Implicit torus equation (sqrt(x²+y²) − R)² + z² − r² evaluated per point."""
    rho = np.hypot(points[:, 0], points[:, 1])
    return (rho - R) ** 2 + points[:, 2] ** 2 - r ** 2


def fill_distance(cloud: PointCloud, queries: np.ndarray) -> float:
    """Largest distance from a query point to its nearest cloud point."""
    from src.geometry.neighbors import nearest_distances

    return float(np.sqrt(nearest_distances(cloud.points, queries).max()))


def save_cloud(cloud: PointCloud, directory: Path, stem: str = "cloud") -> Path:
    """
    Write the cloud as CSV plus a manifest JSON.

    Args:
        cloud: the point cloud
        directory: output directory
        stem: file stem, producing <stem>.csv and <stem>.json

    Returns:
        Path to the CSV file
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    intrinsic = cloud.intrinsic if cloud.intrinsic is not None else np.full((cloud.size, 2), np.nan)
    table = np.column_stack([np.arange(cloud.size), cloud.points, intrinsic])

    csv_path = directory / f"{stem}.csv"
    np.savetxt(csv_path, table, delimiter=",", header=CLOUD_HEADER, comments="",
               fmt=["%d"] + ["%.17g"] * 5)
    with open(directory / f"{stem}.json", "w", encoding="utf-8") as f:
        json.dump(cloud.manifest(), f, indent=2, sort_keys=True)

    logger.info(f"Saved cloud to {csv_path}")
    return csv_path


def load_cloud(directory: Path, stem: str = "cloud") -> PointCloud:
    """Read a cloud written by save_cloud."""
    directory = Path(directory)
    table = np.loadtxt(directory / f"{stem}.csv", delimiter=",", skiprows=1, ndmin=2)
    with open(directory / f"{stem}.json", "r", encoding="utf-8") as f:
        manifest = json.load(f)

    intrinsic = table[:, 4:6]
    if np.isnan(intrinsic).all():
        intrinsic = None
    grid_shape = tuple(manifest["grid_shape"]) if manifest.get("grid_shape") else None
    return PointCloud(
        points=np.ascontiguousarray(table[:, 1:4]),
        intrinsic=None if intrinsic is None else np.ascontiguousarray(intrinsic),
        kind=ManifoldKind(manifest["kind"]),
        R=float(manifest["R"]),
        r=float(manifest["r"]),
        seed=manifest.get("seed"),
        grid_shape=grid_shape,
    )
