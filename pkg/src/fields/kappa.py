# src/fields/kappa.py
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from src.errors import ConfigurationError, ParameterError, RangeConfigurationError, ShapeError
from src.geometry.neighbors import nearest
from src.geometry.point_cloud import ManifoldKind, grid_angles, intrinsic_from_ambient

logger = logging.getLogger(__name__)

POSITIVITY_FLOOR = 0.1
MAX_REJECTIONS = 1000
PIECEWISE_OFFSET = 10.0
LINEAR_OFFSET = 6.0


class KappaFamily(str, Enum):
    LINEAR = "linear"
    EXPONENTIAL = "exponential"
    PIECEWISE_LINEAR = "piecewise"
    QUADRATIC = "quadratic"
    GRID_SAMPLES = "grid-samples"
    POINT_VALUES = "point-values"
    RADIAL = "radial"


PARAMETRIC_FAMILIES = (
    KappaFamily.LINEAR,
    KappaFamily.EXPONENTIAL,
    KappaFamily.PIECEWISE_LINEAR,
    KappaFamily.QUADRATIC,
)

Ranges = Dict[str, Tuple[float, float]]

DEFAULT_RANGES: Dict[KappaFamily, Ranges] = {
    KappaFamily.LINEAR: {"a": (-1.0, 1.0), "b": (-1.0, 1.0), "c": (-1.0, 1.0)},
    KappaFamily.EXPONENTIAL: {"a": (0.0, 0.15), "b": (0.0, 0.15), "c": (1.0, 3.0)},
    KappaFamily.PIECEWISE_LINEAR: {"a1": (-1.0, 1.0), "b1": (-1.0, 1.0), "a2": (-1.0, 1.0), "b2": (-1.0, 1.0)},
    KappaFamily.QUADRATIC: {
        "a1": (-0.3, 0.3), "b1": (-0.3, 0.3), "a2": (-1.0, 1.0), "b2": (-1.0, 1.0), "c": (8.0, 12.0),
    },
}


@dataclass(frozen=True)
class KappaField:
    """A diffusion coefficient κ(x, y).

    Parametric families carry their coefficients. GRID_SAMPLES carries values on an
    intrinsic (θ, φ) grid and POINT_VALUES carries raw values at known points.
    """

    family: KappaFamily
    coeffs: Dict[str, float] = field(default_factory=dict)
    seed: Optional[int] = None
    values: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None
    grid_kind: ManifoldKind = ManifoldKind.TORUS
    radii: Tuple[float, float] = (2.0, 1.0)

    def describe(self) -> Dict[str, object]:
        return {"family": self.family.value, "coeffs": dict(self.coeffs), "seed": self.seed}


def _parametric(family: KappaFamily, coeffs: Dict[str, float], x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if family == KappaFamily.LINEAR:
        return coeffs["a"] * x + coeffs["b"] * y + LINEAR_OFFSET + coeffs["c"]
    if family == KappaFamily.EXPONENTIAL:
        return coeffs["a"] * np.exp(x) + coeffs["b"] * np.exp(y) + coeffs["c"]
    if family == KappaFamily.PIECEWISE_LINEAR:
        # Quadrant table: a2 only for x > 0, y > 0; b2 whenever y > 0.
        a = np.where((x > 0) & (y > 0), coeffs["a2"], coeffs["a1"])
        b = np.where(y > 0, coeffs["b2"], coeffs["b1"])
        return a * x + b * y + PIECEWISE_OFFSET
    if family == KappaFamily.QUADRATIC:
        return (coeffs["a1"] * x ** 2 + coeffs["b1"] * y ** 2 + coeffs["a2"] * x + coeffs["b2"] * y
                + coeffs["c"])
    if family == KappaFamily.RADIAL:
        # a (R + r cos θ) on the torus is a · sqrt(x² + y²)
        return coeffs["a"] * np.hypot(x, y)
    raise ConfigurationError(f"{family.value} is not a parametric family")


def _grid_interpolator(kappa: KappaField) -> RegularGridInterpolator:
    rows, cols = kappa.values.shape
    theta, phi = grid_angles(kappa.grid_kind, rows, cols)
    values = kappa.values
    # Periodic padding so interpolation wraps across the seam.
    theta = np.append(theta, 2 * np.pi)
    values = np.vstack([values, values[:1]])
    if kappa.grid_kind == ManifoldKind.TORUS:
        phi = np.append(phi, 2 * np.pi)
        values = np.hstack([values, values[:, :1]])
    return RegularGridInterpolator((theta, phi), values, method="linear", bounds_error=False, fill_value=None)


def evaluate(kappa: KappaField, points: np.ndarray) -> np.ndarray:
    """
    κ at ambient points.

    Args:
        kappa: the field
        points: (M, 3) ambient coordinates

    Returns:
        Vector of length M
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ShapeError(f"points must have shape (M, 3), got {points.shape}")

    if kappa.family in PARAMETRIC_FAMILIES or kappa.family == KappaFamily.RADIAL:
        return _parametric(kappa.family, kappa.coeffs, points[:, 0], points[:, 1])
    if kappa.family == KappaFamily.GRID_SAMPLES:
        intrinsic = intrinsic_from_ambient(points, *kappa.radii)
        return _grid_interpolator(kappa)(intrinsic)
    if kappa.family == KappaFamily.POINT_VALUES:
        idx, _ = nearest(kappa.points, points)
        return kappa.values[idx].copy()
    raise ConfigurationError(f"unknown kappa family {kappa.family}")


def grid_field(values: np.ndarray, kind: ManifoldKind = ManifoldKind.TORUS, R: float = 2.0, r: float = 1.0,
               seed: Optional[int] = None) -> KappaField:
    """κ given by samples on an intrinsic grid (bilinear in θ, φ)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ShapeError(f"grid values must be 2-D, got shape {values.shape}")
    return KappaField(family=KappaFamily.GRID_SAMPLES, values=values, grid_kind=ManifoldKind(kind), radii=(R, r),
                      seed=seed)


def point_field(values: np.ndarray, points: np.ndarray, seed: Optional[int] = None) -> KappaField:
    """κ known only at given points (e.g. e^α on an inversion cloud); nearest-point lookup elsewhere."""
    values = np.asarray(values, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    if values.shape != (points.shape[0],):
        raise ShapeError("one value per point required")
    return KappaField(family=KappaFamily.POINT_VALUES, values=values, points=points, seed=seed)


def _draw(rng: np.random.Generator, ranges: Ranges) -> Dict[str, float]:
    return {name: float(rng.uniform(lo, hi)) for name, (lo, hi) in sorted(ranges.items())}


def sample_kappa(
    family: KappaFamily,
    seed: int,
    positivity_points: np.ndarray,
    ranges: Optional[Ranges] = None,
    floor: float = POSITIVITY_FLOOR,
    max_rejections: int = MAX_REJECTIONS,
) -> KappaField:
    """
    Draw a random parametric κ that stays above `floor` on the given points.

    Args:
        family: one of the four parametric families
        seed: RNG seed for the coefficients
        positivity_points: (M, 3) points where κ must exceed the floor (cloud and sensors)
        ranges: per-coefficient uniform ranges, defaults from DEFAULT_RANGES
        floor: positivity floor
        max_rejections: draws rejected before giving up

    Returns:
        KappaField
    """
    family = KappaFamily(family)
    if family not in PARAMETRIC_FAMILIES:
        raise ParameterError(f"cannot sample the {family.value} family")
    ranges = dict(DEFAULT_RANGES[family]) if ranges is None else dict(ranges)
    missing = set(DEFAULT_RANGES[family]) - set(ranges)
    if missing:
        raise ConfigurationError(f"missing coefficient ranges for {family.value}: {sorted(missing)}")

    points = np.asarray(positivity_points, dtype=np.float64)
    rng = np.random.default_rng(seed)
    for _ in range(max_rejections):
        coeffs = _draw(rng, ranges)
        if np.min(_parametric(family, coeffs, points[:, 0], points[:, 1])) > floor:
            return KappaField(family=family, coeffs=coeffs, seed=seed)

    logger.error(f"{family.value} ranges rejected {max_rejections} draws (seed {seed})")
    raise RangeConfigurationError(
        f"{family.value} coefficient ranges never produced kappa > {floor} in {max_rejections} draws"
    )
