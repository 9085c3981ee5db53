# src/fields/sources.py
import logging
from typing import Callable, Dict

import numpy as np

from src.errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_SOURCE = "ambient-sum"
DEFAULT_BOUNDARY = "zero"

SourceFn = Callable[[np.ndarray, float, float], np.ndarray]


def _cos_theta(points: np.ndarray, R: float, r: float) -> np.ndarray:
    return (np.hypot(points[:, 0], points[:, 1]) - R) / r


SOURCES: Dict[str, SourceFn] = {
    "zero": lambda p, R, r: np.zeros(p.shape[0]),
    "unit": lambda p, R, r: np.ones(p.shape[0]),
    "ambient-sum": lambda p, R, r: p.sum(axis=1),
    "cos-theta": _cos_theta,
}


def source_values(name: str, points: np.ndarray, R: float = 2.0, r: float = 1.0) -> np.ndarray:
    """Evaluate a named right-hand side (or Dirichlet datum) at ambient points."""
    try:
        fn = SOURCES[name]
    except KeyError:
        raise ConfigurationError(f"unknown source '{name}'; choose from {sorted(SOURCES)}")
    return np.asarray(fn(np.asarray(points, dtype=np.float64), R, r), dtype=np.float64)
