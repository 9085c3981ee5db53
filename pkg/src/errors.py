"""Exception hierarchy shared by every subpackage.

Library code raises these; only the command-line layer turns them into exit codes.
"""

from typing import List, Optional

import numpy as np


class ManifoldOperatorError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(ManifoldOperatorError, ValueError):
    """An argument is outside its documented range."""


class ShapeError(ManifoldOperatorError, ValueError):
    """Array dimensions do not agree."""


class ConfigurationError(ManifoldOperatorError):
    """A run or component is configured inconsistently."""


class RangeConfigurationError(ConfigurationError):
    """Coefficient ranges cannot produce a positive diffusion coefficient."""


class DegenerateCloudError(ManifoldOperatorError):
    """The point cloud cannot support the requested estimator."""


class DegenerateStencilError(DegenerateCloudError):
    """A local neighbourhood is rank deficient."""


class StencilError(DegenerateCloudError):
    """A GMLS normal-equation matrix is singular at a base point."""

    def __init__(self, message: str, point_index: int):
        super().__init__(message)
        self.point_index = point_index


class ConditioningError(ManifoldOperatorError):
    """A matrix is numerically rank zero after the tolerance cut."""


class DiagnosticsError(ManifoldOperatorError):
    """A diagnostic sweep produced no usable answer."""


class SolverError(ManifoldOperatorError):
    """A linear or nonlinear solve failed."""

    def __init__(self, message: str, condition_estimate: Optional[float] = None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class NonConvergenceError(SolverError):
    """An iteration hit its limit before meeting the tolerance."""

    def __init__(self, message: str, residual_history: Optional[List[float]] = None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class NewtonFailure(SolverError):
    """The Newton Jacobian became singular."""

    def __init__(self, message: str, iterate: Optional[np.ndarray] = None):
        super().__init__(message)
        self.iterate = None if iterate is None else np.array(iterate, copy=True)


class DegenerateProblemError(SolverError):
    """The forward problem has no interior unknowns."""


class TrainingDivergedError(ManifoldOperatorError):
    """A non-finite loss stopped training."""

    def __init__(self, message: str, epoch: int, last_good_state: Optional[dict] = None):
        super().__init__(message)
        self.epoch = epoch
        self.last_good_state = last_good_state


class MetricError(ManifoldOperatorError):
    """An evaluation metric is undefined for the given data."""
