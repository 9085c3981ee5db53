# src/operators/stabilization.py
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from src.errors import ShapeError

logger = logging.getLogger(__name__)

STRICT_MARGIN = 1e-10


@dataclass(frozen=True)
class StabilizedRow:
    """Result of the stencil-weight linear program.

    Attributes:
        weights: stabilized weights ŵ (w itself when unchanged or infeasible)
        c: optimal lower bound C on the off-centre weights
        feasible: False when the program had no solution and w was passed through
    """

    weights: np.ndarray
    c: float
    feasible: bool = True


def stabilize_row(weights: np.ndarray, vandermonde: np.ndarray) -> StabilizedRow:
    """
    Push negative off-centre stencil weights up while keeping polynomial moments.

    Solves   min C
             s.t. Φᵀ ŵ = Φᵀ w,  ŵ₁ < 0,  ŵ_k + C ≥ 0 (k ≥ 2),  0 ≤ C ≤ |min_{k≥2} w_k|
    with scipy's HiGHS backend, in units of max|w|.

    Args:
        weights: stencil weights w, base point first
        vandermonde: Φ with Φ[k, α] = p_α(x_k), shape (K, m)

    Returns:
        StabilizedRow
    """
    w = np.asarray(weights, dtype=np.float64)
    phi = np.asarray(vandermonde, dtype=np.float64)
    K = w.size
    if phi.ndim != 2 or phi.shape[0] != K:
        raise ShapeError(f"vandermonde must have {K} rows, got shape {phi.shape}")

    off_centre_min = w[1:].min() if K > 1 else 0.0
    if w[0] < 0 and off_centre_min >= 0:
        return StabilizedRow(weights=w.copy(), c=0.0)

    scale = np.abs(w).max()
    if scale == 0:
        return StabilizedRow(weights=w.copy(), c=0.0, feasible=False)
    w_bar = w / scale

    # x = (ŵ_1, ..., ŵ_K, C)
    cost = np.zeros(K + 1)
    cost[-1] = 1.0
    a_eq = np.hstack([phi.T, np.zeros((phi.shape[1], 1))])
    b_eq = phi.T @ w_bar

    a_ub = np.zeros((K, K + 1))
    b_ub = np.zeros(K)
    a_ub[0, 0] = 1.0
    b_ub[0] = -STRICT_MARGIN
    a_ub[1:, 1:K] = -np.eye(K - 1)
    a_ub[1:, -1] = -1.0

    c_max = abs(min(off_centre_min / scale, 0.0))
    bounds = [(None, None)] * K + [(0.0, c_max)]
    result = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")

    if result.status != 0:
        logger.warning(f"Stencil stabilization infeasible ({result.message}); keeping original weights")
        return StabilizedRow(weights=w.copy(), c=0.0, feasible=False)

    w_hat = result.x[:K]
    # Least-norm correction back onto the moment constraints.
    correction, *_ = np.linalg.lstsq(phi.T, b_eq - phi.T @ w_hat, rcond=None)
    w_hat = w_hat + correction

    # The correction is at solver-tolerance level but may still cross the sign constraints.
    if w_hat[0] >= 0:
        logger.warning(f"Moment correction left a nonnegative centre weight ({w_hat[0] * scale:.3e}); "
                       f"keeping original weights")
        return StabilizedRow(weights=w.copy(), c=0.0, feasible=False)
    c = float(result.x[-1])
    lowest = -w_hat[1:].min() if K > 1 else 0.0
    if lowest > c:
        logger.debug(f"Moment correction lowered an off-centre weight; C raised from {c:.3e} to {lowest:.3e}")
        c = float(lowest)
    return StabilizedRow(weights=w_hat * scale, c=c * scale)
