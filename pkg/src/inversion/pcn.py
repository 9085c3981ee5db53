# src/inversion/pcn.py
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from src.errors import ParameterError, ShapeError
from src.inversion.forward_maps import ForwardKind
from src.inversion.prior import GaussianPrior, sample_prior

logger = logging.getLogger(__name__)

ForwardMap = Callable[[np.ndarray], np.ndarray]


@dataclass
class ObservationModel:
    """Noisy pointwise observations v = u(X) + η with Γ = σ²I.

    zero_misfit switches the likelihood off (the σ → ∞ limit), so the chain
    samples the prior.
    """

    data: np.ndarray
    sigma: float
    seed: Optional[int] = None
    truth_alpha: Optional[np.ndarray] = None
    truth_solution: Optional[np.ndarray] = None
    zero_misfit: bool = False

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if not self.zero_misfit and not self.sigma > 0:
            raise ParameterError(f"noise sigma must be positive, got {self.sigma}")
        if not np.all(np.isfinite(self.data)):
            raise ParameterError("observation data must be finite")

    @property
    def truth_kappa(self) -> Optional[np.ndarray]:
        return None if self.truth_alpha is None else np.exp(self.truth_alpha)

    def misfit(self, prediction: np.ndarray) -> float:
        """½ |v − prediction|²_Γ."""
        if self.zero_misfit:
            return 0.0
        prediction = np.asarray(prediction, dtype=np.float64)
        if prediction.shape != self.data.shape:
            raise ShapeError(f"prediction of shape {prediction.shape} against data of shape {self.data.shape}")
        return 0.5 * float(np.sum((self.data - prediction) ** 2)) / self.sigma ** 2


@dataclass
class PcnState:
    alpha: np.ndarray
    misfit: float


@dataclass
class PcnChain:
    """Stored draws and bookkeeping of one pCN run."""

    beta: float
    iterations: int
    burn_in: int
    thin: int
    forward_kind: ForwardKind
    samples: List[np.ndarray] = field(default_factory=list)
    accept_count: int = 0
    per_step_seconds: List[float] = field(default_factory=list)
    misfits: List[float] = field(default_factory=list)

    @property
    def acceptance_rate(self) -> float:
        return self.accept_count / self.iterations if self.iterations else 0.0

    @property
    def mean_step_seconds(self) -> float:
        return float(np.mean(self.per_step_seconds)) if self.per_step_seconds else 0.0

    def sample_array(self) -> np.ndarray:
        return np.array(self.samples)


def _check_beta(beta: float):
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")


def acceptance_probability(current_misfit: float, proposed_misfit: float) -> float:
    """min{1, exp(Φ(α) − Φ(α̃))}."""
    return math.exp(min(0.0, current_misfit - proposed_misfit))


def initial_state(alpha: np.ndarray, forward: ForwardMap, observation: ObservationModel) -> PcnState:
    alpha = np.asarray(alpha, dtype=np.float64)
    misfit = 0.0 if observation.zero_misfit else observation.misfit(forward(alpha))
    return PcnState(alpha=alpha, misfit=misfit)


def pcn_step(
    state: PcnState,
    prior: GaussianPrior,
    beta: float,
    forward: ForwardMap,
    observation: ObservationModel,
    rng: Union[np.random.Generator, int],
) -> Tuple[PcnState, bool]:
    """
    One preconditioned Crank–Nicolson step.

    Args:
        state: current α and its cached misfit
        prior: Gaussian prior supplying the proposal noise
        beta: step size in (0, 1)
        forward: α → u at the observation points
        observation: data and noise model
        rng: generator (or seed) for the proposal and the accept draw

    Returns:
        (new state, accepted)
    """
    _check_beta(beta)
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    gamma = sample_prior(prior, xi=rng.standard_normal(prior.size))
    proposal = math.sqrt(1.0 - beta ** 2) * state.alpha + beta * gamma
    proposed_misfit = 0.0 if observation.zero_misfit else observation.misfit(forward(proposal))

    u = rng.random()
    if u < acceptance_probability(state.misfit, proposed_misfit):
        return PcnState(alpha=proposal, misfit=proposed_misfit), True
    return state, False


def run_pcn(
    prior: GaussianPrior,
    observation: ObservationModel,
    forward: ForwardMap,
    beta: float,
    iterations: int,
    burn_in: int = 0,
    thin: int = 1,
    seed: int = 0,
    forward_kind: ForwardKind = ForwardKind.LOCAL_KERNEL,
    initial_alpha: Optional[np.ndarray] = None,
) -> PcnChain:
    """
    Run a single chain, storing every `thin`-th state after `burn_in`.

    The chain starts at α = 0 unless initial_alpha is given.
    """
    _check_beta(beta)
    if iterations < 1 or thin < 1 or not 0 <= burn_in <= iterations:
        raise ParameterError("need iterations ≥ 1, thin ≥ 1 and 0 ≤ burn_in ≤ iterations")

    rng = np.random.default_rng(seed)
    start = np.zeros(prior.size) if initial_alpha is None else initial_alpha
    state = initial_state(start, forward, observation)
    chain = PcnChain(beta=beta, iterations=iterations, burn_in=burn_in, thin=thin,
                     forward_kind=ForwardKind(forward_kind))
    report_every = max(iterations // 10, 1)

    for n in range(iterations):
        tic = time.perf_counter()
        state, accepted = pcn_step(state, prior, beta, forward, observation, rng)
        chain.per_step_seconds.append(time.perf_counter() - tic)
        chain.accept_count += int(accepted)
        chain.misfits.append(state.misfit)
        if n >= burn_in and (n - burn_in) % thin == 0:
            chain.samples.append(state.alpha.copy())
        if (n + 1) % report_every == 0:
            logger.info(f"pCN step {n + 1}/{iterations}: acceptance {chain.accept_count / (n + 1):.3f}, "
                        f"misfit {state.misfit:.4e}")

    return chain
