# src/inversion/posterior.py
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from src.errors import ConfigurationError
from src.fields.sources import DEFAULT_SOURCE
from src.inversion.forward_maps import ForwardKind
from src.inversion.pcn import ForwardMap, ObservationModel, PcnChain, run_pcn
from src.inversion.prior import DEFAULT_S, DEFAULT_TAU, PRIOR_NEIGHBORS, GaussianPrior, KlExponent, sample_prior
from src.network.losses import relative_l2_error

logger = logging.getLogger(__name__)


@dataclass
class InversionConfig:
    tau: float = DEFAULT_TAU
    s_exponent: float = DEFAULT_S
    neighbors: int = PRIOR_NEIGHBORS
    kl_exponent: str = KlExponent.HALF.value
    sigma: float = 0.01
    beta: float = 0.02
    iterations: int = 7000
    burn_in: int = 2000
    thin: int = 1
    seed: int = 0
    truth_seed: int = 10 ** 6
    noise_seed: int = 10 ** 6 + 1
    forward: str = ForwardKind.LOCAL_KERNEL.value
    c: float = 1.0
    source: str = DEFAULT_SOURCE

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


@dataclass
class PosteriorSummary:
    kappa_mean: np.ndarray
    kappa_std: np.ndarray
    u_mean: np.ndarray
    chain: PcnChain
    kappa_error: Optional[float] = None
    u_error: Optional[float] = None
    config: Dict[str, object] = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return self.chain.acceptance_rate

    def to_dict(self) -> Dict[str, object]:
        return {
            "kappa_error": self.kappa_error,
            "u_error": self.u_error,
            "acceptance_rate": self.acceptance_rate,
            "mean_step_seconds": self.chain.mean_step_seconds,
            "stored_samples": len(self.chain.samples),
            "iterations": self.chain.iterations,
            "burn_in": self.chain.burn_in,
            "thin": self.chain.thin,
            "beta": self.chain.beta,
            "forward": self.chain.forward_kind.value,
            "config": self.config,
        }


def synthesize_observation(truth_alpha: np.ndarray, forward: ForwardMap, sigma: float, seed: int) -> ObservationModel:
    """v = F(α†) + σ η with η ~ N(0, I); the noise-free solution is kept as the truth."""
    truth_alpha = np.asarray(truth_alpha, dtype=np.float64)
    clean = forward(truth_alpha)
    noise = np.random.default_rng(seed).standard_normal(clean.shape)
    logger.info(f"Synthetic observation: N={clean.size}, sigma={sigma}, noise seed {seed}")
    return ObservationModel(data=clean + sigma * noise, sigma=sigma, seed=seed,
                            truth_alpha=truth_alpha, truth_solution=clean)


def synthetic_truth(prior: GaussianPrior, seed: int) -> np.ndarray:
    """A prior draw used as the true log-conductivity."""
    return sample_prior(prior, seed)


def summarize(chain: PcnChain, reconstruct: ForwardMap, observation: ObservationModel,
              config: Optional[Dict[str, object]] = None) -> PosteriorSummary:
    """
    Posterior mean and spread of κ = e^α, and ū from the local-kernel solve at log κ̄.

    Errors against the truth are reported when the observation carries one.
    """
    if not chain.samples:
        raise ConfigurationError("the chain stored no samples; lower burn_in or raise iterations")
    kappa = np.exp(chain.sample_array())
    kappa_mean = kappa.mean(axis=0)
    kappa_std = kappa.std(axis=0)
    u_mean = reconstruct(np.log(kappa_mean))

    summary = PosteriorSummary(kappa_mean=kappa_mean, kappa_std=kappa_std, u_mean=u_mean, chain=chain,
                               config=dict(config or {}))
    if observation.truth_alpha is not None:
        summary.kappa_error = relative_l2_error(kappa_mean, observation.truth_kappa)
    if observation.truth_solution is not None:
        summary.u_error = relative_l2_error(u_mean, observation.truth_solution)
    logger.info(f"Posterior: kappa error {summary.kappa_error}, u error {summary.u_error}, "
                f"acceptance {summary.acceptance_rate:.3f}, {chain.mean_step_seconds:.4g} s/step")
    return summary


def run_inversion(
    prior: GaussianPrior,
    observation: ObservationModel,
    forward: ForwardMap,
    reconstruct: ForwardMap,
    config: InversionConfig,
    initial_alpha: Optional[np.ndarray] = None,
) -> PosteriorSummary:
    """
    Sample the posterior with pCN and summarize it.

    Args:
        prior: graph Matérn prior
        observation: noisy data (with truth for synthetic runs)
        forward: forward map driving the chain (surrogate or local kernel)
        reconstruct: local-kernel forward used for ū
        config: step size, iterations, burn-in, thinning, seed
        initial_alpha: chain start, zero by default

    Returns:
        PosteriorSummary
    """
    chain = run_pcn(prior, observation, forward, config.beta, config.iterations, config.burn_in, config.thin,
                    config.seed, ForwardKind(config.forward), initial_alpha)
    return summarize(chain, reconstruct, observation, config.to_dict())


def save_posterior(summary: PosteriorSummary, directory: Path, store_samples: bool = False) -> Dict[str, Path]:
    """Write summary JSON, κ̄/std/ū CSV and optionally every stored α sample."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fields_path = directory / "posterior_fields.csv"
    table = np.column_stack([np.arange(summary.kappa_mean.size), summary.kappa_mean, summary.kappa_std,
                             summary.u_mean])
    np.savetxt(fields_path, table, delimiter=",", header="idx,kappa_mean,kappa_std,u_mean", comments="",
               fmt=["%d", "%.17g", "%.17g", "%.17g"])
    paths = {"fields": fields_path}

    timing_path = directory / "step_seconds.csv"
    np.savetxt(timing_path, np.asarray(summary.chain.per_step_seconds), header="seconds", comments="", fmt="%.9g")
    paths["timings"] = timing_path

    if store_samples:
        samples_path = directory / "alpha_samples.csv"
        np.savetxt(samples_path, summary.chain.sample_array(), delimiter=",", fmt="%.17g")
        paths["samples"] = samples_path

    summary_path = directory / "summary.json"
    with open(summary_path, "w", encoding="utf-8") as f:
        json.dump({**summary.to_dict(), "artifacts": {k: str(v) for k, v in paths.items()}}, f,
                  indent=2, sort_keys=True)
    paths["summary"] = summary_path
    logger.info(f"Saved posterior summary to {summary_path}")
    return paths
