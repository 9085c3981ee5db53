# src/network/training.py
import copy
import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import torch

from src.errors import ConfigurationError, ParameterError, TrainingDivergedError
from src.network.deeponet import DTYPE, DeepONet
from src.network.losses import LossBundle, ObsBatch, PdeBatch, loss_bc, loss_obs, loss_pde
from src.operators.discrete_operator import EstimatorKind

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "obs", "pde", "bc", "total", "lr")

# (w_obs, w_pde, w_bc) used for the published runs
DEFAULT_WEIGHTS: Dict[str, Tuple[float, float, float]] = {
    EstimatorKind.DM.value: (1.0, 1e-4, 0.0),
    EstimatorKind.RBF.value: (1.0, 1e-3, 0.0),
    EstimatorKind.GMLS.value: (1.0, 1e-7, 1.0),
    "inversion": (1.0, 0.01, 0.0),
}


@dataclass
class TrainingConfig:
    w_obs: float = 1.0
    w_pde: float = 0.0
    w_bc: float = 0.0
    lr0: float = 1e-3
    decay_r: float = 0.5
    decay_S: float = 20000.0
    epochs: int = 1000
    seed: int = 0
    log_every: int = 100

    def __post_init__(self):
        if min(self.w_obs, self.w_pde, self.w_bc) < 0:
            raise ParameterError("loss weights must be nonnegative")
        if self.lr0 <= 0:
            raise ParameterError(f"lr0 must be positive, got {self.lr0}")
        if self.epochs < 0:
            raise ParameterError(f"epochs must be nonnegative, got {self.epochs}")
        if self.decay_S <= 0 or self.log_every < 1:
            raise ParameterError("decay_S and log_every must be positive")

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    def learning_rate(self, n: int) -> float:
        """γ_n = γ₀ / (1 + r n / S)."""
        return self.lr0 / (1.0 + self.decay_r * n / self.decay_S)


def physics_weights(estimator: str, inversion: bool = False) -> Tuple[float, float, float]:
    key = "inversion" if inversion else EstimatorKind(estimator).value
    return DEFAULT_WEIGHTS[key]


@dataclass
class TrainingHistory:
    rows: List[Dict[str, float]] = field(default_factory=list)

    def record(self, epoch: int, losses: LossBundle, lr: float):
        row = {"epoch": epoch, **losses.as_floats(), "lr": lr}
        self.rows.append(row)
        logger.info(f"epoch {epoch}: total={row['total']:.6e} obs={row['obs']:.6e} "
                    f"pde={row['pde']:.6e} bc={row['bc']:.6e} lr={lr:.3e}")

    @property
    def epochs(self) -> List[int]:
        return [int(row["epoch"]) for row in self.rows]

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=HISTORY_COLUMNS)
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: (int(row[k]) if k == "epoch" else repr(float(row[k]))) for k in HISTORY_COLUMNS})
        return path


def total_loss(model: DeepONet, config: TrainingConfig, obs: Optional[ObsBatch] = None,
               pde: Optional[PdeBatch] = None, use_pde: bool = True, use_bc: bool = False) -> LossBundle:
    """Weighted sum of the loss terms that have data; absent terms count as zero."""
    zero = torch.zeros((), dtype=DTYPE)
    obs_loss = loss_obs(model, obs) if obs is not None else zero
    pde_loss = loss_pde(model, pde) if pde is not None and use_pde else zero
    bc_loss = loss_bc(model, pde) if pde is not None and use_bc else zero
    total = config.w_obs * obs_loss + config.w_pde * pde_loss + config.w_bc * bc_loss
    return LossBundle(obs=obs_loss, pde=pde_loss, bc=bc_loss, total=total)


def train(
    model: DeepONet,
    config: TrainingConfig,
    obs: Optional[ObsBatch] = None,
    pde: Optional[PdeBatch] = None,
) -> Tuple[DeepONet, TrainingHistory]:
    """
    Full-batch Adam training with inverse-time learning-rate decay.

    Args:
        model: network, trained in place
        config: weights, learning-rate schedule, epochs, seed
        obs: labelled samples (DeepONet data term)
        pde: physics samples (PI-DeepONet residual and boundary terms)

    Returns:
        (model, history); history rows at every log_every epochs, at epoch 0 and at the last epoch
    """
    has_obs = obs is not None and obs.size > 0 and config.w_obs > 0
    has_pde = pde is not None and pde.size > 0 and config.w_pde > 0
    use_bc = pde is not None and pde.near is not None and pde.near.numel() > 0 and config.w_bc > 0
    if not (has_obs or has_pde or use_bc):
        raise ConfigurationError("training needs at least one loss term with positive weight and data")
    obs = obs if has_obs else None
    pde = pde if (has_pde or use_bc) else None

    torch.manual_seed(config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr0, betas=(0.9, 0.999), eps=1e-8)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda n: 1.0 / (1.0 + config.decay_r * n / config.decay_S)
    )
    history = TrainingHistory()
    logger.info(f"Training {model.parameter_count()} parameters for {config.epochs} epochs "
                f"(w_obs={config.w_obs}, w_pde={config.w_pde}, w_bc={config.w_bc})")

    last_good = copy.deepcopy(model.state_dict())
    for n in range(config.epochs + 1):
        losses = total_loss(model, config, obs, pde, has_pde, use_bc)
        value = float(losses.total.detach())
        if not math.isfinite(value):
            logger.error(f"Non-finite loss at epoch {n}; restoring the last good parameters")
            model.load_state_dict(last_good)
            raise TrainingDivergedError(f"loss became {value} at epoch {n}", epoch=n, last_good_state=last_good)
        if n % config.log_every == 0 or n == config.epochs:
            history.record(n, losses, optimizer.param_groups[0]["lr"])
        if n == config.epochs:
            break
        last_good = copy.deepcopy(model.state_dict())
        optimizer.zero_grad()
        losses.total.backward()
        optimizer.step()
        scheduler.step()

    return model, history
