# src/network/deeponet.py
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn

from src.errors import ConfigurationError, ShapeError

logger = logging.getLogger(__name__)

DTYPE = torch.float64


@dataclass
class ModelConfig:
    """Architecture of a DeepONet.

    Attributes:
        m: number of sensors (branch input width)
        p: latent width shared by branch and trunk outputs
        branch_kind: "mlp" or "cnn" (the cnn branch reshapes sensors to sensor_shape)
        branch_widths: hidden widths of the MLP branch
        sensor_shape: (rows, cols) of the sensor grid, needed by the cnn branch
        trunk_width: hidden width of the trunk
        trunk_depth: number of hidden trunk layers
        seed: Glorot initialization seed
    """

    m: int
    p: int = 32
    branch_kind: str = "mlp"
    branch_widths: List[int] = field(default_factory=lambda: [128, 128])
    sensor_shape: Optional[Tuple[int, int]] = None
    trunk_width: int = 32
    trunk_depth: int = 3
    seed: int = 0

    def to_dict(self) -> Dict[str, object]:
        out = asdict(self)
        out["sensor_shape"] = list(self.sensor_shape) if self.sensor_shape else None
        return out

    @classmethod
    def from_dict(cls, values: Dict[str, object]) -> "ModelConfig":
        values = dict(values)
        if values.get("sensor_shape"):
            values["sensor_shape"] = tuple(values["sensor_shape"])
        return cls(**values)


class BranchNet(nn.Module):
    """Fully connected branch: m → widths → p with ReLU."""

    def __init__(self, m: int, widths: List[int], p: int):
        super().__init__()
        dims = [m] + list(widths)
        layers = []
        for i in range(len(dims) - 1):
            layers.append(nn.Linear(dims[i], dims[i + 1]))
            layers.append(nn.ReLU())
        layers.append(nn.Linear(dims[-1], p))
        self.network = nn.Sequential(*layers)

    def forward(self, x):
        return self.network(x)


class ConvBranchNet(nn.Module):
    """Two 3×3 stride-2 convolutions (16, 32 channels), a dense 32 layer, then p."""

    def __init__(self, sensor_shape: Tuple[int, int], p: int, kernel: int = 3, stride: int = 2):
        super().__init__()
        rows, cols = sensor_shape
        self.sensor_shape = (rows, cols)
        self.features = nn.Sequential(
            nn.Conv2d(1, 16, kernel, stride=stride),
            nn.ReLU(),
            nn.Conv2d(16, 32, kernel, stride=stride),
            nn.ReLU(),
            nn.Flatten(),
        )
        h_rows = ((rows - kernel) // stride + 1 - kernel) // stride + 1
        h_cols = ((cols - kernel) // stride + 1 - kernel) // stride + 1
        if h_rows < 1 or h_cols < 1:
            raise ConfigurationError(f"sensor grid {rows}x{cols} is too small for the convolutional branch")
        self.head = nn.Sequential(nn.Linear(32 * h_rows * h_cols, 32), nn.ReLU(), nn.Linear(32, p))

    def forward(self, x):
        lead = x.shape[:-1]
        images = x.reshape(-1, 1, *self.sensor_shape)
        return self.head(self.features(images)).reshape(*lead, -1)


class TrunkNet(nn.Module):
    """Trunk: 3 → width (× depth) → p with tanh-approximated GELU."""

    def __init__(self, width: int, depth: int, p: int, in_dim: int = 3):
        super().__init__()
        dims = [in_dim] + [width] * depth
        layers = []
        for i in range(len(dims) - 1):
            layers.append(nn.Linear(dims[i], dims[i + 1]))
            layers.append(nn.GELU(approximate="tanh"))
        layers.append(nn.Linear(dims[-1], p))
        self.network = nn.Sequential(*layers)

    def forward(self, x):
        return self.network(x)


class DeepONet(nn.Module):
    """G_θ(κ)(x) = Σ_k b_k(κ(Ξ)) t_k(x) + b₀."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        if config.branch_kind == "mlp":
            self.branch = BranchNet(config.m, config.branch_widths, config.p)
        elif config.branch_kind == "cnn":
            if not config.sensor_shape or config.sensor_shape[0] * config.sensor_shape[1] != config.m:
                raise ConfigurationError("the cnn branch needs sensor_shape with rows * cols == m")
            self.branch = ConvBranchNet(config.sensor_shape, config.p)
        else:
            raise ConfigurationError(f"unknown branch kind '{config.branch_kind}'")
        self.trunk = TrunkNet(config.trunk_width, config.trunk_depth, config.p)
        self.b0 = nn.Parameter(torch.zeros((), dtype=DTYPE))
        self.to(DTYPE)
        self.reset_parameters(config.seed)

    def reset_parameters(self, seed: int):
        """Glorot-uniform weights and zero biases from a fixed seed."""
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            for module in self.modules():
                if isinstance(module, (nn.Linear, nn.Conv2d)):
                    nn.init.xavier_uniform_(module.weight)
                    nn.init.zeros_(module.bias)
        with torch.no_grad():
            self.b0.zero_()

    def forward(self, kappa_sensors: torch.Tensor, locations: torch.Tensor) -> torch.Tensor:
        """
        Predict the solution at the given locations.

        Args:
            kappa_sensors: (m,) or (K, m)
            locations: (N, 3) shared, or (K, N, 3) per sample

        Returns:
            (N,) for a single sensor vector, else (K, N)
        """
        kappa_sensors = torch.as_tensor(kappa_sensors, dtype=DTYPE)
        locations = torch.as_tensor(locations, dtype=DTYPE)
        if kappa_sensors.shape[-1] != self.config.m:
            raise ShapeError(f"expected {self.config.m} sensor values, got {kappa_sensors.shape[-1]}")
        if locations.shape[-1] != 3:
            raise ShapeError(f"locations must end in 3 coordinates, got {tuple(locations.shape)}")

        single = kappa_sensors.dim() == 1
        branch = self.branch(kappa_sensors.reshape(-1, self.config.m))
        trunk = self.trunk(locations)
        if locations.dim() == 3:
            if locations.shape[0] != branch.shape[0]:
                raise ShapeError("per-sample locations need one location set per sensor vector")
            out = torch.einsum("kp,knp->kn", branch, trunk) + self.b0
        else:
            out = branch @ trunk.T + self.b0
        return out[0] if single else out

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def parameter_layout(model: nn.Module) -> List[Dict[str, object]]:
    """Name, shape and offset of every parameter in the flat vector."""
    layout, offset = [], 0
    for name, param in model.named_parameters():
        layout.append({"name": name, "shape": list(param.shape), "offset": offset})
        offset += param.numel()
    return layout


def flatten_parameters(model: nn.Module) -> np.ndarray:
    return torch.cat([p.detach().reshape(-1) for p in model.parameters()]).cpu().numpy().astype("<f8")


def load_flat_parameters(model: nn.Module, flat: np.ndarray):
    flat = torch.as_tensor(np.asarray(flat, dtype=np.float64))
    expected = sum(p.numel() for p in model.parameters())
    if flat.numel() != expected:
        raise ShapeError(f"flat vector has {flat.numel()} values, model has {expected} parameters")
    with torch.no_grad():
        offset = 0
        for param in model.parameters():
            n = param.numel()
            param.copy_(flat[offset:offset + n].reshape(param.shape))
            offset += n


def save_checkpoint(model: DeepONet, directory: Path, stem: str = "model",
                    extra: Optional[Dict[str, object]] = None) -> Path:
    """
    Write a JSON header and a little-endian float64 parameter blob.

    Args:
        model: the network
        directory: output directory
        stem: produces <stem>.json and <stem>.bin
        extra: anything else to keep in the header (training config, seeds)

    Returns:
        Path to the header
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = {
        "architecture": model.config.to_dict(),
        "layout": parameter_layout(model),
        "parameter_count": model.parameter_count(),
        "extra": extra or {},
    }
    header_path = directory / f"{stem}.json"
    with open(header_path, "w", encoding="utf-8") as f:
        json.dump(header, f, indent=2, sort_keys=True)
    flatten_parameters(model).tofile(directory / f"{stem}.bin")
    logger.info(f"Saved checkpoint ({model.parameter_count()} parameters) to {header_path}")
    return header_path


def load_checkpoint(directory: Path, stem: str = "model") -> Tuple[DeepONet, Dict[str, object]]:
    """Rebuild a DeepONet from save_checkpoint output; returns (model, header)."""
    directory = Path(directory)
    header_path = directory / f"{stem}.json"
    if not header_path.exists():
        raise ConfigurationError(f"no checkpoint header at {header_path}")
    with open(header_path, "r", encoding="utf-8") as f:
        header = json.load(f)
    model = DeepONet(ModelConfig.from_dict(header["architecture"]))
    load_flat_parameters(model, np.fromfile(directory / f"{stem}.bin", dtype="<f8"))
    return model, header
