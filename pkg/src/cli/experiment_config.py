# src/cli/experiment_config.py
import json
import logging
import platform
import subprocess
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Dict, Mapping, Optional

from config.config import Config
from src.errors import ConfigurationError

logger = logging.getLogger(__name__)

PACKAGE_NAME = "manifold-operator-learning"


def flatten(values: Mapping[str, object], prefix: str = "") -> Dict[str, object]:
    """Nested mappings become dotted keys; already-flat files pass through."""
    flat = {}
    for key, value in values.items():
        name = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, Mapping):
            flat.update(flatten(value, name))
        else:
            flat[name] = value
    return flat


def load_config(path: Optional[Path]) -> Dict[str, object]:
    """Read a JSON experiment file of dotted keys ({} when no path is given)."""
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            values = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(values, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    return flatten(values)


def resolve(command: str, defaults: Mapping[str, object], file_values: Mapping[str, object],
            overrides: Mapping[str, object]) -> Dict[str, object]:
    """
    Merge defaults < config file < command-line flags for one command.

    File keys are read under the command prefix ("train.epochs") or bare ("epochs").
    Flags left at None do not override.

    Returns:
        Flat dict keyed by bare option names
    """
    resolved = dict(defaults)
    prefix = f"{command}."
    for key, value in file_values.items():
        name = key[len(prefix):] if key.startswith(prefix) else key
        if "." in name:
            continue
        if name not in defaults:
            raise ConfigurationError(f"unknown option '{key}' for {command}")
        resolved[name] = value
    for key, value in overrides.items():
        if value is not None:
            resolved[key] = value
    return resolved


def build_identifier() -> str:
    """Package version plus the git revision when run from a checkout."""
    try:
        package = version(PACKAGE_NAME)
    except PackageNotFoundError:
        package = "dev"
    try:
        revision = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"], cwd=Config.BASE_DIR, capture_output=True, text=True, timeout=5
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        revision = ""
    return f"{package}+{revision}" if revision else package


@dataclass
class RunReport:
    """What a command measured, how it was configured and what it wrote."""

    command: str
    config: Dict[str, object]
    metrics: Dict[str, object] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    build: str = field(default_factory=build_identifier)
    directory: Optional[Path] = None

    def add_artifact(self, name: str, path: Path):
        self.artifacts[name] = str(path)

    def to_dict(self) -> Dict[str, object]:
        return {
            "command": self.command,
            "config": self.config,
            "metrics": self.metrics,
            "timings": self.timings,
            "artifacts": self.artifacts,
            "build": self.build,
            "python": platform.python_version(),
        }

    def write(self, directory: Optional[Path] = None, name: str = "report.json") -> Path:
        directory = directory or self.directory
        if directory is None:
            raise ConfigurationError("no output directory for the report")
        missing = [path for path in self.artifacts.values() if not Path(path).exists()]
        if missing:
            raise ConfigurationError(f"report references missing artifacts: {missing}")
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / name
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True, default=str)
        logger.info(f"Report written to {path}")
        return path
