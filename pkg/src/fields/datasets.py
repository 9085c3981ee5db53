# src/fields/datasets.py
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from src.errors import ConfigurationError, ParameterError, SolverError
from src.fields.kappa import (
    PARAMETRIC_FAMILIES,
    KappaFamily,
    KappaField,
    Ranges,
    evaluate,
    sample_kappa,
)
from src.fields.sensors import SensorGrid
from src.fields.sources import DEFAULT_BOUNDARY, DEFAULT_SOURCE, source_values
from src.geometry.boundary import default_boundary_epsilon, split_near_boundary
from src.geometry.point_cloud import ManifoldKind, PointCloud, load_cloud, save_cloud
from src.operators.assembly import EstimatorSettings, OperatorFactory
from src.solvers.forward import ForwardProblem, SolveMethod, solve_dirichlet, solve_linear
from src.solvers.semilinear import solve_semilinear

logger = logging.getLogger(__name__)

MIXED = "mixed"
SEMILINEAR_AMPLITUDE = (0.5, 1.5)

KappaSampler = Callable[[int], np.ndarray]


class ProblemKind(str, Enum):
    LINEAR = "linear"
    DIRICHLET = "dirichlet"
    SEMILINEAR = "semilinear"
    PRIOR = "prior"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"
    PDE = "pde"
    TRUTH = "truth"


SPLIT_TAGS = {Split.TRAIN: 0, Split.TEST: 1, Split.PDE: 2, Split.TRUTH: 3}


def derive_seed(base_seed: int, split: Split, k: int) -> int:
    """Per-sample seed from (base seed, split, sample index)."""
    state = np.random.SeedSequence([int(base_seed), SPLIT_TAGS[Split(split)], int(k)]).generate_state(1)
    return int(state[0])


def family_schedule(family: str, n_samples: int) -> List[str]:
    """Family label per sample; MIXED assigns equal consecutive blocks to the four families."""
    if family == MIXED:
        labels = []
        for fam, block in zip(PARAMETRIC_FAMILIES, np.array_split(np.arange(n_samples), len(PARAMETRIC_FAMILIES))):
            labels.extend([fam.value] * block.size)
        return labels
    return [KappaFamily(family).value] * n_samples


@dataclass
class DatasetConfig:
    """How to generate one split of (κ, û) pairs."""

    n_samples: int
    family: str = KappaFamily.LINEAR.value
    problem: ProblemKind = ProblemKind.LINEAR
    split: Split = Split.TRAIN
    estimator: EstimatorSettings = field(default_factory=EstimatorSettings)
    c: float = 1.0
    source: str = DEFAULT_SOURCE
    boundary_source: str = DEFAULT_BOUNDARY
    boundary_epsilon: Optional[float] = None
    seed: int = 0
    solve: bool = True
    solve_method: SolveMethod = SolveMethod.AUTO
    ranges: Optional[Dict[str, Ranges]] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            "n_samples": self.n_samples,
            "family": self.family,
            "problem": ProblemKind(self.problem).value,
            "split": Split(self.split).value,
            "estimator": self.estimator.to_dict(),
            "c": self.c,
            "source": self.source,
            "boundary_source": self.boundary_source,
            "boundary_epsilon": self.boundary_epsilon,
            "seed": self.seed,
            "solve": self.solve,
            "solve_method": SolveMethod(self.solve_method).value,
            "ranges": {k: {n: list(v) for n, v in r.items()} for k, r in (self.ranges or {}).items()},
        }


@dataclass
class OperatorDataset:
    """Paired κ sensor vectors and reference solutions on a shared cloud.

    Attributes:
        kappa_sensors: (K, m) κ at the sensors
        kappa_points: (K, N) κ at the cloud points, used to rebuild operators
        solutions: (K, N) reference solutions, or None for physics-only sets
        cloud: shared point cloud
        sensors: (m, 3) sensor locations
        families: family label per sample
        seeds: κ seed per sample
        residuals: solver residual per sample (empty when unsolved)
        manifest: config echo plus bookkeeping
    """

    kappa_sensors: np.ndarray
    kappa_points: np.ndarray
    solutions: Optional[np.ndarray]
    cloud: PointCloud
    sensors: np.ndarray
    split: Split
    families: List[str]
    seeds: List[int]
    residuals: List[float] = field(default_factory=list)
    manifest: Dict[str, object] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.kappa_sensors.shape[0]

    @property
    def has_solutions(self) -> bool:
        return self.solutions is not None

    def subset(self, indices) -> "OperatorDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            kappa_sensors=self.kappa_sensors[indices],
            kappa_points=self.kappa_points[indices],
            solutions=None if self.solutions is None else self.solutions[indices],
            families=[self.families[i] for i in indices],
            seeds=[self.seeds[i] for i in indices],
            residuals=[self.residuals[i] for i in indices] if self.residuals else [],
        )

    def permuted(self, seed: int) -> "OperatorDataset":
        return self.subset(np.random.default_rng(seed).permutation(self.size))

    def family_counts(self) -> Dict[str, int]:
        labels, counts = np.unique(np.array(self.families), return_counts=True)
        return {str(l): int(c) for l, c in zip(labels, counts)}


class DatasetGenerator:
    """Samples κ, builds operators and solves the forward problem per sample."""

    def __init__(self, config: DatasetConfig, cloud: PointCloud, sensors: SensorGrid,
                 kappa_sampler: Optional[KappaSampler] = None):
        if config.n_samples < 1:
            raise ParameterError(f"n_samples must be positive, got {config.n_samples}")
        self.config = config
        self.cloud = cloud
        self.sensors = sensors
        self.kappa_sampler = kappa_sampler
        self.problem = ProblemKind(config.problem)

        if self.problem == ProblemKind.DIRICHLET and cloud.kind != ManifoldKind.SEMI_TORUS:
            raise ConfigurationError("Dirichlet datasets need a semi-torus cloud")
        if self.problem == ProblemKind.PRIOR:
            if kappa_sampler is None:
                raise ConfigurationError("prior datasets need a kappa sampler")
            if sensors.m != cloud.size:
                raise ConfigurationError("prior datasets use the cloud points as sensors")

        self.f_values = source_values(config.source, cloud.points, cloud.R, cloud.r)
        self.boundary = None
        self.g_values = None
        if self.problem == ProblemKind.DIRICHLET:
            eps = config.boundary_epsilon or default_boundary_epsilon(cloud)
            self.boundary = split_near_boundary(cloud, eps)
            self.g_values = source_values(config.boundary_source, cloud.points, cloud.R, cloud.r)
        self.factory = OperatorFactory(cloud, config.estimator) if config.solve else None
        self._positivity = np.vstack([cloud.points, sensors.locations])

    def _kappa(self, family: str, seed: int):
        if self.problem == ProblemKind.PRIOR:
            values = np.asarray(self.kappa_sampler(seed), dtype=np.float64)
            return None, values, values.copy()
        if self.problem == ProblemKind.SEMILINEAR:
            a = float(np.random.default_rng(seed).uniform(*SEMILINEAR_AMPLITUDE))
            kappa = KappaField(family=KappaFamily.RADIAL, coeffs={"a": a}, seed=seed)
        else:
            ranges = (self.config.ranges or {}).get(family)
            kappa = sample_kappa(KappaFamily(family), seed, self._positivity, ranges)
        return kappa, evaluate(kappa, self.sensors.locations), evaluate(kappa, self.cloud.points)

    def _solve(self, kappa_points: np.ndarray):
        operator = self.factory.build(kappa_points)
        if self.problem == ProblemKind.SEMILINEAR:
            return solve_semilinear(operator, kappa_points)
        problem = ForwardProblem(operator=operator, c=self.config.c, f_values=self.f_values,
                                 boundary=self.boundary, g_values=self.g_values)
        if self.problem == ProblemKind.DIRICHLET:
            return solve_dirichlet(problem, self.config.solve_method)
        return solve_linear(problem, self.config.solve_method)

    def generate(self) -> OperatorDataset:
        config = self.config
        n = config.n_samples
        families = family_schedule(config.family, n) if self.problem in (
            ProblemKind.LINEAR, ProblemKind.DIRICHLET) else [self.problem.value] * n
        seeds = [derive_seed(config.seed, config.split, k) for k in range(n)]

        kappa_sensors = np.empty((n, self.sensors.m))
        kappa_points = np.empty((n, self.cloud.size))
        solutions = np.empty((n, self.cloud.size)) if config.solve else None
        residuals, iterations, coefficients = [], [], []

        for k, (family, seed) in enumerate(zip(families, seeds)):
            kappa, kappa_sensors[k], kappa_points[k] = self._kappa(family, seed)
            coefficients.append(kappa.coeffs if kappa is not None else {})
            if not config.solve:
                continue
            try:
                report = self._solve(kappa_points[k])
            except SolverError as e:
                logger.error(f"Forward solve failed for sample {k} (kappa seed {seed})")
                raise SolverError(f"forward solve failed for kappa seed {seed}: {e}",
                                  getattr(e, "condition_estimate", None)) from e
            solutions[k] = report.solution
            residuals.append(report.residual_norm)
            iterations.append(report.iterations)
            if (k + 1) % 50 == 0:
                logger.info(f"Generated {k + 1}/{n} samples")

        manifest = {
            "config": config.to_dict(),
            "cloud": self.cloud.manifest(),
            "sensor_shape": [self.sensors.rows, self.sensors.cols],
            "families": families,
            "seeds": seeds,
            "coefficients": coefficients,
            "residuals": residuals,
            "iterations": iterations,
            "estimator_params": self.factory.settings.to_dict() if self.factory else None,
            "boundary_epsilon": self.boundary.epsilon if self.boundary else None,
        }
        logger.info(f"Dataset ready: {n} {Split(config.split).value} "
                    f"samples, problem={self.problem.value}, family={config.family}")
        return OperatorDataset(
            kappa_sensors=kappa_sensors,
            kappa_points=kappa_points,
            solutions=solutions,
            cloud=self.cloud,
            sensors=np.array(self.sensors.locations),
            split=Split(config.split),
            families=families,
            seeds=seeds,
            residuals=residuals,
            manifest=manifest,
        )


def generate_dataset(config: DatasetConfig, cloud: PointCloud, sensors: SensorGrid,
                     kappa_sampler: Optional[KappaSampler] = None) -> OperatorDataset:
    """
    Generate one dataset split.

    Args:
        config: counts, family (or "mixed"), estimator, c, f, seeds
        cloud: shared point cloud
        sensors: sensor grid (the cloud itself for prior datasets)
        kappa_sampler: seed -> κ at the cloud points, used by prior datasets

    Returns:
        OperatorDataset
    """
    return DatasetGenerator(config, cloud, sensors, kappa_sampler).generate()


def _save_matrix(path: Path, matrix: np.ndarray):
    np.savetxt(path, matrix, delimiter=",", fmt="%.17g")


def _load_matrix(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def save_dataset(dataset: OperatorDataset, directory: Path) -> Path:
    """Write the dataset directory (CSV matrices, cloud and manifest)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _save_matrix(directory / "kappa_sensors.csv", dataset.kappa_sensors)
    _save_matrix(directory / "kappa_points.csv", dataset.kappa_points)
    _save_matrix(directory / "sensors.csv", dataset.sensors)
    if dataset.solutions is not None:
        _save_matrix(directory / "solutions.csv", dataset.solutions)
    save_cloud(dataset.cloud, directory, "cloud")

    manifest = dict(dataset.manifest)
    manifest.update({
        "split": dataset.split.value,
        "families": dataset.families,
        "seeds": dataset.seeds,
        "residuals": dataset.residuals,
        "has_solutions": dataset.has_solutions,
    })
    with open(directory / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    logger.info(f"Saved {dataset.size}-sample dataset to {directory}")
    return directory


def load_dataset(directory: Path) -> OperatorDataset:
    """Read a dataset written by save_dataset."""
    directory = Path(directory)
    if not (directory / "manifest.json").exists():
        raise ConfigurationError(f"no dataset manifest in {directory}")
    with open(directory / "manifest.json", "r", encoding="utf-8") as f:
        manifest = json.load(f)
    solutions = _load_matrix(directory / "solutions.csv") if manifest.get("has_solutions") else None
    return OperatorDataset(
        kappa_sensors=_load_matrix(directory / "kappa_sensors.csv"),
        kappa_points=_load_matrix(directory / "kappa_points.csv"),
        solutions=solutions,
        cloud=load_cloud(directory, "cloud"),
        sensors=_load_matrix(directory / "sensors.csv"),
        split=Split(manifest["split"]),
        families=list(manifest["families"]),
        seeds=[int(s) for s in manifest["seeds"]],
        residuals=[float(r) for r in manifest["residuals"]],
        manifest=manifest,
    )
