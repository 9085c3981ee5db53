"""Build the benchmark clouds and dataset splits used by the experiments."""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import logging
from config.config import Config
from src.fields.datasets import DatasetConfig, ProblemKind, Split, generate_dataset, save_dataset
from src.fields.sensors import build_sensor_grid
from src.geometry.point_cloud import ManifoldKind, sample_cloud, save_cloud
from src.operators.assembly import EstimatorSettings
from src.operators.discrete_operator import EstimatorKind

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

# (name, manifold, N, problem, family, estimator, split, samples, solve)
BENCHMARKS = [
    ("torus-dm-linear-train", ManifoldKind.TORUS, 2500, ProblemKind.LINEAR, "linear", EstimatorKind.DM, Split.TRAIN, 100, True),
    ("torus-dm-linear-test", ManifoldKind.TORUS, 2500, ProblemKind.LINEAR, "linear", EstimatorKind.DM, Split.TEST, 200, True),
    ("torus-dm-linear-pde", ManifoldKind.TORUS, 2500, ProblemKind.LINEAR, "linear", EstimatorKind.DM, Split.PDE, 100, False),
    ("torus-rbf-linear-train", ManifoldKind.TORUS, 2500, ProblemKind.LINEAR, "linear", EstimatorKind.RBF, Split.TRAIN, 100, True),
    ("torus-rbf-linear-pde", ManifoldKind.TORUS, 2500, ProblemKind.LINEAR, "linear", EstimatorKind.RBF, Split.PDE, 100, False),
    ("semitorus-gmls-train", ManifoldKind.SEMI_TORUS, 2500, ProblemKind.DIRICHLET, "linear", EstimatorKind.GMLS, Split.TRAIN, 25, True),
    ("semitorus-gmls-test", ManifoldKind.SEMI_TORUS, 2500, ProblemKind.DIRICHLET, "linear", EstimatorKind.GMLS, Split.TEST, 200, True),
    ("semitorus-gmls-pde", ManifoldKind.SEMI_TORUS, 2500, ProblemKind.DIRICHLET, "linear", EstimatorKind.GMLS, Split.PDE, 100, False),
    ("torus-dm-semilinear-train", ManifoldKind.TORUS, 2500, ProblemKind.SEMILINEAR, "radial", EstimatorKind.DM, Split.TRAIN, 10, True),
    ("torus-dm-semilinear-test", ManifoldKind.TORUS, 2500, ProblemKind.SEMILINEAR, "radial", EstimatorKind.DM, Split.TEST, 200, True),
    ("torus-dm-semilinear-pde", ManifoldKind.TORUS, 2500, ProblemKind.SEMILINEAR, "radial", EstimatorKind.DM, Split.PDE, 100, False),
]


def main():
    """Benchmark data preparation pipeline."""
    config = Config()
    config.ensure_dirs()
    config.apply_thread_limits()
    logger.info("=== Benchmark Data Preparation ===\n")

    clouds = {}
    for name, kind, n, problem, family, estimator, split, samples, solve in BENCHMARKS:
        key = (kind, n)
        if key not in clouds:
            logger.info(f"\nSampling {kind.value} cloud with N={n}...")
            clouds[key] = sample_cloud(kind, n, seed=config.DEFAULT_SEED)
            save_cloud(clouds[key], config.DATA_DIR / f"cloud-{kind.value}-{n}")
        cloud = clouds[key]

        logger.info(f"\nGenerating {name} ({samples} samples)...")
        dataset = generate_dataset(
            DatasetConfig(
                n_samples=samples,
                family=family,
                problem=problem,
                split=split,
                estimator=EstimatorSettings(kind=estimator),
                seed=config.DEFAULT_SEED,
                solve=solve,
            ),
            cloud,
            build_sensor_grid(kind),
        )
        save_dataset(dataset, config.DATA_DIR / name)
        logger.info(f"Saved: {config.DATA_DIR / name}")

    logger.info("\n✅ Data preparation complete!")

if __name__ == "__main__":
    main()
