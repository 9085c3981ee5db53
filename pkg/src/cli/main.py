# src/cli/main.py
"""Command-line entry point: `python app.py <command> [options]`."""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from config.config import Config
from src.cli.commands import COMMANDS, DEFAULTS
from src.cli.experiment_config import load_config, resolve
from src.errors import ConfigurationError, ManifoldOperatorError, ParameterError, ShapeError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

USAGE_ERRORS = (ConfigurationError, ParameterError, ShapeError, FileNotFoundError, ValueError)


def _add_cloud_options(parser: argparse.ArgumentParser):
    parser.add_argument("--manifold", choices=["torus", "semi-torus"], help="Benchmark manifold")
    parser.add_argument("--N", type=int, help="Number of random points")
    parser.add_argument("--grid", help="Intrinsic grid ROWSxCOLS instead of random points")
    parser.add_argument("--R", type=float, help="Major radius")
    parser.add_argument("--r", type=float, help="Minor radius")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mol", description="Operator learning and Bayesian inversion on point-cloud manifolds."
    )
    parser.add_argument("--log-level", default=None, help="Logging level (default: MOL_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="JSON file of dotted keys; flags override it")
        p.add_argument("--out", help="Output directory")
        p.add_argument("--seed", type=int, help="RNG seed")
        return p

    p = command("generate-cloud", "Sample a torus or semi-torus point cloud")
    _add_cloud_options(p)

    p = command("generate", "Generate a (kappa, solution) dataset split")
    _add_cloud_options(p)
    p.add_argument("--cloud", help="Reuse a saved cloud directory")
    p.add_argument("--family", help="linear, exponential, piecewise, quadratic or mixed")
    p.add_argument("--problem", choices=["linear", "dirichlet", "semilinear", "prior"])
    p.add_argument("--n-obs", dest="n_obs", type=int, help="Number of kappa samples")
    p.add_argument("--split", choices=["train", "test", "pde", "truth"])
    p.add_argument("--estimator", choices=["dm", "rbf", "gmls"])
    p.add_argument("--c", type=float, help="Reaction coefficient")
    p.add_argument("--source", help="Right-hand side name")
    p.add_argument("--boundary-source", dest="boundary_source", help="Dirichlet data name")
    p.add_argument("--boundary-epsilon", dest="boundary_epsilon", type=float)
    p.add_argument("--no-solve", dest="solve", action="store_const", const=False,
                   help="Only sample kappa (physics-loss set)")
    p.add_argument("--sensor-rows", dest="sensor_rows", type=int)
    p.add_argument("--sensor-cols", dest="sensor_cols", type=int)
    p.add_argument("--prior-tau", dest="prior_tau", type=float)
    p.add_argument("--prior-s", dest="prior_s", type=float)
    p.add_argument("--prior-kl", dest="prior_kl", choices=["half", "printed"])

    p = command("train", "Train a DeepONet or PI-DeepONet")
    p.add_argument("--mode", choices=["deeponet", "pi-deeponet"])
    p.add_argument("--dataset", help="Labelled dataset directory")
    p.add_argument("--pde-dataset", dest="pde_dataset", help="Physics (kappa-only) dataset directory")
    p.add_argument("--epochs", type=int)
    p.add_argument("--w-obs", dest="w_obs", type=float)
    p.add_argument("--w-pde", dest="w_pde", type=float)
    p.add_argument("--w-bc", dest="w_bc", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--decay-r", dest="decay_r", type=float)
    p.add_argument("--decay-s", dest="decay_s", type=float)
    p.add_argument("--p", type=int, help="Latent width")
    p.add_argument("--branch", choices=["mlp", "cnn"])
    p.add_argument("--branch-widths", dest="branch_widths", help="Comma-separated hidden widths")
    p.add_argument("--trunk-width", dest="trunk_width", type=int)
    p.add_argument("--trunk-depth", dest="trunk_depth", type=int)
    p.add_argument("--log-every", dest="log_every", type=int)

    p = command("eval", "Mean relative L2 test error of a checkpoint")
    p.add_argument("--checkpoint", help="Directory holding model.json/model.bin")
    p.add_argument("--dataset", help="Test dataset directory")
    p.add_argument("--repeats", type=int)
    p.add_argument("--table-ref", dest="table_ref", help="e.g. table1:linear:1000")

    p = command("invert", "Graph-pCN Bayesian inversion on a synthetic truth")
    _add_cloud_options(p)
    p.add_argument("--forward", choices=["local-kernel", "surrogate"])
    p.add_argument("--checkpoint", help="Surrogate checkpoint directory")
    p.add_argument("--sigma", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--kl-exponent", dest="kl_exponent", choices=["half", "printed"])
    p.add_argument("--neighbors", type=int)
    p.add_argument("--c", type=float)
    p.add_argument("--source")
    p.add_argument("--truth-seed", dest="truth_seed", type=int)
    p.add_argument("--noise-seed", dest="noise_seed", type=int)
    p.add_argument("--store-samples", dest="store_samples", action="store_const", const=True)
    p.add_argument("--table-ref", dest="table_ref")

    p = command("bench", "Per-step pCN timings of both forward maps over cloud sizes")
    p.add_argument("--sizes", help="Comma-separated N values (perfect squares use grids)")
    p.add_argument("--steps", type=int)
    p.add_argument("--checkpoint-dir", dest="checkpoint_dir", help="Directory with N<size>/model.json")
    p.add_argument("--train-quick", dest="train_quick", action="store_const", const=True)
    p.add_argument("--quick-epochs", dest="quick_epochs", type=int)
    p.add_argument("--quick-samples", dest="quick_samples", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--source")

    p = command("convergence", "Estimator consistency sweep against the exact Laplace-Beltrami image")
    p.add_argument("--estimators", help="Comma-separated subset of dm,rbf,gmls")
    p.add_argument("--sizes", help="Comma-separated N values")
    p.add_argument("--seeds", type=int)
    p.add_argument("--R", type=float)
    p.add_argument("--r", type=float)
    return parser


def run(args: argparse.Namespace) -> int:
    command = args.command
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "log_level")}
    options = resolve(command, DEFAULTS[command], load_config(args.config), overrides)
    logger.info(f"Running {command}")
    report = COMMANDS[command](options)
    path = report.write()
    print(path)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = Config()
    logging.basicConfig(level=(args.log_level or config.LOG_LEVEL).upper(),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    config.apply_thread_limits()

    try:
        return run(args)
    except USAGE_ERRORS as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE
    except ManifoldOperatorError as e:
        logger.error(f"{args.command} failed numerically: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
