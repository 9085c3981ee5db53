# src/cli/commands.py
import csv
import logging
import shutil
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.config import Config
from src.cli.experiment_config import RunReport
from src.cli.targets import lookup
from src.errors import ConfigurationError, ParameterError, ShapeError, TrainingDivergedError
from src.fields.datasets import (
    DatasetConfig,
    OperatorDataset,
    ProblemKind,
    Split,
    generate_dataset,
    load_dataset,
    save_dataset,
)
from src.fields.sensors import build_sensor_grid, sensors_from_cloud
from src.fields.sources import DEFAULT_BOUNDARY, DEFAULT_SOURCE, source_values
from src.geometry.boundary import split_near_boundary
from src.geometry.point_cloud import ManifoldKind, PointCloud, load_cloud, sample_cloud, sample_grid, save_cloud
from src.inversion.forward_maps import ForwardKind, LocalKernelForward, SurrogateForward
from src.inversion.pcn import run_pcn
from src.inversion.posterior import (
    InversionConfig,
    run_inversion,
    save_posterior,
    synthesize_observation,
    synthetic_truth,
)
from src.inversion.prior import DEFAULT_S, DEFAULT_TAU, PRIOR_NEIGHBORS, KlExponent, build_prior, kappa_sampler
from src.network.deeponet import DeepONet, ModelConfig, load_checkpoint, save_checkpoint
from src.network.losses import ObsBatch, build_pde_batch, mean_l2_relative_error, relative_l2_error
from src.network.training import TrainingConfig, physics_weights, train
from src.operators.assembly import EstimatorSettings, OperatorFactory
from src.operators.discrete_operator import EstimatorKind
from src.solvers.manufactured import laplace_beltrami_cos_theta

logger = logging.getLogger(__name__)

EVAL_REPEATS = 3
DEFAULT_INVERSION_GRID = "20x20"

CLOUD_DEFAULTS = {"manifold": ManifoldKind.TORUS.value, "N": 2500, "grid": None, "R": 2.0, "r": 1.0, "seed": 0}

DEFAULTS: Dict[str, Dict[str, object]] = {
    "generate-cloud": {**CLOUD_DEFAULTS, "out": None},
    "generate": {
        **CLOUD_DEFAULTS,
        "cloud": None,
        "family": "linear",
        "problem": ProblemKind.LINEAR.value,
        "n_obs": 100,
        "split": Split.TRAIN.value,
        "estimator": EstimatorKind.DM.value,
        "c": 1.0,
        "source": DEFAULT_SOURCE,
        "boundary_source": DEFAULT_BOUNDARY,
        "boundary_epsilon": None,
        "solve": True,
        "sensor_rows": 26,
        "sensor_cols": 26,
        "prior_tau": DEFAULT_TAU,
        "prior_s": DEFAULT_S,
        "prior_kl": KlExponent.HALF.value,
        "out": None,
    },
    "train": {
        "mode": "deeponet",
        "dataset": None,
        "pde_dataset": None,
        "epochs": 1000,
        "w_obs": None,
        "w_pde": None,
        "w_bc": None,
        "lr": 1e-3,
        "decay_r": 0.5,
        "decay_s": 20000.0,
        "p": 32,
        "branch": "mlp",
        "branch_widths": "128,128",
        "trunk_width": 32,
        "trunk_depth": 3,
        "log_every": 100,
        "seed": 0,
        "out": None,
    },
    "eval": {"checkpoint": None, "dataset": None, "repeats": EVAL_REPEATS, "table_ref": None, "seed": 0,
             "out": None},
    "invert": {
        "forward": ForwardKind.LOCAL_KERNEL.value,
        "checkpoint": None,
        "manifold": ManifoldKind.TORUS.value,
        "grid": None,
        "N": None,
        "R": 2.0,
        "r": 1.0,
        "sigma": 0.01,
        "beta": 0.02,
        "iters": 7000,
        "burn_in": 2000,
        "thin": 1,
        "tau": DEFAULT_TAU,
        "s": DEFAULT_S,
        "kl_exponent": KlExponent.HALF.value,
        "neighbors": PRIOR_NEIGHBORS,
        "c": 1.0,
        "source": DEFAULT_SOURCE,
        "seed": 0,
        "truth_seed": 10 ** 6,
        "noise_seed": 10 ** 6 + 1,
        "store_samples": False,
        "table_ref": None,
        "out": None,
    },
    "bench": {
        "sizes": "400,900,1600,2500",
        "steps": 20,
        "checkpoint_dir": None,
        "train_quick": False,
        "quick_epochs": 50,
        "quick_samples": 10,
        "sigma": 0.01,
        "beta": 0.02,
        "tau": DEFAULT_TAU,
        "s": DEFAULT_S,
        "source": DEFAULT_SOURCE,
        "seed": 0,
        "out": None,
    },
    "convergence": {
        "estimators": "dm,rbf,gmls",
        "sizes": "500,1000,2000,4000",
        "seeds": 5,
        "R": 2.0,
        "r": 1.0,
        "out": None,
    },
}


def parse_grid(text: Optional[str]) -> Optional[Tuple[int, int]]:
    """'20x20' → (20, 20)."""
    if text in (None, ""):
        return None
    try:
        rows, cols = (int(v) for v in str(text).lower().split("x"))
    except ValueError:
        raise ConfigurationError(f"grid must look like ROWSxCOLS, got '{text}'")
    if rows < 1 or cols < 1:
        raise ConfigurationError(f"grid must be at least 1x1, got '{text}'")
    return rows, cols


def parse_list(text, cast=int) -> List:
    if isinstance(text, (list, tuple)):
        return [cast(v) for v in text]
    try:
        return [cast(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse list '{text}'")


def _output_dir(value, default_name: str) -> Path:
    return Path(value) if value else Config.RUNS_DIR / default_name


def make_cloud(options: Dict[str, object]) -> PointCloud:
    grid = parse_grid(options.get("grid"))
    kind = ManifoldKind(options["manifold"])
    if grid:
        return sample_grid(kind, grid[0], grid[1], options["R"], options["r"])
    if options.get("N") is None:
        raise ConfigurationError("give either --grid or --N")
    return sample_cloud(kind, int(options["N"]), options["R"], options["r"], int(options["seed"]))


def inversion_cloud_options(options: Dict[str, object]) -> Dict[str, object]:
    """Cloud options for invert: --grid and --N are exclusive, the 20x20 grid when neither is given."""
    if options.get("grid") and options.get("N") is not None:
        raise ConfigurationError("give either --grid or --N, not both")
    resolved = dict(options)
    if not resolved.get("grid") and resolved.get("N") is None:
        resolved["grid"] = DEFAULT_INVERSION_GRID
    return resolved


def cmd_generate_cloud(options: Dict[str, object]) -> RunReport:
    cloud = make_cloud(options)
    out = _output_dir(options["out"], f"cloud-{cloud.kind.value}-{cloud.size}")
    path = save_cloud(cloud, out)
    report = RunReport(command="generate-cloud", config=dict(options), metrics={"N": cloud.size}, directory=out)
    report.add_artifact("cloud", path)
    return report


def cmd_generate(options: Dict[str, object]) -> RunReport:
    if int(options["n_obs"]) < 1:
        raise ParameterError(f"--n-obs must be at least 1, got {options['n_obs']}")
    cloud = load_cloud(Path(options["cloud"])) if options["cloud"] else make_cloud(options)
    problem = ProblemKind(options["problem"])

    sampler = None
    if problem == ProblemKind.PRIOR:
        prior = build_prior(cloud, tau=options["prior_tau"], s_exponent=options["prior_s"],
                            kl_exponent=KlExponent(options["prior_kl"]))
        sampler = kappa_sampler(prior)
        sensors = sensors_from_cloud(cloud)
    else:
        sensors = build_sensor_grid(cloud.kind, options["sensor_rows"], options["sensor_cols"], cloud.R, cloud.r)

    config = DatasetConfig(
        n_samples=int(options["n_obs"]),
        family=options["family"],
        problem=problem,
        split=Split(options["split"]),
        estimator=EstimatorSettings(kind=EstimatorKind(options["estimator"])),
        c=float(options["c"]),
        source=options["source"],
        boundary_source=options["boundary_source"],
        boundary_epsilon=options["boundary_epsilon"],
        seed=int(options["seed"]),
        solve=bool(options["solve"]),
    )
    tic = time.perf_counter()
    dataset = generate_dataset(config, cloud, sensors, sampler)
    elapsed = time.perf_counter() - tic

    out = _output_dir(options["out"], f"data-{problem.value}-{options['family']}-{options['split']}-{options['seed']}")
    existed = out.exists()
    try:
        save_dataset(dataset, out)
    except Exception:
        if not existed:
            shutil.rmtree(out, ignore_errors=True)
        raise
    report = RunReport(command="generate", config=dict(options),
                       metrics={"samples": dataset.size, "families": dataset.family_counts()},
                       timings={"generate_seconds": elapsed}, directory=out)
    report.add_artifact("dataset", out)
    report.add_artifact("kappa_sensors", out / "kappa_sensors.csv")
    return report


def _physics_batch(dataset: OperatorDataset):
    """Rebuild operators, f and the boundary split recorded in a dataset manifest."""
    manifest = dataset.manifest
    config = manifest.get("config", {})
    settings = manifest.get("estimator_params") or config.get("estimator") or {}
    factory = OperatorFactory(dataset.cloud, EstimatorSettings.from_dict(settings))
    problem = ProblemKind(config.get("problem", ProblemKind.LINEAR.value))
    f_values = source_values(config.get("source", DEFAULT_SOURCE), dataset.cloud.points, dataset.cloud.R,
                             dataset.cloud.r)
    boundary, g_values = None, None
    if problem == ProblemKind.DIRICHLET:
        boundary = split_near_boundary(dataset.cloud, float(manifest["boundary_epsilon"]))
        g_values = source_values(config.get("boundary_source", DEFAULT_BOUNDARY), dataset.cloud.points,
                                 dataset.cloud.R, dataset.cloud.r)
    batch = build_pde_batch(dataset, factory, float(config.get("c", 1.0)), f_values, boundary, g_values,
                            semilinear=problem == ProblemKind.SEMILINEAR)
    return batch, factory.kind, problem


def _load_dataset_option(value, name: str) -> OperatorDataset:
    if not value:
        raise ConfigurationError(f"--{name} is required")
    return load_dataset(Path(value))


def _training_config(options, estimator: Optional[EstimatorKind], inversion: bool) -> TrainingConfig:
    if options["mode"] == "pi-deeponet":
        w_obs, w_pde, w_bc = physics_weights(estimator.value, inversion)
    else:
        w_obs, w_pde, w_bc = 1.0, 0.0, 0.0

    def pick(value, default):
        return float(default if value is None else value)

    return TrainingConfig(
        w_obs=pick(options["w_obs"], w_obs),
        w_pde=pick(options["w_pde"], w_pde),
        w_bc=pick(options["w_bc"], w_bc),
        lr0=float(options["lr"]),
        decay_r=float(options["decay_r"]),
        decay_S=float(options["decay_s"]),
        epochs=int(options["epochs"]),
        seed=int(options["seed"]),
        log_every=int(options["log_every"]),
    )


def cmd_train(options: Dict[str, object]) -> RunReport:
    mode = options["mode"]
    if mode not in ("deeponet", "pi-deeponet"):
        raise ConfigurationError(f"unknown training mode '{mode}'")
    obs_data = _load_dataset_option(options["dataset"], "dataset") if (
        mode == "deeponet" or options["dataset"]) else None
    pde_data = _load_dataset_option(options["pde_dataset"], "pde-dataset") if mode == "pi-deeponet" else None

    obs = ObsBatch.from_dataset(obs_data) if obs_data is not None else None
    pde, estimator, problem = (None, None, None)
    if pde_data is not None:
        pde, estimator, problem = _physics_batch(pde_data)
    reference = obs_data if obs_data is not None else pde_data
    if obs_data is not None and pde_data is not None and obs_data.kappa_sensors.shape[1] != pde_data.kappa_sensors.shape[1]:
        raise ShapeError("observation and physics datasets use different sensor counts")

    sensor_shape = reference.manifest.get("sensor_shape")
    model_config = ModelConfig(
        m=reference.kappa_sensors.shape[1],
        p=int(options["p"]),
        branch_kind=options["branch"],
        branch_widths=parse_list(options["branch_widths"]),
        sensor_shape=tuple(sensor_shape) if sensor_shape else None,
        trunk_width=int(options["trunk_width"]),
        trunk_depth=int(options["trunk_depth"]),
        seed=int(options["seed"]),
    )
    model = DeepONet(model_config)
    config = _training_config(options, estimator, problem == ProblemKind.PRIOR)
    out = _output_dir(options["out"], f"train-{mode}-{options['seed']}")
    extra = {"training": config.to_dict(), "dataset": options["dataset"], "pde_dataset": options["pde_dataset"]}

    tic = time.perf_counter()
    try:
        model, history = train(model, config, obs, pde)
    except TrainingDivergedError as e:
        if e.last_good_state is not None:
            model.load_state_dict(e.last_good_state)
        save_checkpoint(model, out, "model", {**extra, "diverged_at": e.epoch})
        raise
    elapsed = time.perf_counter() - tic

    header = save_checkpoint(model, out, "model", extra)
    history_path = history.to_csv(out / "history.csv")
    metrics = {"final": history.rows[-1], "parameters": model.parameter_count()}
    if obs is not None:
        metrics["train_error"] = mean_l2_relative_error(model, obs)
    report = RunReport(command="train", config=dict(options), metrics=metrics, timings={"train_seconds": elapsed},
                       directory=out)
    report.add_artifact("checkpoint", header)
    report.add_artifact("history", history_path)
    return report


def evaluate_checkpoint(model: DeepONet, dataset: OperatorDataset, repeats: int = EVAL_REPEATS,
                        seed: int = 0) -> List[float]:
    """Test error under `repeats` distinct sample orderings."""
    if model.config.m != dataset.kappa_sensors.shape[1]:
        raise ShapeError(f"checkpoint expects {model.config.m} sensors, dataset has {dataset.kappa_sensors.shape[1]}")
    batch = ObsBatch.from_dataset(dataset)
    rng = np.random.default_rng(seed)
    return [mean_l2_relative_error(model, batch, rng.permutation(dataset.size)) for _ in range(repeats)]


def cmd_eval(options: Dict[str, object]) -> RunReport:
    if not options["checkpoint"]:
        raise ConfigurationError("--checkpoint is required")
    model, _ = load_checkpoint(Path(options["checkpoint"]))
    dataset = _load_dataset_option(options["dataset"], "dataset")
    errors = evaluate_checkpoint(model, dataset, int(options["repeats"]), int(options["seed"]))
    metrics = {"mean_l2_relative_error": float(np.mean(errors)), "repetitions": errors}
    if options["table_ref"]:
        target = lookup(options["table_ref"])
        metrics.update({"table_ref": options["table_ref"], "target": target,
                        "ratio_to_target": metrics["mean_l2_relative_error"] / target})
    logger.info(f"Test error {100 * metrics['mean_l2_relative_error']:.2f}% over {dataset.size} samples")
    return RunReport(command="eval", config=dict(options), metrics=metrics,
                     directory=Path(options["out"] or options["checkpoint"]))


def _surrogate(options: Dict[str, object], cloud: PointCloud) -> SurrogateForward:
    if not options.get("checkpoint"):
        raise ConfigurationError("the surrogate forward map needs --checkpoint")
    model, _ = load_checkpoint(Path(options["checkpoint"]))
    return SurrogateForward(model, cloud)


def cmd_invert(options: Dict[str, object]) -> RunReport:
    forward_kind = ForwardKind(options["forward"])
    if forward_kind == ForwardKind.SURROGATE and not options.get("checkpoint"):
        raise ConfigurationError("the surrogate forward map needs --checkpoint")
    options = inversion_cloud_options(options)
    cloud = make_cloud(options)
    f_values = source_values(options["source"], cloud.points, cloud.R, cloud.r)
    local = LocalKernelForward(cloud, f_values, c=float(options["c"]))
    forward = _surrogate(options, cloud) if forward_kind == ForwardKind.SURROGATE else local

    prior = build_prior(cloud, int(options["neighbors"]), float(options["tau"]), float(options["s"]),
                        KlExponent(options["kl_exponent"]))
    truth = synthetic_truth(prior, int(options["truth_seed"]))
    observation = synthesize_observation(truth, local, float(options["sigma"]), int(options["noise_seed"]))
    config = InversionConfig(
        tau=float(options["tau"]), s_exponent=float(options["s"]), neighbors=int(options["neighbors"]),
        kl_exponent=options["kl_exponent"], sigma=float(options["sigma"]), beta=float(options["beta"]),
        iterations=int(options["iters"]), burn_in=int(options["burn_in"]), thin=int(options["thin"]),
        seed=int(options["seed"]), truth_seed=int(options["truth_seed"]), noise_seed=int(options["noise_seed"]),
        forward=forward_kind.value, c=float(options["c"]), source=options["source"],
    )
    summary = run_inversion(prior, observation, forward, local, config)

    size = options["grid"] or f"N{int(options['N'])}"
    out = _output_dir(options["out"], f"invert-{forward_kind.value}-{size}-{options['seed']}")
    paths = save_posterior(summary, out, bool(options["store_samples"]))
    metrics = {"kappa_error": summary.kappa_error, "u_error": summary.u_error,
               "acceptance_rate": summary.acceptance_rate}
    if options["table_ref"]:
        metrics.update({"table_ref": options["table_ref"], "target": lookup(options["table_ref"])})
    report = RunReport(command="invert", config=dict(options), metrics=metrics,
                       timings={"per_step_seconds": summary.chain.mean_step_seconds}, directory=out)
    for name, path in paths.items():
        report.add_artifact(name, path)
    return report


def quick_surrogate(cloud: PointCloud, prior, f_values: np.ndarray, samples: int, epochs: int,
                    seed: int) -> DeepONet:
    """Small physics-informed surrogate on prior draws, for timing runs."""
    sensors = sensors_from_cloud(cloud)
    dataset = generate_dataset(
        DatasetConfig(n_samples=samples, problem=ProblemKind.PRIOR, family=ProblemKind.PRIOR.value, seed=seed),
        cloud, sensors, kappa_sampler(prior),
    )
    factory = OperatorFactory(cloud, EstimatorSettings(kind=EstimatorKind.DM))
    pde = build_pde_batch(dataset, factory, 1.0, f_values)
    w_obs, w_pde, _ = physics_weights(EstimatorKind.DM.value, inversion=True)
    model = DeepONet(ModelConfig(m=cloud.size, seed=seed))
    train(model, TrainingConfig(w_obs=w_obs, w_pde=w_pde, epochs=epochs, seed=seed), ObsBatch.from_dataset(dataset), pde)
    return model


def loglog_slope(sizes: List[int], values: List[float]) -> float:
    return float(np.polyfit(np.log(sizes), np.log(values), 1)[0])


def cmd_bench(options: Dict[str, object]) -> RunReport:
    sizes = parse_list(options["sizes"])
    if len(sizes) < 3:
        raise ConfigurationError("bench needs at least three cloud sizes to fit a slope")
    steps = int(options["steps"])
    rows = []
    for n in sizes:
        side = int(round(np.sqrt(n)))
        if side * side == n:
            cloud = sample_grid(ManifoldKind.TORUS, side, side)
        else:
            cloud = sample_cloud(ManifoldKind.TORUS, n, seed=int(options["seed"]))
        f_values = source_values(options["source"], cloud.points, cloud.R, cloud.r)
        prior = build_prior(cloud, tau=float(options["tau"]), s_exponent=float(options["s"]))
        local = LocalKernelForward(cloud, f_values)
        if options["checkpoint_dir"]:
            model, _ = load_checkpoint(Path(options["checkpoint_dir"]) / f"N{n}")
        elif options["train_quick"]:
            model = quick_surrogate(cloud, prior, f_values, int(options["quick_samples"]),
                                    int(options["quick_epochs"]), int(options["seed"]))
        else:
            raise ConfigurationError("bench needs --checkpoint-dir or --train-quick")
        surrogate = SurrogateForward(model, cloud)
        observation = synthesize_observation(synthetic_truth(prior, int(options["seed"]) + 1), local,
                                             float(options["sigma"]), int(options["seed"]) + 2)
        for kind, forward in ((ForwardKind.LOCAL_KERNEL, local), (ForwardKind.SURROGATE, surrogate)):
            chain = run_pcn(prior, observation, forward, float(options["beta"]), steps, 0, 1,
                            int(options["seed"]), kind)
            rows.append({"N": n, "method": kind.value, "seconds_per_step": chain.mean_step_seconds})
            logger.info(f"N={n} {kind.value}: {chain.mean_step_seconds:.4g} s/step")

    out = _output_dir(options["out"], "bench")
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "timings.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=["N", "method", "seconds_per_step"])
        writer.writeheader()
        writer.writerows(rows)
    slopes = {
        kind.value: loglog_slope(sizes, [r["seconds_per_step"] for r in rows if r["method"] == kind.value])
        for kind in ForwardKind
    }
    report = RunReport(command="bench", config=dict(options), metrics={"slopes": slopes}, directory=out)
    report.add_artifact("timings", csv_path)
    return report


def consistency_error(cloud: PointCloud, kind: EstimatorKind) -> float:
    """Relative L² error of L(cos θ) with κ ≡ 1 against the exact Laplace–Beltrami image."""
    oracle = laplace_beltrami_cos_theta(cloud.R, cloud.r)
    _, u, exact = oracle.at(cloud.intrinsic)
    operator = OperatorFactory(cloud, EstimatorSettings(kind=kind)).build(np.ones(cloud.size))
    return relative_l2_error(operator.apply(u), exact)


def cmd_convergence(options: Dict[str, object]) -> RunReport:
    estimators = [EstimatorKind(e) for e in parse_list(options["estimators"], str)]
    sizes = parse_list(options["sizes"])
    rows = []
    for kind in estimators:
        for n in sizes:
            if kind == EstimatorKind.RBF and n > Config.RBF_DENSE_CAP:
                logger.warning(f"Skipping RBF at N={n} (dense cap {Config.RBF_DENSE_CAP})")
                continue
            for seed in range(int(options["seeds"])):
                cloud = sample_cloud(ManifoldKind.TORUS, n, options["R"], options["r"], seed)
                error = consistency_error(cloud, kind)
                rows.append({"N": n, "estimator": kind.value, "seed": seed, "error": error})
                logger.info(f"{kind.value} N={n} seed={seed}: error {error:.4e}")

    out = _output_dir(options["out"], "convergence")
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "convergence.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=["N", "estimator", "seed", "error"])
        writer.writeheader()
        writer.writerows(rows)

    slopes = {}
    for kind in estimators:
        used = sorted({r["N"] for r in rows if r["estimator"] == kind.value})
        if len(used) >= 2:
            medians = [float(np.median([r["error"] for r in rows if r["estimator"] == kind.value and r["N"] == n]))
                       for n in used]
            slopes[kind.value] = loglog_slope(used, medians)
    report = RunReport(command="convergence", config=dict(options), metrics={"slopes": slopes}, directory=out)
    report.add_artifact("errors", csv_path)
    return report


COMMANDS = {
    "generate-cloud": cmd_generate_cloud,
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "invert": cmd_invert,
    "bench": cmd_bench,
    "convergence": cmd_convergence,
}
