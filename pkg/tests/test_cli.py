import json

import numpy as np
import pytest

from src.cli.commands import (DEFAULTS, evaluate_checkpoint, inversion_cloud_options, make_cloud, parse_grid,
                              parse_list)
from src.cli.experiment_config import RunReport, flatten, load_config, resolve
from src.cli.main import EXIT_OK, EXIT_USAGE, main
from src.cli.targets import lookup
from src.errors import ConfigurationError, ShapeError
from src.fields.datasets import load_dataset


def _report(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def _generate(directory, seed=0):
    return main([
        "generate", "--N", "150", "--seed", str(seed), "--sensor-rows", "5", "--sensor-cols", "5",
        "--n-obs", "3", "--out", str(directory),
    ])


class TestParsing:
    def test_parse_grid(self):
        assert parse_grid("20x20") == (20, 20)
        assert parse_grid("4X6") == (4, 6)
        assert parse_grid(None) is None

    @pytest.mark.parametrize("text", ["20", "ax3", "0x5", "2x3x4"])
    def test_bad_grid(self, text):
        with pytest.raises(ConfigurationError):
            parse_grid(text)

    def test_parse_list(self):
        assert parse_list("400,900, 1600") == [400, 900, 1600]
        assert parse_list("dm,gmls", str) == ["dm", "gmls"]
        assert parse_list([1, 2]) == [1, 2]
        with pytest.raises(ConfigurationError):
            parse_list("1,two")

    def test_make_cloud_needs_a_size(self):
        options = dict(DEFAULTS["invert"], grid=None, N=None)
        with pytest.raises(ConfigurationError):
            make_cloud(options)

    def test_invert_honours_n(self):
        options = resolve("invert", DEFAULTS["invert"], {}, {"N": 900, "grid": None})
        assert make_cloud(inversion_cloud_options(options)).size == 900

    def test_invert_defaults_to_the_20x20_grid(self):
        options = resolve("invert", DEFAULTS["invert"], {}, {})
        cloud = make_cloud(inversion_cloud_options(options))
        assert cloud.size == 400
        assert DEFAULTS["invert"]["grid"] is None

    def test_invert_rejects_grid_and_n_together(self):
        options = resolve("invert", DEFAULTS["invert"], {}, {"N": 900, "grid": "10x10"})
        with pytest.raises(ConfigurationError):
            inversion_cloud_options(options)

    def test_lookup(self):
        assert lookup("table1:linear:1000") == 0.0207
        assert lookup(" TABLE4:surrogate:50x50:0.01 ") == 0.0724
        with pytest.raises(ConfigurationError):
            lookup("table9:nothing")


class TestResolve:
    def test_precedence(self):
        options = resolve("train", DEFAULTS["train"], {"train.epochs": 50, "lr": 0.01},
                          {"epochs": 7, "p": None})
        assert options["epochs"] == 7
        assert options["lr"] == 0.01
        assert options["p"] == DEFAULTS["train"]["p"]

    def test_other_commands_are_skipped(self):
        options = resolve("eval", DEFAULTS["eval"], {"train.epochs": 50, "eval.repeats": 5}, {})
        assert options["repeats"] == 5
        assert "epochs" not in options

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError):
            resolve("eval", DEFAULTS["eval"], {"eval.epochz": 5}, {})

    def test_nested_files_are_flattened(self, tmp_path):
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps({"train": {"epochs": 3, "lr": 0.5}}), encoding="utf-8")
        assert load_config(path) == {"train.epochs": 3, "train.lr": 0.5}
        assert flatten({"a": {"b": {"c": 1}}, "d": 2}) == {"a.b.c": 1, "d": 2}
        assert load_config(None) == {}

    def test_bad_config_files(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "missing.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_config(broken)
        listed = tmp_path / "list.json"
        listed.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_config(listed)


class TestRunReport:
    def test_missing_artifact(self, tmp_path):
        report = RunReport(command="eval", config={}, directory=tmp_path)
        report.add_artifact("checkpoint", tmp_path / "nowhere.json")
        with pytest.raises(ConfigurationError):
            report.write()

    def test_needs_a_directory(self):
        with pytest.raises(ConfigurationError):
            RunReport(command="eval", config={}).write()

    def test_written_fields(self, tmp_path):
        (tmp_path / "a.csv").write_text("x\n", encoding="utf-8")
        report = RunReport(command="bench", config={"steps": 2}, metrics={"slopes": {}}, directory=tmp_path)
        report.add_artifact("timings", tmp_path / "a.csv")
        saved = _report(report.write())
        assert saved["command"] == "bench"
        assert saved["config"] == {"steps": 2}
        assert saved["artifacts"]["timings"].endswith("a.csv")
        assert saved["build"]
        assert "python" in saved


class TestExitCodes:
    def test_zero_samples(self, tmp_path):
        assert main(["generate", "--N", "50", "--n-obs", "0", "--out", str(tmp_path / "d")]) == EXIT_USAGE
        assert not (tmp_path / "d").exists()

    def test_surrogate_without_checkpoint(self, tmp_path):
        assert main(["invert", "--forward", "surrogate", "--out", str(tmp_path / "inv")]) == EXIT_USAGE

    def test_bench_needs_three_sizes(self, tmp_path):
        assert main(["bench", "--sizes", "100,400", "--train-quick", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps({"generate.n_sample": 3}), encoding="utf-8")
        assert main(["generate", "--N", "50", "--config", str(path), "--out", str(tmp_path / "d")]) == EXIT_USAGE

    def test_eval_without_checkpoint(self, tmp_path):
        assert main(["eval", "--dataset", str(tmp_path)]) == EXIT_USAGE


class TestPipeline:
    def test_generate_train_eval(self, tmp_path):
        data, model, scored = tmp_path / "data", tmp_path / "model", tmp_path / "eval"
        assert _generate(data) == EXIT_OK
        dataset = load_dataset(data)
        assert dataset.kappa_sensors.shape == (3, 25)
        assert dataset.solutions.shape == (3, 150)
        generated = _report(data / "report.json")
        assert generated["metrics"]["samples"] == 3

        assert main([
            "train", "--dataset", str(data), "--epochs", "5", "--log-every", "5", "--p", "4",
            "--branch-widths", "8", "--trunk-width", "8", "--trunk-depth", "2", "--out", str(model),
        ]) == EXIT_OK
        assert (model / "model.json").exists() and (model / "model.bin").exists()
        trained = _report(model / "report.json")
        assert trained["metrics"]["parameters"] > 0
        assert np.isfinite(trained["metrics"]["train_error"])

        assert main([
            "eval", "--checkpoint", str(model), "--dataset", str(data), "--repeats", "2",
            "--table-ref", "table1:linear:1000", "--out", str(scored),
        ]) == EXIT_OK
        metrics = _report(scored / "report.json")["metrics"]
        assert metrics["target"] == 0.0207
        assert len(metrics["repetitions"]) == 2
        # the mean error does not depend on the sample ordering
        assert metrics["repetitions"][0] == pytest.approx(metrics["repetitions"][1], rel=1e-9)
        assert metrics["ratio_to_target"] == pytest.approx(metrics["mean_l2_relative_error"] / 0.0207)

    def test_regenerating_is_byte_identical(self, tmp_path):
        assert _generate(tmp_path / "a", seed=4) == EXIT_OK
        assert _generate(tmp_path / "b", seed=4) == EXIT_OK
        for name in ("kappa_sensors.csv", "kappa_points.csv", "solutions.csv", "cloud.csv", "manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_eval_sensor_mismatch(self, tmp_path, tiny_model):
        assert _generate(tmp_path / "data") == EXIT_OK
        with pytest.raises(ShapeError):
            evaluate_checkpoint(tiny_model, load_dataset(tmp_path / "data"))

    def test_generate_cloud(self, tmp_path):
        assert main(["generate-cloud", "--manifold", "semi-torus", "--grid", "6x8", "--out", str(tmp_path)]) == EXIT_OK
        saved = _report(tmp_path / "report.json")
        assert saved["metrics"]["N"] == 48
        assert (tmp_path / "cloud.csv").exists()

    def test_short_inversion(self, tmp_path):
        assert main([
            "invert", "--grid", "20x20", "--iters", "10", "--burn-in", "2", "--beta", "0.1",
            "--table-ref", "table4:local-kernel:20x20:0.01", "--out", str(tmp_path),
        ]) == EXIT_OK
        metrics = _report(tmp_path / "report.json")["metrics"]
        assert metrics["target"] == 0.0710
        assert 0.0 <= metrics["acceptance_rate"] <= 1.0
        assert np.isfinite(metrics["kappa_error"])

    def test_convergence_sweep(self, tmp_path):
        assert main([
            "convergence", "--estimators", "dm", "--sizes", "200,400", "--seeds", "1", "--out", str(tmp_path),
        ]) == EXIT_OK
        saved = _report(tmp_path / "report.json")
        assert "dm" in saved["metrics"]["slopes"]
        rows = np.loadtxt(tmp_path / "convergence.csv", delimiter=",", skiprows=1, usecols=(0, 3))
        assert rows.shape == (2, 2)
        assert np.all(rows[:, 1] > 0)
