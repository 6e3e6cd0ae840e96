# pylint: disable=missing-docstring, protected-access

import copy
import csv
import io
import json
import os
import tempfile
import unittest
from contextlib import redirect_stdout
from typing import Any, Dict, List
from unittest.mock import patch

import numpy as np
import yaml
from numpy.testing import assert_allclose

from ssn_bench.cli import build_parser
from ssn_bench.configuration import ConfigurationError, DatasetSource, ExperimentConfig, ProblemSource
from ssn_bench.diagnostics import condition_numbers_from_factor
from ssn_bench.launcher import (
    LAMBDA_SWEEP_HEADER,
    NEWTON_FALLBACK,
    SWEEP_HEADER,
    ExperimentLauncher,
    SweepRow,
    best_budgets,
    build_problem,
    first_third,
    load_reference,
)
from ssn_bench.main import EXIT_CONFIG_ERROR, EXIT_RUNTIME_FAILURE, EXIT_SUCCESS, main
from ssn_bench.optimizers import solve_reference
from ssn_bench.run_state import RunState
from ssn_bench.run_status import RunStatus
from ssn_bench.sampling import DegenerateInputError
from ssn_bench.trace import CSV_HEADER, RunTrace, TraceRecord

_OPTIMIZERS_START_STATE = copy.deepcopy(ExperimentConfig.optimizers())
_DIR_PATH = os.path.dirname(os.path.realpath(__file__))


def experiment_data(directory: str, **overrides: Any) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "problem": {"loss": "logistic", "synthetic": {"n": 200, "d": 4, "noise_seed": 5}},
        "lambda": 0.01,
        "methods": {
            "ssn": {"method": "ssn", "budget": "10d", "solver": "cg", "max_outer_iters": 5, "stop_grad_norm": 0.0},
            "newton": {"method": "newton", "max_iters": 5, "stop_grad_norm": 0.0},
        },
        "seeds": [0, 1],
        "outputs": {"directory": directory},
        "threads": 2,
    }
    data.update(overrides)
    return data


def regression_data(directory: str, **overrides: Any) -> Dict[str, Any]:
    return experiment_data(
        directory,
        problem={"loss": "squared", "synthetic": {"n": 200, "d": 4, "label_model": "linear", "noise_seed": 6}},
        **overrides,
    )


def read_rows(path: str) -> List[List[str]]:
    with open(path, "r", newline="") as csv_file:
        return list(csv.reader(csv_file))


def without_time(rows: List[List[str]]) -> List[List[str]]:
    column = CSV_HEADER.index("time_s")
    return [row[:column] + row[column + 1 :] for row in rows]


def run_main(argv: List[str]) -> tuple:
    output = io.StringIO()
    with redirect_stdout(output):
        code = main(build_parser().parse_args(argv))
    return code, output.getvalue()


class TestRunState(unittest.TestCase):
    def test_lifecycle(self) -> None:
        state = RunState()
        state.add_pending("ssn", 0)
        state.add_pending("ssn", 1)

        self.assertEqual(state.get_status("ssn", 0), RunStatus.Unknown)
        state.complete("ssn", 0, RunStatus.Success, "success")
        self.assertEqual(state.pending(), [("ssn", 1)])
        self.assertFalse(state.all_succeeded())

        state.complete("ssn", 1, RunStatus.Diverged, "diverged")
        self.assertEqual(state.get_status("ssn", 1), RunStatus.Diverged)
        self.assertFalse(state.all_succeeded())
        self.assertEqual(str(RunStatus.Diverged), "diverged")
        self.assertFalse(RunStatus.Fail)
        self.assertTrue(RunStatus.Success)


class TestHelpers(unittest.TestCase):
    def test_first_third(self) -> None:
        trace = RunTrace(
            records=[
                TraceRecord(0, 0.0, 9.0, 1.0, None),
                TraceRecord(1, 0.5, 4.0, 1.0, None),
                TraceRecord(2, 0.9, 3.0, 1.0, None),
            ]
        )

        self.assertEqual(first_third(trace), (0.9, 2))
        self.assertEqual(first_third(RunTrace(records=trace.records[:2])), (None, None))
        self.assertEqual(first_third(RunTrace()), (None, None))

    def test_best_budgets(self) -> None:
        rows = [
            SweepRow("ssn", 0, "10d", 0.5, 3),
            SweepRow("ssn", 0, "20d", 0.2, 2),
            SweepRow("ssn", 0, "30d", None, None),
            SweepRow("ssn", 1, "10d", None, None),
        ]

        best = best_budgets(rows)

        self.assertEqual(list(best), [("ssn", 0)])
        self.assertEqual(best[("ssn", 0)].budget, "20d")
        self.assertEqual(rows[2].to_row(), ["ssn", "0", "30d", "", ""])

    def test_load_reference(self) -> None:
        with tempfile.TemporaryDirectory() as directory:
            json_path = os.path.join(directory, "w.json")
            with open(json_path, "w") as reference_file:
                json.dump([1.0, 2.0], reference_file)
            text_path = os.path.join(directory, "w.txt")
            np.savetxt(text_path, np.array([3.0, 4.0]))

            assert_allclose(load_reference(json_path, 2), [1.0, 2.0])
            assert_allclose(load_reference(text_path, 2), [3.0, 4.0])
            with self.assertRaises(ConfigurationError):
                load_reference(json_path, 3)

    def test_build_problem_from_dataset(self) -> None:
        dataset = DatasetSource(
            path=os.path.join(_DIR_PATH, "test_data", "small.csv"), data_format="csv", normalize_columns=False
        )

        problem, loaded = build_problem(ProblemSource("logistic", dataset=dataset), 0.1)

        self.assertEqual((problem.n, problem.d), (3, 3))
        assert_allclose(problem.x[:, 2], np.ones(3))
        self.assertEqual(loaded.label_mapping, {"0": -1, "1": 1})

    def test_build_problem_rejects_negative_lambda(self) -> None:
        dataset = DatasetSource(path=os.path.join(_DIR_PATH, "test_data", "regression.csv"), data_format="csv",
                                label_position="first")

        with self.assertRaises(ConfigurationError):
            build_problem(ProblemSource("squared", dataset=dataset), -1.0)


class TestExperimentLauncher(unittest.TestCase):
    def setUp(self) -> None:
        self._directory = tempfile.TemporaryDirectory()
        self.directory = self._directory.name

    def tearDown(self) -> None:
        self._directory.cleanup()

    def run_experiment(self, data: Dict[str, Any]) -> ExperimentLauncher:
        with ExperimentLauncher(ExperimentConfig(data)) as launcher:
            launcher.run_all()
        return launcher

    def test_cells_write_traces(self) -> None:
        launcher = self.run_experiment(experiment_data(self.directory))

        self.assertTrue(launcher.run_state.all_succeeded())
        for name in ("ssn", "newton"):
            for seed in (0, 1):
                rows = read_rows(os.path.join(self.directory, f"{name}_{seed}.csv"))
                self.assertEqual(rows[0], CSV_HEADER)
                self.assertEqual(len(rows), 1 + 6)
                self.assertEqual([row[0] for row in rows[1:]], [str(i) for i in range(6)])

    def test_cell_metadata(self) -> None:
        self.run_experiment(experiment_data(self.directory, diagnostics=True))

        with open(os.path.join(self.directory, "ssn_1.json"), "r") as metadata_file:
            metadata = json.load(metadata_file)

        self.assertEqual(metadata["status"], "success")
        self.assertEqual(metadata["seed"], 1)
        self.assertEqual(metadata["iterations"], 5)
        self.assertEqual(metadata["method_options"]["budget"], "10d")
        self.assertEqual(metadata["resolved_options"]["solver"], "cg")
        self.assertEqual(set(metadata["condition_numbers"]), {"w_star", "w0"})
        self.assertEqual(metadata["condition_numbers"]["w0"]["kappa_bar"], "inf")
        self.assertEqual(metadata["run"]["scheme"], "block_partial_leverage")
        self.assertEqual(len(metadata["diagnostics"]), 5)
        costs = [record["iteration_cost"] for record in metadata["diagnostics"]]
        self.assertAlmostEqual(metadata["estimated_cost"], sum(costs), delta=1e-9 * sum(costs))
        self.assertEqual(metadata["config"]["seeds"], [0, 1])

    def test_manifest(self) -> None:
        self.run_experiment(experiment_data(self.directory))

        with open(os.path.join(self.directory, "manifest.json"), "r") as manifest_file:
            manifest = json.load(manifest_file)

        self.assertEqual(len(manifest["cells"]), 4)
        self.assertEqual(manifest["summary"]["ssn"]["successful_seeds"], 2)
        self.assertEqual(manifest["summary"]["newton"]["mean_iterations"], 5)
        self.assertLess(manifest["summary"]["newton"]["mean_final_rel_err"], 1e-6)

    def test_cells_are_deterministic(self) -> None:
        first = os.path.join(self.directory, "first")
        second = os.path.join(self.directory, "second")
        self.run_experiment(experiment_data(first, threads=1))
        self.run_experiment(experiment_data(second, threads=3))

        for seed in (0, 1):
            ours = read_rows(os.path.join(first, f"ssn_{seed}.csv"))
            theirs = read_rows(os.path.join(second, f"ssn_{seed}.csv"))
            self.assertEqual(without_time(ours), without_time(theirs))

    def test_outputs_follow_formats(self) -> None:
        data = experiment_data(self.directory, seeds=[0])
        data["outputs"]["formats"] = ["json"]
        self.run_experiment(data)

        self.assertTrue(os.path.exists(os.path.join(self.directory, "ssn_0.json")))
        self.assertFalse(os.path.exists(os.path.join(self.directory, "ssn_0.csv")))

    def test_diverging_cell(self) -> None:
        data = regression_data(self.directory, seeds=[0])
        data["methods"]["gd"] = {"method": "gd", "step_size": 10.0, "max_iters": 50}

        launcher = self.run_experiment(data)

        self.assertEqual(launcher.run_state.get_status("gd", 0), RunStatus.Diverged)
        self.assertEqual(launcher.run_state.get_status("ssn", 0), RunStatus.Success)
        self.assertFalse(launcher.run_state.all_succeeded())
        self.assertGreater(len(read_rows(os.path.join(self.directory, "gd_0.csv"))), 2)

    def test_loaded_reference(self) -> None:
        path = os.path.join(self.directory, "w_star.json")
        with open(path, "w") as reference_file:
            json.dump([0.0, 0.0, 0.0, 0.0], reference_file)
        data = experiment_data(self.directory, seeds=[0], reference_solution={"load": path})

        launcher = self.run_experiment(data)

        assert_allclose(launcher.w_star, np.zeros(4))

    def test_without_reference(self) -> None:
        launcher = self.run_experiment(experiment_data(self.directory, seeds=[0], reference_solution="none"))

        rows = read_rows(os.path.join(self.directory, "ssn_0.csv"))
        self.assertEqual(rows[1][CSV_HEADER.index("rel_err")], "")
        self.assertEqual(set(launcher.condition_numbers), {"w0"})

    def test_sweep(self) -> None:
        data = regression_data(self.directory, seeds=[0], sweep={"grid": [20, "10d"]})
        with ExperimentLauncher(ExperimentConfig(data)) as launcher:
            rows = launcher.sweep()

        self.assertEqual([(row.method, row.budget) for row in rows], [("ssn", "20"), ("ssn", "10d")])
        for row in rows:
            self.assertIsNotNone(row.time_to_third_s)
            self.assertGreaterEqual(row.iters_to_third, 1)

        lines = read_rows(os.path.join(self.directory, "sweep.csv"))
        self.assertEqual(lines[0], SWEEP_HEADER)
        self.assertEqual(len(lines), 3)

    def test_sweep_quotes_method_names(self) -> None:
        data = regression_data(self.directory, seeds=[0], sweep={"grid": ["10d"]})
        data["methods"] = {"ssn, uniform": {"method": "ssn", "scheme": "uniform", "max_outer_iters": 5}}
        with ExperimentLauncher(ExperimentConfig(data)) as launcher:
            launcher.sweep()

        lines = read_rows(os.path.join(self.directory, "sweep.csv"))
        self.assertEqual(len(lines[1]), len(SWEEP_HEADER))
        self.assertEqual(lines[1][:3], ["ssn, uniform", "0", "10d"])

    def test_unexpected_cell_error_is_a_failure(self) -> None:
        data = experiment_data(self.directory, seeds=[0])
        with patch("ssn_bench.optimizers.ssn.build_plan", side_effect=DegenerateInputError("all blocks are zero")):
            launcher = self.run_experiment(data)

        self.assertEqual(launcher.run_state.get_status("ssn", 0), RunStatus.Fail)
        self.assertEqual(launcher.run_state.get_status("newton", 0), RunStatus.Success)
        with open(os.path.join(self.directory, "manifest.json"), "r") as manifest_file:
            manifest = json.load(manifest_file)
        cells = {cell["method"]: cell for cell in manifest["cells"]}
        self.assertEqual(cells["ssn"]["status"], "fail")
        self.assertIn("DegenerateInputError", cells["ssn"]["description"])
        self.assertEqual(cells["newton"]["status"], "success")

    def test_lambda_sweep(self) -> None:
        data = experiment_data(self.directory, seeds=[0], lambdas=[1.0, 0.01], sweep={"grid": ["10d", "50d"]})
        data["methods"]["ssn"]["max_outer_iters"] = 40
        with ExperimentLauncher(ExperimentConfig(data)) as launcher:
            rows = launcher.lambda_sweep()

        self.assertEqual([(row.lam, row.method) for row in rows], [(1.0, "ssn"), (0.01, "ssn")])
        for row in rows:
            self.assertIn(row.best_budget, ["10d", "50d", NEWTON_FALLBACK])
            self.assertIsNotNone(row.time_to_target_s)
            self.assertIsNotNone(row.newton_time_s)

            problem = launcher.problem.with_lambda(row.lam)
            w_star, _ = solve_reference(problem)
            factorization = problem.hessian_factorization(w_star)
            expected = condition_numbers_from_factor(factorization.a, factorization.q)
            self.assertAlmostEqual(row.numbers.kappa_hat, expected.kappa_hat)
            self.assertAlmostEqual(row.numbers.kappa_bar, expected.kappa_bar)

        lines = read_rows(os.path.join(self.directory, "lambda_sweep.csv"))
        self.assertEqual(lines[0], LAMBDA_SWEEP_HEADER)
        self.assertEqual([line[:2] for line in lines[1:]], [["1.0", "ssn"], ["0.01", "ssn"]])

    def test_lambda_sweep_falls_back_to_newton(self) -> None:
        data = experiment_data(self.directory, seeds=[0], lambdas=[0.1], sweep={"grid": ["10d"]})
        data["methods"]["ssn"]["max_outer_iters"] = 1
        with ExperimentLauncher(ExperimentConfig(data)) as launcher:
            rows = launcher.lambda_sweep()

        self.assertEqual(rows[0].best_budget, NEWTON_FALLBACK)
        self.assertEqual(rows[0].time_to_target_s, rows[0].newton_time_s)

    def test_pending_cells_are_reported(self) -> None:
        launcher = ExperimentLauncher(ExperimentConfig(experiment_data(self.directory)))
        with self.assertLogs("ssn_bench.launcher", level="WARNING") as logs:
            with launcher:
                launcher.run_state.add_pending("ssn", 7)

        self.assertTrue(any("Cell ssn/7 did not complete" in line for line in logs.output))
        self.assertFalse(os.path.exists(os.path.join(self.directory, "manifest.json")))

    def test_sweep_needs_ssn(self) -> None:
        data = experiment_data(self.directory, methods={"newton": {"method": "newton"}})
        with ExperimentLauncher(ExperimentConfig(data)) as launcher:
            with self.assertRaises(ConfigurationError):
                launcher.sweep()


class TestMain(unittest.TestCase):
    def setUp(self) -> None:
        self._directory = tempfile.TemporaryDirectory()
        self.directory = self._directory.name

    def tearDown(self) -> None:
        self._directory.cleanup()
        optimizers = ExperimentConfig.optimizers()
        if optimizers != _OPTIMIZERS_START_STATE:
            optimizers.clear()
            for key in _OPTIMIZERS_START_STATE:
                optimizers[key] = _OPTIMIZERS_START_STATE[key]

    def write_config(self, data: Dict[str, Any]) -> str:
        path = os.path.join(self.directory, "config.yml")
        with open(path, "w") as config_file:
            yaml.safe_dump(data, config_file)
        return path

    def test_parser(self) -> None:
        parser = build_parser()
        args = parser.parse_args(["--seed", "3", "certify", "--dataset", "data.txt", "--budget", "10d"])

        self.assertEqual(args.command, "certify")
        self.assertEqual(args.seed, 3)
        self.assertEqual(args.trials, 200)
        self.assertEqual(args.scheme, "block_partial_leverage")
        self.assertEqual(args.at, "zero")

        with redirect_stdout(io.StringIO()), self.assertRaises(SystemExit):
            parser.parse_args(["levscores"])

    def test_run(self) -> None:
        path = self.write_config(experiment_data(os.path.join(self.directory, "out")))

        code, output = run_main(["--seed", "4", "run", "-i", path])

        self.assertEqual(code, EXIT_SUCCESS)
        self.assertIn("Method ssn seed 4 -> run status: success", output)
        self.assertTrue(os.path.exists(os.path.join(self.directory, "out", "newton_4.csv")))

    def test_run_with_failing_cell(self) -> None:
        data = regression_data(os.path.join(self.directory, "out"), seeds=[0])
        data["methods"] = {"gd": {"method": "gd", "step_size": 10.0, "max_iters": 50}}

        code, output = run_main(["run", "-i", self.write_config(data)])

        self.assertEqual(code, EXIT_RUNTIME_FAILURE)
        self.assertIn("run status: diverged", output)

    def test_invalid_inputs(self) -> None:
        invalid = self.write_config({"problem": {"synthetic": {"n": 10, "d": 2}}, "methods": {"x": {"method": "sgd"}}})

        self.assertEqual(run_main(["run", "-i", invalid])[0], EXIT_CONFIG_ERROR)
        self.assertEqual(run_main(["run", "-i", os.path.join(self.directory, "missing.yml")])[0], EXIT_CONFIG_ERROR)
        self.assertEqual(run_main(["--optimizer-plugins", "broken", "run", "-i", invalid])[0], EXIT_CONFIG_ERROR)

    def test_optimizer_plugin_flag(self) -> None:
        data = regression_data(os.path.join(self.directory, "out"), seeds=[0])
        data["methods"] = {"plugin": {"method": "scaled", "step": 0.001, "max_iters": 3}}
        plugin = "scaled=tests.custom_optimizers.ScaledGradientOptimizer"

        code, output = run_main(["--optimizer-plugins", plugin, "run", "-i", self.write_config(data)])

        self.assertEqual(code, EXIT_SUCCESS)
        self.assertIn("Method plugin seed 0 -> run status: success", output)

    def test_synth_then_analyze(self) -> None:
        config = self.write_config(experiment_data(self.directory))
        data_path = os.path.join(self.directory, "synthetic.txt")

        code, _ = run_main(["synth", "-i", config, "-o", data_path])
        self.assertEqual(code, EXIT_SUCCESS)

        scores_path = os.path.join(self.directory, "scores.csv")
        code, output = run_main(["levscores", "--dataset", data_path, "-o", scores_path])
        self.assertEqual(code, EXIT_SUCCESS)
        self.assertIn("Leverage scores (exact) -> sum:", output)
        rows = read_rows(scores_path)
        self.assertEqual(rows[0], ["block", "tau"])
        self.assertEqual(len(rows), 201)

        certify_path = os.path.join(self.directory, "certify.json")
        code, _ = run_main(
            ["--seed", "2", "certify", "--dataset", data_path, "--budget", "10d", "--trials", "5", "-o", certify_path]
        )
        self.assertEqual(code, EXIT_SUCCESS)
        with open(certify_path, "r") as report_file:
            report = json.load(report_file)
        self.assertEqual(report["trials"], 5)
        self.assertEqual(report["budget_s"], 50)

        condnums_path = os.path.join(self.directory, "condnums.json")
        code, _ = run_main(["condnums", "-i", config, "--lambda", "0.1", "-o", condnums_path])
        self.assertEqual(code, EXIT_SUCCESS)
        with open(condnums_path, "r") as report_file:
            self.assertEqual(set(json.load(report_file)), {"w_star", "w0"})

    def test_condnums_over_lambda_grid(self) -> None:
        config = self.write_config(experiment_data(self.directory, lambdas=[1.0, 0.01]))
        condnums_path = os.path.join(self.directory, "condnums.json")

        code, output = run_main(["condnums", "-i", config, "-o", condnums_path])

        self.assertEqual(code, EXIT_SUCCESS)
        self.assertIn("Condition numbers at w_star (lambda 0.01) -> kappa:", output)
        with open(condnums_path, "r") as report_file:
            report = json.load(report_file)
        self.assertEqual([entry["lambda"] for entry in report["lambdas"]], [1.0, 0.01])
        self.assertEqual(set(report["lambdas"][0]), {"lambda", "w_star", "w0"})

        rows = read_rows(os.path.join(self.directory, "condnums.csv"))
        self.assertEqual(rows[0], ["lambda", "kappa", "kappa_raw", "kappa_hat", "kappa_bar"])
        self.assertEqual([row[0] for row in rows[1:]], ["1.0", "0.01"])
        self.assertEqual(float(rows[2][3]), report["lambdas"][1]["w_star"]["kappa_hat"])

    def test_sweep_over_lambda_grid(self) -> None:
        data = experiment_data(os.path.join(self.directory, "out"), lambdas=[0.1], sweep={"grid": ["10d"]})
        data["methods"] = {"ssn": {"method": "ssn", "max_outer_iters": 30}}

        code, output = run_main(["--seed", "0", "sweep", "-i", self.write_config(data)])

        self.assertEqual(code, EXIT_SUCCESS)
        self.assertIn("Lambda 0.1 method ssn -> sweep best budget:", output)
        rows = read_rows(os.path.join(self.directory, "out", "lambda_sweep.csv"))
        self.assertEqual(rows[0], LAMBDA_SWEEP_HEADER)
        self.assertEqual(len(rows), 2)

    def test_certify_auto_budget(self) -> None:
        config = self.write_config(experiment_data(self.directory))

        code, output = run_main(
            ["--out-dir", self.directory, "certify", "-i", config, "--scheme", "uniform", "--trials", "2"]
        )

        self.assertEqual(code, EXIT_SUCCESS)
        self.assertIn("Scheme uniform with s=", output)
        self.assertTrue(os.path.exists(os.path.join(self.directory, "certify.json")))
