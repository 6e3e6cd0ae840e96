# pylint: disable=missing-docstring, protected-access

import copy
import os
import unittest
from typing import Any, Dict

from ssn_bench.configuration import ConfigurationError, ExperimentConfig
from ssn_bench.optimizers import SsnOptimizer
from ssn_bench.optimizers.ssn import SsnConfig

from tests.custom_optimizers import NotAnOptimizer, ScaledGradientOptimizer

_OPTIMIZERS_START_STATE = copy.deepcopy(ExperimentConfig.optimizers())
_DIR_PATH = os.path.dirname(os.path.realpath(__file__))


def minimal_data() -> Dict[str, Any]:
    return {"problem": {"synthetic": {"n": 60, "d": 3}}, "methods": {"ssn": {"method": "ssn"}}}


class TestConfiguration(unittest.TestCase):
    @staticmethod
    def load_config(file_name: str) -> ExperimentConfig:
        """Loads ExperimentConfig from the sample .yml file"""
        config_path = os.path.join(_DIR_PATH, "test_data", file_name)
        return ExperimentConfig.from_yaml(config_path)

    def tearDown(self) -> None:
        # Clean global optimizers state after use.
        optimizers = ExperimentConfig.optimizers()
        if optimizers != _OPTIMIZERS_START_STATE:
            optimizers.clear()
            for key in _OPTIMIZERS_START_STATE:
                optimizers[key] = _OPTIMIZERS_START_STATE[key]

    def assert_invalid(self, data: Dict[str, Any]) -> None:
        with self.assertRaises(ConfigurationError):
            ExperimentConfig(data)

    def test_defaults(self) -> None:
        self.assertEqual(set(ExperimentConfig.optimizers()), {"ssn", "newton", "lbfgs", "gd", "agd"})

        config = self.load_config("minimal.yml")

        self.assertEqual(config.problem.loss, "logistic")
        self.assertIsNone(config.problem.dataset)
        self.assertEqual(config.problem.synthetic.n, 60)
        self.assertEqual(config.lam, 0.01)
        self.assertEqual(config.seeds, [0])
        self.assertEqual(config.reference.kind, "compute_via_newton")
        self.assertEqual(config.reference.tol, 1e-12)
        self.assertEqual(config.outputs.directory, "results")
        self.assertEqual(config.outputs.formats, ["csv", "json"])
        self.assertEqual(config.threads, 1)
        self.assertFalse(config.diagnostics)
        self.assertEqual(config.sweep_grid[0], "10d")
        self.assertEqual(config.sweep_grid[-1], "100d")
        self.assertEqual(config.plugins, {"optimizers": {}})

        method = config.methods["ssn"]
        self.assertEqual(method.method, "ssn")
        self.assertEqual(method.options, {})
        self.assertIsInstance(method.create(), SsnOptimizer)

    def test_full_parse(self) -> None:
        config = self.load_config("full.yml")

        dataset = config.problem.dataset
        self.assertEqual(dataset.path, "tests/test_data/small.csv")
        self.assertEqual(dataset.data_format, "csv")
        self.assertFalse(dataset.normalize_columns)
        self.assertTrue(dataset.add_intercept)
        self.assertEqual(dataset.loader_options(binary=True)["label_position"], "last")

        self.assertEqual(config.lam, 0.1)
        self.assertEqual(list(config.methods), ["ssn-uniform", "lbfgs"])
        self.assertEqual(config.methods["ssn-uniform"].options["budget"], "5d")
        self.assertEqual(config.seeds, [3, 4])
        self.assertEqual(config.reference.kind, "load")
        self.assertEqual(config.reference.path, "tests/test_data/w_star.json")
        self.assertTrue(config.diagnostics)
        self.assertEqual(config.threads, 2)
        self.assertEqual(config.sweep_grid, [50, "10d"])
        self.assertEqual(config.outputs.formats, ["csv"])

        ssn = config.methods["ssn-uniform"].create()
        expected = SsnConfig.from_dict({"scheme": "uniform", "budget": "5d", "solver": "direct", "max_outer_iters": 10})
        self.assertEqual(ssn.config, expected)

    def test_echo_parses_back(self) -> None:
        for file_name in ("minimal.yml", "full.yml"):
            config = self.load_config(file_name)
            echo = config.to_dict()

            self.assertEqual(ExperimentConfig(echo).to_dict(), echo)

    def test_override(self) -> None:
        config = self.load_config("full.yml")
        config.override(seed=9, out_dir="elsewhere", threads=4)

        self.assertEqual(config.seeds, [9])
        self.assertEqual(config.outputs.directory, "elsewhere")
        self.assertEqual(config.threads, 4)
        with self.assertRaises(ConfigurationError):
            config.override(threads=0)

    def test_reference_none(self) -> None:
        config = ExperimentConfig({**minimal_data(), "reference_solution": "none"})

        self.assertEqual(config.reference.kind, "none")
        self.assertEqual(config.reference.to_dict(), "none")

    def test_invalid_problem(self) -> None:
        self.assert_invalid({"methods": {"ssn": {"method": "ssn"}}})
        self.assert_invalid({**minimal_data(), "problem": {"loss": "hinge", "synthetic": {"n": 60, "d": 3}}})
        self.assert_invalid({**minimal_data(), "problem": {}})
        self.assert_invalid(
            {**minimal_data(), "problem": {"synthetic": {"n": 60, "d": 3}, "dataset": {"path": "x.libsvm"}}}
        )
        self.assert_invalid({**minimal_data(), "problem": {"synthetic": {"n": 2, "d": 3}}})
        self.assert_invalid({**minimal_data(), "problem": {"synthetic": {"d": 3}}})
        self.assert_invalid(
            {**minimal_data(), "problem": {"synthetic": {"n": 1, "d": 1, "coherence": {"one_heavy_row": 0.5}}}}
        )
        self.assert_invalid({**minimal_data(), "problem": {"dataset": {"format": "libsvm"}}})
        self.assert_invalid({**minimal_data(), "problem": {"dataset": {"path": "x", "format": "parquet"}}})
        self.assert_invalid(
            {**minimal_data(), "problem": {"dataset": {"path": "x", "format": "csv", "label_position": "middle"}}}
        )

    def test_invalid_methods(self) -> None:
        self.assert_invalid({**minimal_data(), "methods": {}})
        self.assert_invalid({**minimal_data(), "methods": {"x": {"method": "sgd"}}})
        self.assert_invalid({**minimal_data(), "methods": {"x": "ssn"}})
        self.assert_invalid({**minimal_data(), "methods": {"x": {"method": "ssn", "scheme": "importance"}}})
        self.assert_invalid({**minimal_data(), "methods": {"x": {"method": "gd", "step_size": -1.0}}})

    def test_invalid_scalars(self) -> None:
        self.assert_invalid({**minimal_data(), "lambda": -0.1})
        self.assert_invalid({**minimal_data(), "lambda": "large"})
        self.assert_invalid({**minimal_data(), "seeds": []})
        self.assert_invalid({**minimal_data(), "threads": 0})
        self.assert_invalid({**minimal_data(), "outputs": {"formats": ["parquet"]}})
        self.assert_invalid({**minimal_data(), "reference_solution": {"guess": 1}})
        self.assert_invalid({**minimal_data(), "reference_solution": {"load": "a", "compute_via_newton": 1e-9}})
        self.assert_invalid({**minimal_data(), "sweep": {"grid": ["10d", "many"]}})
        self.assert_invalid({**minimal_data(), "lambdas": 0.1})
        self.assert_invalid({**minimal_data(), "lambdas": [0.1, "small"]})
        self.assert_invalid({**minimal_data(), "lambdas": [0.1, -1.0]})

    def test_lambda_grid(self) -> None:
        config = ExperimentConfig(minimal_data())
        self.assertEqual(config.lambdas, [])
        self.assertEqual(config.lambda_grid(), [0.01])

        config = ExperimentConfig({**minimal_data(), "lambda": 0.5, "lambdas": [1, 0.1, 1e-3]})
        self.assertEqual(config.lambda_grid(), [1.0, 0.1, 1e-3])
        self.assertEqual(config.lam, 0.5)
        self.assertEqual(config.to_dict()["lambdas"], [1.0, 0.1, 1e-3])
        self.assertEqual(ExperimentConfig(config.to_dict()).lambdas, config.lambdas)

    def test_not_a_mapping(self) -> None:
        with self.assertRaises(ConfigurationError):
            self.load_config("not_a_mapping.yml")

    def test_declare_optimizer(self) -> None:
        ExperimentConfig.declare_optimizer("scaled_gd", ScaledGradientOptimizer)

        optimizers = ExperimentConfig.optimizers()
        self.assertTrue("ssn" in optimizers)
        self.assertEqual(optimizers["scaled_gd"], ScaledGradientOptimizer)

        with self.assertRaises(ValueError):
            ExperimentConfig.declare_optimizer("scaled_gd", ScaledGradientOptimizer)
        with self.assertRaises(ValueError):
            ExperimentConfig.declare_optimizer("other", NotAnOptimizer)

    def test_parse_plugins(self) -> None:
        config = self.load_config("custom_optimizers.yml")

        expected_layout = {"optimizers": {"scaled_gd": "tests.custom_optimizers.ScaledGradientOptimizer"}}
        self.assertEqual(config.plugins, expected_layout)
        self.assertEqual(config.problem.loss, "squared")
        self.assertIsInstance(config.methods["plugin"].create(), ScaledGradientOptimizer)
        self.assertEqual(config.to_dict()["plugins"], expected_layout)

    def test_invalid_plugin(self) -> None:
        with self.assertRaises(ConfigurationError):
            self.load_config("invalid_plugin.yml")
        self.assertFalse("broken" in ExperimentConfig.optimizers())
