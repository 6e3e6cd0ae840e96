# pylint: disable=missing-docstring

import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from ssn_bench.datasets import (
    CsvLoader,
    DatasetLoadError,
    LibsvmLoader,
    SyntheticSpec,
    generate,
    load_dataset,
    remap_labels,
    write_csv,
    write_libsvm,
)

_DIR_PATH = os.path.dirname(os.path.realpath(__file__))


def data_path(file_name: str) -> str:
    return os.path.join(_DIR_PATH, "test_data", file_name)


class TestLabels(unittest.TestCase):
    def test_plus_minus_one_kept(self) -> None:
        labels, mapping = remap_labels(np.array([1.0, -1.0, 1.0]))

        assert_array_equal(labels, [1.0, -1.0, 1.0])
        self.assertEqual(mapping, {"-1": -1, "1": 1})

    def test_zero_one(self) -> None:
        labels, mapping = remap_labels(np.array([0.0, 1.0]))

        assert_array_equal(labels, [-1.0, 1.0])
        self.assertEqual(mapping, {"0": -1, "1": 1})

    def test_one_two(self) -> None:
        labels, mapping = remap_labels(np.array([2.0, 1.0, 2.0]))

        assert_array_equal(labels, [1.0, -1.0, 1.0])
        self.assertEqual(mapping, {"1": -1, "2": 1})

    def test_threshold(self) -> None:
        labels, mapping = remap_labels(np.array([0.3, 1.7, 0.9]), threshold=1.0)

        assert_array_equal(labels, [-1.0, 1.0, -1.0])
        self.assertEqual(mapping, {"> 1": 1, "<= 1": -1})

    def test_non_binary_rejected(self) -> None:
        with self.assertRaises(ValueError):
            remap_labels(np.array([1.0, 2.0, 3.0]))


class TestLibsvm(unittest.TestCase):
    def test_load(self) -> None:
        dataset = load_dataset(data_path("small.libsvm"), "libsvm")

        assert_allclose(dataset.x, [[0.5, 0.0, 2.0], [0.0, 1.5, 0.0], [-1.0, 0.25, 4.0]])
        assert_array_equal(dataset.y, [1.0, -1.0, 1.0])
        self.assertEqual(dataset.source, data_path("small.libsvm"))

    def test_n_features_pads_columns(self) -> None:
        dataset = LibsvmLoader(n_features=5).load(data_path("small.libsvm"))

        self.assertEqual(dataset.x.shape, (3, 5))
        assert_allclose(dataset.x[:, 3:], np.zeros((3, 2)))

    def test_n_features_too_small(self) -> None:
        with self.assertRaises(DatasetLoadError):
            LibsvmLoader(n_features=2).load(data_path("small.libsvm"))

    def test_errors_name_the_line(self) -> None:
        cases = {
            "+1 1:0.5\nfoo 1:1\n": ":2:",
            "+1 0:0.5\n": ":1:",
            "+1 1:0.5 1:0.7\n": ":1:",
            "+1 1-0.5\n": ":1:",
        }
        with tempfile.TemporaryDirectory() as directory:
            for content, location in cases.items():
                path = os.path.join(directory, "broken.libsvm")
                with open(path, "w") as data_file:
                    data_file.write(content)

                with self.assertRaises(DatasetLoadError) as context:
                    load_dataset(path, "libsvm")
                self.assertIn(location, str(context.exception))

    def test_missing_file(self) -> None:
        with self.assertRaises(DatasetLoadError):
            load_dataset(data_path("does-not-exist.libsvm"), "libsvm")

    def test_write_read_is_exact(self) -> None:
        rng = np.random.default_rng(0)
        x = rng.standard_normal((6, 4))
        x[2, 1] = 0.0
        y = np.array([1.0, -1.0, 1.0, 1.0, -1.0, -1.0])

        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "data.libsvm")
            write_libsvm(path, x, y)
            dataset = LibsvmLoader(n_features=4).load(path)

        assert_array_equal(dataset.x, x)
        assert_array_equal(dataset.y, y)


class TestCsv(unittest.TestCase):
    def test_load_with_header(self) -> None:
        dataset = CsvLoader().load(data_path("small.csv"))

        assert_allclose(dataset.x, [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        assert_array_equal(dataset.y, [-1.0, 1.0, 1.0])
        self.assertEqual(dataset.label_mapping, {"0": -1, "1": 1})

    def test_label_first_with_threshold(self) -> None:
        dataset = load_dataset(data_path("regression.csv"), "csv", label_position="first", label_threshold=1.0)

        assert_allclose(dataset.x, [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        assert_array_equal(dataset.y, [-1.0, 1.0, -1.0])

    def test_real_targets(self) -> None:
        dataset = CsvLoader(binary=False, label_position="first").load(data_path("regression.csv"))

        assert_allclose(dataset.y, [0.3, 1.7, 0.9])
        self.assertEqual(dataset.label_mapping, {})

    def test_non_binary_labels(self) -> None:
        with self.assertRaises(DatasetLoadError):
            CsvLoader(label_position="first").load(data_path("regression.csv"))

    def test_ragged_rows(self) -> None:
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "ragged.csv")
            with open(path, "w") as data_file:
                data_file.write("1,2,1\n3,1\n")

            with self.assertRaises(DatasetLoadError) as context:
                CsvLoader().load(path)
        self.assertIn(":2:", str(context.exception))

    def test_write_read_is_exact(self) -> None:
        x = np.random.default_rng(1).standard_normal((5, 3))
        y = np.array([1.0, -1.0, -1.0, 1.0, 1.0])

        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "data.csv")
            write_csv(path, x, y, label_position="first")
            dataset = CsvLoader(label_position="first").load(path)

        assert_array_equal(dataset.x, x)
        assert_array_equal(dataset.y, y)

    def test_unknown_format(self) -> None:
        with self.assertRaises(DatasetLoadError):
            load_dataset(data_path("small.csv"), "parquet")


class TestSynthetic(unittest.TestCase):
    def test_parse(self) -> None:
        spec = SyntheticSpec.from_dict({"n": 100, "d": 5, "coherence": {"one_heavy_row": 0.9}, "noise_seed": 4})

        self.assertEqual(spec.coherence, "one_heavy_row")
        self.assertEqual(spec.coherence_parameter, 0.9)
        self.assertEqual(str(spec), "synthetic:100x5:one_heavy_row(0.9)")
        self.assertEqual(SyntheticSpec.from_dict(spec.to_dict()).to_dict(), spec.to_dict())

    def test_invariants(self) -> None:
        with self.assertRaises(ValueError):
            SyntheticSpec(n=3, d=5)
        with self.assertRaises(ValueError):
            SyntheticSpec(n=10, d=2, coherence="one_heavy_row", coherence_parameter=1.0)
        with self.assertRaises(ValueError):
            SyntheticSpec(n=10, d=2, coherence="power_law", coherence_parameter=0.0)
        with self.assertRaises(ValueError):
            SyntheticSpec(n=10, d=2, coherence="spiky")

    def test_one_heavy_row_needs_two_rows(self) -> None:
        with self.assertRaises(ValueError):
            SyntheticSpec(n=1, d=1, coherence="one_heavy_row", coherence_parameter=0.5)
        with self.assertRaises(ValueError):
            SyntheticSpec.from_dict({"n": 1, "d": 1, "coherence": {"one_heavy_row": 0.5}})
        dataset = generate(SyntheticSpec(n=2, d=1, coherence="one_heavy_row", coherence_parameter=0.5))
        self.assertAlmostEqual(dataset.x[0, 0] ** 2, dataset.x[1, 0] ** 2)

    def test_generation_is_deterministic(self) -> None:
        spec = SyntheticSpec(n=50, d=4, noise_seed=9)
        first, second = generate(spec), generate(spec)

        assert_array_equal(first.x, second.x)
        assert_array_equal(first.y, second.y)
        self.assertTrue(set(np.unique(first.y)) <= {-1.0, 1.0})
        self.assertEqual(first.w_true.shape, (4,))

    def test_one_heavy_row_mass(self) -> None:
        dataset = generate(SyntheticSpec(n=200, d=3, coherence="one_heavy_row", coherence_parameter=0.9))
        mass = np.sum(dataset.x ** 2, axis=1)

        self.assertAlmostEqual(mass[0] / mass.sum(), 0.9)

    def test_power_law_profile(self) -> None:
        dataset = generate(SyntheticSpec(n=100, d=3, coherence="power_law", coherence_parameter=2.0))
        mass = np.sort(np.sum(dataset.x ** 2, axis=1))[::-1]

        assert_allclose(mass, np.arange(1, 101, dtype=np.float64) ** -2.0)

    def test_linear_labels(self) -> None:
        dataset = generate(SyntheticSpec(n=40, d=2, label_model="linear"))

        self.assertGreater(len(np.unique(dataset.y)), 2)
