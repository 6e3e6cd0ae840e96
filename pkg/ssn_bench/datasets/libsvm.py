"""LIBSVM sparse text format: `<label> <index>:<value> ...` with 1-based indices."""
from typing import List, Optional

import numpy as np
import scipy.sparse

from .dataset_loader import Dataset, DatasetLoader, DatasetLoadError


class LibsvmLoader(DatasetLoader):
    """Reads LIBSVM files and densifies them."""

    def __init__(
        self, label_threshold: Optional[float] = None, binary: bool = True, n_features: Optional[int] = None
    ) -> None:
        super().__init__(label_threshold, binary)
        self.n_features = n_features

    def load(self, path: str) -> Dataset:
        labels: List[float] = []
        rows: List[int] = []
        cols: List[int] = []
        values: List[float] = []

        try:
            with open(path, "r") as data_file:
                for line_number, line in enumerate(data_file, start=1):
                    content = line.split("#", 1)[0].strip()
                    if not content:
                        continue
                    self._parse_line(path, line_number, content, len(labels), labels, rows, cols, values)
        except OSError as error:
            raise DatasetLoadError(f"Could not read {path}: {error}")

        if not labels:
            raise DatasetLoadError(f"{path}: no data points found")

        max_index = max(cols) + 1 if cols else 0
        d = self.n_features if self.n_features is not None else max_index
        if d < 1:
            raise DatasetLoadError(f"{path}: no features found")
        if max_index > d:
            raise DatasetLoadError(f"{path}: feature index {max_index} exceeds n_features = {d}")

        matrix = scipy.sparse.coo_matrix((values, (rows, cols)), shape=(len(labels), d))
        x = np.asarray(matrix.toarray(), dtype=np.float64)
        y, mapping = self.finalize_labels(np.array(labels, dtype=np.float64), path)
        return Dataset(x=x, y=y, label_mapping=mapping, source=path)

    # pylint: disable=too-many-arguments
    @staticmethod
    def _parse_line(
        path: str,
        line_number: int,
        content: str,
        row: int,
        labels: List[float],
        rows: List[int],
        cols: List[int],
        values: List[float],
    ) -> None:
        parts = content.split()
        try:
            labels.append(float(parts[0]))
        except ValueError:
            raise DatasetLoadError(f"{path}:{line_number}: invalid label '{parts[0]}'")

        seen = set()
        for item in parts[1:]:
            index_text, separator, value_text = item.partition(":")
            try:
                if not separator:
                    raise ValueError("missing ':'")
                index = int(index_text)
                value = float(value_text)
            except ValueError as error:
                raise DatasetLoadError(f"{path}:{line_number}: malformed feature '{item}' ({error})")
            if index < 1:
                raise DatasetLoadError(f"{path}:{line_number}: feature indices are 1-based, got {index}")
            if index in seen:
                raise DatasetLoadError(f"{path}:{line_number}: feature {index} repeated")
            seen.add(index)
            rows.append(row)
            cols.append(index - 1)
            values.append(value)


def write_libsvm(path: str, x: np.ndarray, y: np.ndarray) -> None:
    """Writes a dense matrix in LIBSVM format, skipping zero entries.

    Values use the shortest round-trip representation, so reading the file back is exact.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    with open(path, "w") as data_file:
        for row, label in zip(x, y):
            features = " ".join(f"{index + 1}:{float(row[index])!r}" for index in np.flatnonzero(row))
            data_file.write(f"{_format_label(label)} {features}".rstrip() + "\n")


def _format_label(label: float) -> str:
    label = float(label)
    return str(int(label)) if label.is_integer() else repr(label)
