"""Plain numeric CSV with the label in the first or the last column."""
import csv
from typing import List, Optional

import numpy as np

from .dataset_loader import Dataset, DatasetLoader, DatasetLoadError

LABEL_POSITIONS = ["first", "last"]


class CsvLoader(DatasetLoader):
    """Reads dense CSV files. A non-numeric first line is treated as a header."""

    def __init__(
        self, label_threshold: Optional[float] = None, binary: bool = True, label_position: str = "last"
    ) -> None:
        super().__init__(label_threshold, binary)
        if label_position not in LABEL_POSITIONS:
            raise ValueError(f"Incorrect label position '{label_position}'. Available positions are: {LABEL_POSITIONS}")
        self.label_position = label_position

    def load(self, path: str) -> Dataset:
        table: List[List[float]] = []
        width: Optional[int] = None

        try:
            with open(path, "r", newline="") as data_file:
                for line_number, fields in enumerate(csv.reader(data_file), start=1):
                    if not fields or all(not field.strip() for field in fields):
                        continue
                    try:
                        numbers = [float(field) for field in fields]
                    except ValueError:
                        if line_number == 1:
                            continue
                        raise DatasetLoadError(f"{path}:{line_number}: non-numeric field in {fields}")

                    if width is None:
                        width = len(numbers)
                    elif len(numbers) != width:
                        raise DatasetLoadError(
                            f"{path}:{line_number}: expected {width} fields, got {len(numbers)}"
                        )
                    table.append(numbers)
        except OSError as error:
            raise DatasetLoadError(f"Could not read {path}: {error}")

        if not table:
            raise DatasetLoadError(f"{path}: no data points found")
        if width is None or width < 2:
            raise DatasetLoadError(f"{path}: need at least one feature column and one label column")

        values = np.array(table, dtype=np.float64)
        if self.label_position == "first":
            raw_labels, x = values[:, 0], values[:, 1:]
        else:
            raw_labels, x = values[:, -1], values[:, :-1]

        y, mapping = self.finalize_labels(raw_labels, path)
        return Dataset(x=np.ascontiguousarray(x), y=y, label_mapping=mapping, source=path)


def write_csv(path: str, x: np.ndarray, y: np.ndarray, label_position: str = "last") -> None:
    """Writes X and Y as CSV with round-trip exact float formatting."""
    if label_position not in LABEL_POSITIONS:
        raise ValueError(f"Incorrect label position '{label_position}'. Available positions are: {LABEL_POSITIONS}")

    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    with open(path, "w", newline="") as data_file:
        writer = csv.writer(data_file)
        for row, label in zip(x, y):
            fields = [repr(float(value)) for value in row]
            if label_position == "first":
                fields.insert(0, repr(float(label)))
            else:
                fields.append(repr(float(label)))
            writer.writerow(fields)
