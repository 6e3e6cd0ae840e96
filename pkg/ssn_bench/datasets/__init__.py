"""`datasets` module contains loaders turning data files into dense problems."""
from typing import Any

from .dataset_loader import Dataset, DatasetLoader, DatasetLoadError, remap_labels
from .csv_loader import CsvLoader, write_csv
from .libsvm import LibsvmLoader, write_libsvm
from .synthetic import SyntheticSpec, generate

FORMATS = ["libsvm", "csv"]


def load_dataset(path: str, data_format: str, **options: Any) -> Dataset:
    """Loads `path` with the loader for `data_format`; options go to the loader."""
    if data_format == "libsvm":
        return LibsvmLoader(**options).load(path)
    if data_format == "csv":
        return CsvLoader(**options).load(path)

    raise DatasetLoadError(f"Incorrect format '{data_format}'. Available formats are: {FORMATS}")
