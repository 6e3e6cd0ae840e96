"""Module with the base class for dataset loader plugins."""
import abc
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np


class DatasetLoadError(Exception):
    """Exception raised if a dataset could not be loaded."""


@dataclass
class Dataset:
    """Dense data matrix with labels in {-1, +1} (or real targets for squared loss)."""

    x: np.ndarray
    y: np.ndarray
    label_mapping: Dict[str, int] = field(default_factory=dict)
    source: str = ""
    w_true: Optional[np.ndarray] = None


class DatasetLoader(metaclass=abc.ABCMeta):
    """Base class for dataset loaders."""

    def __init__(self, label_threshold: Optional[float] = None, binary: bool = True) -> None:
        self.label_threshold = label_threshold
        self.binary = binary

    @abc.abstractmethod
    def load(self, path: str) -> Dataset:
        """Reads the file at `path` and returns a dense dataset."""

    def finalize_labels(self, raw: np.ndarray, path: str) -> Tuple[np.ndarray, Dict[str, int]]:
        """Maps raw labels to {-1, +1} unless the loader keeps real targets."""
        if not self.binary:
            return raw, {}
        try:
            return remap_labels(raw, self.label_threshold)
        except ValueError as error:
            raise DatasetLoadError(f"{path}: {error}")


def _label_key(value: float) -> str:
    return f"{value:g}"


def remap_labels(raw: np.ndarray, threshold: Optional[float] = None) -> Tuple[np.ndarray, Dict[str, int]]:
    """Maps raw labels onto {-1, +1}.

    {-1, +1} labels are kept, {0, 1} maps 0 to -1 and {1, 2} maps 1 to -1 and 2 to +1.
    With a threshold, targets above it become +1 and the rest -1.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if threshold is not None:
        labels = np.where(raw > threshold, 1.0, -1.0)
        return labels, {f"> {_label_key(threshold)}": 1, f"<= {_label_key(threshold)}": -1}

    distinct = set(np.unique(raw).tolist())
    for mapping in ({-1.0: -1, 1.0: 1}, {0.0: -1, 1.0: 1}, {1.0: -1, 2.0: 1}):
        if distinct <= set(mapping):
            labels = np.array([mapping[value] for value in raw.tolist()], dtype=np.float64)
            return labels, {_label_key(key): value for key, value in mapping.items() if key in distinct}

    shown = sorted(distinct)[:5]
    raise ValueError(f"Labels {shown} are not binary; set a label threshold to binarize them")
