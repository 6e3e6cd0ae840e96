"""Module capable of parsing experiment config files"""
import copy
import importlib
from typing import Any, Dict, List, Optional, Type

import yaml

from .datasets import FORMATS, SyntheticSpec
from .datasets.csv_loader import LABEL_POSITIONS
from .glm import LOSSES
from .optimizers import OPTIMIZERS, Optimizer, resolve_budget
from .optimizers.ssn import Budget

OUTPUT_FORMATS = ["csv", "json"]
DEFAULT_SWEEP_GRID = [f"{k}d" for k in range(10, 101, 10)]


class ConfigurationError(ValueError):
    """Error raised when an experiment config is invalid."""


def _require(data: Dict[Any, Any], key: str, section: str) -> Any:
    if key not in data:
        raise ConfigurationError(f"Missing key '{key}' in section '{section}'")
    return data[key]


class DatasetSource:
    """Dataset file with its format and preprocessing options."""

    @staticmethod
    def from_dict(data: Dict[Any, Any]) -> "DatasetSource":
        """Parses a `DatasetSource` entity from provided dict."""
        data_format = data.get("format", "libsvm")
        if data_format not in FORMATS:
            raise ConfigurationError(f"Incorrect format '{data_format}'. Available formats are: {FORMATS}")
        label_position = data.get("label_position", "last")
        if label_position not in LABEL_POSITIONS:
            raise ConfigurationError(
                f"Incorrect label position '{label_position}'. Available positions are: {LABEL_POSITIONS}"
            )
        preprocess = data.get("preprocess", dict())
        threshold = data.get("label_threshold")
        n_features = data.get("n_features")
        return DatasetSource(
            path=str(_require(data, "path", "problem.dataset")),
            data_format=data_format,
            label_position=label_position,
            label_threshold=None if threshold is None else float(threshold),
            n_features=None if n_features is None else int(n_features),
            normalize_columns=bool(preprocess.get("normalize_columns", True)),
            add_intercept=bool(preprocess.get("add_intercept", True)),
        )

    # pylint: disable=too-many-arguments
    def __init__(
        self,
        path: str,
        data_format: str,
        label_position: str = "last",
        label_threshold: Optional[float] = None,
        n_features: Optional[int] = None,
        normalize_columns: bool = True,
        add_intercept: bool = True,
    ) -> None:
        self.path = path
        self.data_format = data_format
        self.label_position = label_position
        self.label_threshold = label_threshold
        self.n_features = n_features
        self.normalize_columns = normalize_columns
        self.add_intercept = add_intercept

    def loader_options(self, binary: bool) -> Dict[str, Any]:
        """Keyword arguments of the loader for this format."""
        options: Dict[str, Any] = {"label_threshold": self.label_threshold, "binary": binary}
        if self.data_format == "csv":
            options["label_position"] = self.label_position
        else:
            options["n_features"] = self.n_features
        return options

    def to_dict(self) -> Dict[str, Any]:
        """Inverse of `from_dict`."""
        return {
            "path": self.path,
            "format": self.data_format,
            "label_position": self.label_position,
            "label_threshold": self.label_threshold,
            "n_features": self.n_features,
            "preprocess": {"normalize_columns": self.normalize_columns, "add_intercept": self.add_intercept},
        }


class ProblemSource:
    """Either a dataset or a synthetic generator, plus the loss."""

    @staticmethod
    def from_dict(data: Dict[Any, Any]) -> "ProblemSource":
        """Parses a `ProblemSource` entity from provided dict."""
        loss = data.get("loss", "logistic")
        if loss not in LOSSES:
            raise ConfigurationError(f"Incorrect loss '{loss}'. Available losses are: {LOSSES}")

        has_dataset, has_synthetic = "dataset" in data, "synthetic" in data
        if has_dataset == has_synthetic:
            raise ConfigurationError("Section 'problem' needs exactly one of 'dataset' and 'synthetic'")

        if has_dataset:
            return ProblemSource(loss, dataset=DatasetSource.from_dict(data["dataset"]))
        try:
            return ProblemSource(loss, synthetic=SyntheticSpec.from_dict(data["synthetic"]))
        except (KeyError, TypeError, ValueError) as error:
            raise ConfigurationError(f"Invalid synthetic problem: {error}")

    def __init__(
        self, loss: str, dataset: Optional[DatasetSource] = None, synthetic: Optional[SyntheticSpec] = None
    ) -> None:
        self.loss = loss
        self.dataset = dataset
        self.synthetic = synthetic

    def to_dict(self) -> Dict[str, Any]:
        """Inverse of `from_dict`."""
        result: Dict[str, Any] = {"loss": self.loss}
        if self.dataset is not None:
            result["dataset"] = self.dataset.to_dict()
        if self.synthetic is not None:
            result["synthetic"] = self.synthetic.to_dict()
        return result


class MethodSpec:
    """Named optimizer with its options."""

    @staticmethod
    def from_dict(name: str, data: Dict[Any, Any]) -> "MethodSpec":
        """Parses a `MethodSpec` entity from provided dict."""
        if not isinstance(data, dict):
            raise ConfigurationError(f"Method '{name}' must be a mapping")
        method = data.get("method")
        if method not in OPTIMIZERS:
            raise ConfigurationError(
                f"Incorrect method '{method}' for '{name}'. Available methods are: {list(OPTIMIZERS)}"
            )
        options = {key: value for key, value in data.items() if key != "method"}
        return MethodSpec(name, method, options)

    def __init__(self, name: str, method: str, options: Dict[str, Any]) -> None:
        self.name = name
        self.method = method
        self.options = options

    def create(self) -> Optimizer:
        """Instantiates the optimizer, turning option errors into configuration errors."""
        try:
            return OPTIMIZERS[self.method](self.options)
        except (TypeError, ValueError) as error:
            raise ConfigurationError(f"Invalid options for method '{self.name}': {error}")

    def to_dict(self) -> Dict[str, Any]:
        """Inverse of `from_dict`."""
        return {"method": self.method, **self.options}

    def __str__(self) -> str:
        return self.name


class ReferencePolicy:
    """How the reference solution `w*` is obtained."""

    KINDS = ["compute_via_newton", "load", "none"]

    @staticmethod
    def from_dict(data: Optional[Dict[Any, Any]]) -> "ReferencePolicy":
        """Parses a `ReferencePolicy` entity from provided dict."""
        if data is None:
            return ReferencePolicy("compute_via_newton", tol=1e-12)
        if data == "none":
            return ReferencePolicy("none")
        if not isinstance(data, dict) or len(data) != 1:
            raise ConfigurationError(
                f"Section 'reference_solution' needs exactly one of {ReferencePolicy.KINDS[:2]}, got {data}"
            )
        kind, value = next(iter(data.items()))
        if kind == "compute_via_newton":
            return ReferencePolicy(kind, tol=float(value))
        if kind == "load":
            return ReferencePolicy(kind, path=str(value))
        raise ConfigurationError(
            f"Incorrect reference policy '{kind}'. Available policies are: {ReferencePolicy.KINDS}"
        )

    def __init__(self, kind: str, tol: float = 1e-12, path: Optional[str] = None) -> None:
        self.kind = kind
        self.tol = tol
        self.path = path

    def to_dict(self) -> Any:
        """Inverse of `from_dict`."""
        if self.kind == "compute_via_newton":
            return {"compute_via_newton": self.tol}
        if self.kind == "load":
            return {"load": self.path}
        return "none"


class OutputSpec:
    """Output directory and emitted formats."""

    @staticmethod
    def from_dict(data: Dict[Any, Any]) -> "OutputSpec":
        """Parses an `OutputSpec` entity from provided dict."""
        formats = list(data.get("formats", OUTPUT_FORMATS))
        for output_format in formats:
            if output_format not in OUTPUT_FORMATS:
                raise ConfigurationError(
                    f"Incorrect output format '{output_format}'. Available formats are: {OUTPUT_FORMATS}"
                )
        return OutputSpec(directory=str(data.get("directory", "results")), formats=formats)

    def __init__(self, directory: str, formats: List[str]) -> None:
        self.directory = directory
        self.formats = formats

    def to_dict(self) -> Dict[str, Any]:
        """Inverse of `from_dict`."""
        return {"directory": self.directory, "formats": list(self.formats)}


class ExperimentConfig:
    """Parsed experiment description."""

    @staticmethod
    def declare_optimizer(name: str, optimizer: Type[Optimizer]) -> None:
        """With this method you can declare an additional optimizer, for example:

        >>> ExperimentConfig.declare_optimizer("my_method", MyOptimizer)

        Please note that this method should be called before config parsing.
        """
        if name in OPTIMIZERS:
            raise ValueError(f"Optimizer {name} is already declared ({OPTIMIZERS[name].__name__})")
        if not (isinstance(optimizer, type) and issubclass(optimizer, Optimizer)):
            raise ValueError(f"Class {optimizer} is not a subclass of {Optimizer}")

        OPTIMIZERS[name] = optimizer

    @staticmethod
    def optimizers() -> Dict[str, Type[Optimizer]]:
        """Returns the declared optimizers."""
        return OPTIMIZERS

    @staticmethod
    def from_yaml(path: str) -> "ExperimentConfig":
        """Parses configuration from YAML file."""
        data = load_yaml(path)
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config file {path} does not contain a mapping")
        return ExperimentConfig(data)

    def __init__(self, data: Dict[Any, Any]) -> None:
        self.raw = copy.deepcopy(data)

        # Plugins are imported before the methods are parsed, so their names can be used below.
        plugins = data.get("plugins", dict())
        self.plugins: Dict[str, Dict[str, str]] = {"optimizers": dict(plugins.get("optimizers", dict()))}
        for name, class_path in self.plugins["optimizers"].items():
            if name not in OPTIMIZERS:
                self.declare_optimizer(name, import_optimizer_class(class_path))

        self.problem = ProblemSource.from_dict(_require(data, "problem", "root"))

        try:
            self.lam = float(data.get("lambda", 0.01))
        except (TypeError, ValueError):
            raise ConfigurationError(f"'lambda' must be a number, got {data.get('lambda')!r}")
        if self.lam < 0.0:
            raise ConfigurationError(f"'lambda' must be non-negative, got {self.lam}")

        lambdas = data.get("lambdas", [])
        if not isinstance(lambdas, list):
            raise ConfigurationError(f"'lambdas' must be a list of numbers, got {lambdas!r}")
        try:
            self.lambdas: List[float] = [float(value) for value in lambdas]
        except (TypeError, ValueError):
            raise ConfigurationError(f"'lambdas' must be a list of numbers, got {lambdas!r}")
        if any(value < 0.0 for value in self.lambdas):
            raise ConfigurationError(f"'lambdas' must be non-negative, got {self.lambdas}")

        methods = _require(data, "methods", "root")
        if not isinstance(methods, dict) or not methods:
            raise ConfigurationError("Section 'methods' must declare at least one method")
        self.methods: Dict[str, MethodSpec] = {
            str(name): MethodSpec.from_dict(str(name), value) for name, value in methods.items()
        }
        for method in self.methods.values():
            method.create()

        self.seeds: List[int] = [int(seed) for seed in data.get("seeds", [0])]
        if not self.seeds:
            raise ConfigurationError("Section 'seeds' must not be empty")

        self.reference = ReferencePolicy.from_dict(data.get("reference_solution"))
        self.outputs = OutputSpec.from_dict(data.get("outputs", dict()))
        self.diagnostics = bool(data.get("diagnostics", False))
        self.threads = int(data.get("threads", 1))
        if self.threads < 1:
            raise ConfigurationError(f"'threads' must be at least 1, got {self.threads}")
        sweep = data.get("sweep", dict())
        self.sweep_grid: List[Budget] = [
            budget if isinstance(budget, int) else str(budget) for budget in sweep.get("grid", DEFAULT_SWEEP_GRID)
        ]
        for budget in self.sweep_grid:
            try:
                resolve_budget(budget, 1)
            except ValueError as error:
                raise ConfigurationError(f"Invalid sweep grid: {error}")

    def override(
        self, seed: Optional[int] = None, out_dir: Optional[str] = None, threads: Optional[int] = None
    ) -> None:
        """Applies command-line overrides."""
        if seed is not None:
            self.seeds = [seed]
        if out_dir is not None:
            self.outputs.directory = out_dir
        if threads is not None:
            if threads < 1:
                raise ConfigurationError(f"'threads' must be at least 1, got {threads}")
            self.threads = threads

    def lambda_grid(self) -> List[float]:
        """Ridge parameters of the lambda sweep; `lambda` alone when no grid is configured."""
        return list(self.lambdas) if self.lambdas else [self.lam]

    def to_dict(self) -> Dict[str, Any]:
        """Echo of the validated configuration; it parses back into an equal configuration."""
        result: Dict[str, Any] = {
            "problem": self.problem.to_dict(),
            "lambda": self.lam,
            "lambdas": list(self.lambdas),
            "methods": {name: method.to_dict() for name, method in self.methods.items()},
            "seeds": list(self.seeds),
            "reference_solution": self.reference.to_dict(),
            "outputs": self.outputs.to_dict(),
            "diagnostics": self.diagnostics,
            "threads": self.threads,
            "sweep": {"grid": list(self.sweep_grid)},
        }
        if self.plugins["optimizers"]:
            result["plugins"] = copy.deepcopy(self.plugins)
        return result


def import_class(class_path: str, res_type: Any) -> Any:
    """Imports `module.Class` and checks that it subclasses `res_type`."""
    module_name, class_name = class_path.rsplit(".", 1)
    module = importlib.import_module(module_name)
    imported = getattr(module, class_name)

    if not (isinstance(imported, type) and issubclass(imported, res_type)):
        raise ValueError(f"Class {imported} is not a subclass of {res_type}")

    return imported


def import_optimizer_class(class_path: str) -> Type[Optimizer]:
    """Imports `module.Class` and checks that it is an `Optimizer`."""
    try:
        return import_class(class_path, Optimizer)
    except (ValueError, ImportError, AttributeError) as error:
        raise ConfigurationError(f"Could not load optimizer plugin {class_path}: {error}")


def load_yaml(path: str) -> Dict[Any, Any]:
    """Loads YAML from file."""
    with open(path, "r") as config_file:
        return yaml.safe_load(config_file)
