"""Main module of the sub-sampled Newton benchmark."""
import csv
import logging
import os
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
import yaml

from .configuration import (
    ConfigurationError,
    DatasetSource,
    ExperimentConfig,
    ProblemSource,
    import_optimizer_class,
)
from .datasets import DatasetLoadError, generate, write_csv, write_libsvm
from .diagnostics import RankDeficientError, certify_sampling, condition_numbers_from_factor
from .glm import GlmProblem
from .launcher import ExperimentLauncher, best_budgets, build_problem, write_json
from .linalg import NumericalError
from .optimizers import OptimizerError, resolve_budget, solve_reference
from .sampling import (
    SKETCH_FACTOR,
    DegenerateInputError,
    EmptySampleError,
    coherence,
    exact_block_partial_leverage_scores,
    fast_block_partial_leverage_scores,
    sampling_size_leverage,
    scheme_sampling_size,
)

DEFAULT_LAMBDA = 0.01
REFERENCE_TOL = 1e-12
CONDNUMS_COLUMNS = ["kappa", "kappa_raw", "kappa_hat", "kappa_bar"]

EXIT_SUCCESS = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_FAILURE = 2


def load_config(args: Any) -> ExperimentConfig:
    """Loads configuration from yaml and applies the global overrides."""
    config = ExperimentConfig.from_yaml(args.input)
    config.override(seed=args.seed, out_dir=args.out_dir, threads=args.threads)
    return config


def _seed(args: Any) -> int:
    return 0 if args.seed is None else args.seed


def _output_path(args: Any, default_name: str) -> str:
    path = args.output or os.path.join(args.out_dir or ".", default_name)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    return path


def _problem_source(args: Any) -> Tuple[ProblemSource, float, List[float], float]:
    """Reads the problem from `--input` or `--dataset`.

    Returns the source, the ridge parameter (`--lambda` wins over the config), the configured
    lambda grid (empty with `--lambda` or `--dataset`) and the tolerance for reference solutions.
    """
    reference_tol = REFERENCE_TOL
    grid: List[float] = []
    if args.input:
        config = ExperimentConfig.from_yaml(args.input)
        source, lam, grid = config.problem, config.lam, list(config.lambdas)
        if config.reference.kind == "compute_via_newton":
            reference_tol = config.reference.tol
    elif args.dataset:
        dataset = DatasetSource(
            path=args.dataset,
            data_format=args.format,
            label_threshold=args.label_threshold,
            normalize_columns=not args.no_normalize,
            add_intercept=not args.no_intercept,
        )
        source, lam = ProblemSource(args.loss, dataset=dataset), DEFAULT_LAMBDA
    else:
        raise ConfigurationError("Either --input or --dataset is required")

    if args.lam is not None:
        lam, grid = args.lam, []
    return source, lam, grid, reference_tol


def load_problem(args: Any) -> Tuple[GlmProblem, float]:
    """Builds the problem from `--input` or `--dataset`; `--lambda` overrides the ridge parameter.

    Returns the problem and the tolerance for its reference solution.
    """
    source, lam, _, reference_tol = _problem_source(args)
    problem, _ = build_problem(source, lam)
    return problem, reference_tol


def _point(args: Any, problem: GlmProblem, reference_tol: float) -> np.ndarray:
    if args.at == "reference":
        w_star, _ = solve_reference(problem, tol=reference_tol)
        return w_star
    return np.zeros(problem.d)


def cmd_run(args: Any) -> int:
    """Runs every (method, seed) cell of the experiment."""
    config = load_config(args)
    with ExperimentLauncher(config) as launcher:
        results = launcher.run_all()

        for (name, seed), result in sorted(results.items()):
            if result.status:
                final = result.trace.last
                error = "n/a" if final.rel_err is None else f"{final.rel_err:.3e}"
                iterations = len(result.trace) - 1
                print(f"Method {name} seed {seed} -> run status: {result.status} ({iterations} iters, rel_err {error})")
            else:
                print(f"Method {name} seed {seed} -> run status: {result.status}, with error: {result.description}")

        print(f"Results -> write status: {launcher.output_dir}")
        return EXIT_SUCCESS if launcher.run_state.all_succeeded() else EXIT_RUNTIME_FAILURE


def cmd_sweep(args: Any) -> int:
    """Runs the budget sweep of every sub-sampled Newton method, then the lambda sweep if `lambdas` is set."""
    config = load_config(args)
    with ExperimentLauncher(config) as launcher:
        rows = launcher.sweep()
        best = best_budgets(rows)

        for name in config.methods:
            for seed in config.seeds:
                row = best.get((name, seed))
                if row is not None:
                    print(f"Method {name} seed {seed} -> sweep best budget: {row.budget} ({row.time_to_third_s:.3f} s)")
                elif any(other.method == name for other in rows):
                    print(f"Method {name} seed {seed} -> sweep best budget: target not reached")

        print(f"Sweep -> write status: {os.path.join(launcher.output_dir, 'sweep.csv')}")

        if config.lambdas:
            for lambda_row in launcher.lambda_sweep():
                if lambda_row.time_to_target_s is None:
                    timing = "target not reached"
                else:
                    timing = f"{lambda_row.time_to_target_s:.3f} s"
                print(
                    f"Lambda {lambda_row.lam:g} method {lambda_row.method} -> sweep best budget: "
                    f"{lambda_row.best_budget} ({timing}, kappa_hat {lambda_row.numbers.kappa_hat:.6g})"
                )
            print(f"Lambda sweep -> write status: {os.path.join(launcher.output_dir, 'lambda_sweep.csv')}")
    return EXIT_SUCCESS


def cmd_synth(args: Any) -> int:
    """Writes the synthetic problem of the config to a data file."""
    config = load_config(args)
    spec = config.problem.synthetic
    if spec is None:
        raise ConfigurationError("Command 'synth' needs a 'problem.synthetic' section")

    dataset = generate(spec)
    path = _output_path(args, f"synthetic.{'txt' if args.format == 'libsvm' else 'csv'}")
    if args.format == "libsvm":
        write_libsvm(path, dataset.x, dataset.y)
    else:
        write_csv(path, dataset.x, dataset.y)

    print(f"Synthetic problem {spec} -> write status: {path}")
    return EXIT_SUCCESS


def cmd_levscores(args: Any) -> int:
    """Writes the block partial leverage scores at the chosen point."""
    problem, reference_tol = load_problem(args)
    factorization = problem.hessian_factorization(_point(args, problem, reference_tol))
    if args.mode == "fast":
        scores = fast_block_partial_leverage_scores(
            factorization.a,
            factorization.q,
            sketch_rows=args.sketch_rows or SKETCH_FACTOR * problem.d,
            seed=_seed(args),
        )
    else:
        scores = exact_block_partial_leverage_scores(factorization.a, factorization.q)

    path = _output_path(args, "levscores.csv")
    with open(path, "w", newline="") as scores_file:
        writer = csv.writer(scores_file)
        writer.writerow(["block", "tau"])
        for block, tau in enumerate(scores.tau):
            writer.writerow([block, repr(float(tau))])

    size = sampling_size_leverage(scores.total(), problem.d, args.eps, args.delta)
    print(f"Leverage scores ({args.mode}) -> sum: {scores.total():.6g}, coherence: {coherence(scores):.6g}")
    print(f"Sampling size at eps={args.eps}, delta={args.delta} -> {size} blocks")
    print(f"Leverage scores -> write status: {path}")
    return EXIT_SUCCESS


def cmd_certify(args: Any) -> int:
    """Measures both approximation conditions over repeated draws at a fixed point."""
    problem, reference_tol = load_problem(args)
    factorization = problem.hessian_factorization(_point(args, problem, reference_tol))
    a, q = factorization.a, factorization.q

    scores = exact_block_partial_leverage_scores(a, q) if args.scheme == "block_partial_leverage" else None
    budget = resolve_budget(args.budget if not args.budget.isdigit() else int(args.budget), problem.d)
    if budget is None:
        budget = scheme_sampling_size(args.scheme, a, q, args.eps, args.delta, scores)

    result = certify_sampling(a, q, args.scheme, budget, args.trials, args.eps, args.delta, _seed(args), scores)
    path = _output_path(args, "certify.json")
    write_json(path, result.to_dict())

    print(f"Scheme {args.scheme} with s={budget} -> condition C1 success: {result.success_c1:.3f}")
    print(f"Scheme {args.scheme} with s={budget} -> condition C2 success: {result.success_c2:.3f}")
    print(f"Certification report -> write status: {path}")
    return EXIT_SUCCESS


def _condition_report(problem: GlmProblem, reference_tol: float, label: str = "") -> Dict[str, Any]:
    w_star, _ = solve_reference(problem, tol=reference_tol)

    report: Dict[str, Any] = dict()
    for name, point in (("w_star", w_star), ("w0", np.zeros(problem.d))):
        factorization = problem.hessian_factorization(point)
        numbers = condition_numbers_from_factor(factorization.a, factorization.q)
        report[name] = numbers.to_dict()
        print(
            f"Condition numbers at {name}{label} -> kappa: {numbers.kappa:.6g}, kappa_raw: {numbers.kappa_raw:.6g}, "
            f"kappa_hat: {numbers.kappa_hat:.6g}, kappa_bar: {numbers.kappa_bar:.6g}"
        )
    return report


def cmd_condnums(args: Any) -> int:
    """Reports the condition numbers at the reference solution and at zero.

    With a `lambdas` grid in the config every ridge parameter gets its own entry, and a CSV next to
    the JSON report lists the values at the reference solution per lambda.
    """
    source, lam, grid, reference_tol = _problem_source(args)
    problem, _ = build_problem(source, grid[0] if grid else lam)
    path = _output_path(args, "condnums.json")

    if not grid:
        write_json(path, _condition_report(problem, reference_tol))
        print(f"Condition numbers -> write status: {path}")
        return EXIT_SUCCESS

    entries = [
        {"lambda": value, **_condition_report(problem.with_lambda(value), reference_tol, f" (lambda {value:g})")}
        for value in grid
    ]
    write_json(path, {"lambdas": entries})
    csv_path = os.path.splitext(path)[0] + ".csv"
    with open(csv_path, "w", newline="") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(["lambda"] + CONDNUMS_COLUMNS)
        for entry in entries:
            writer.writerow([repr(entry["lambda"])] + [str(entry["w_star"][key]) for key in CONDNUMS_COLUMNS])
    print(f"Condition numbers -> write status: {path}, {csv_path}")
    return EXIT_SUCCESS


COMMANDS: Dict[str, Callable[[Any], int]] = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
    "levscores": cmd_levscores,
    "certify": cmd_certify,
    "condnums": cmd_condnums,
}


def main(args: Any) -> int:
    """Runs the requested command and returns the process exit code."""
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )

    try:
        # Declare optimizer plugins
        for plugin in args.optimizer_plugins or []:
            try:
                name, class_path = plugin.split("=")
            except ValueError:
                raise ConfigurationError("Optimizer plugins must be provided in format `name=module.Class`")
            ExperimentConfig.declare_optimizer(name, import_optimizer_class(class_path))

        return COMMANDS[args.command](args)
    except (NumericalError, OptimizerError, EmptySampleError, DegenerateInputError, RankDeficientError) as error:
        print(f"Command {args.command} -> status: fail, with error: {error}")
        return EXIT_RUNTIME_FAILURE
    except (ConfigurationError, DatasetLoadError, yaml.YAMLError, OSError, ValueError) as error:
        print(f"Command {args.command} -> status: invalid input, with error: {error}")
        return EXIT_CONFIG_ERROR
