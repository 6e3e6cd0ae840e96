"""CLI for the sub-sampled Newton benchmark"""
import argparse
import sys

from .datasets import FORMATS
from .glm import LOSSES
from .main import main as bench_main
from .optimizers.ssn import LEVERAGE_MODES
from .sampling import SCHEMES


def _add_problem_arguments(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("-i", "--input", type=str, help="A path to yaml experiment config with a 'problem' section")
    source.add_argument("--dataset", type=str, help="A path to a dataset file")

    parser.add_argument("--format", type=str, choices=FORMATS, default="libsvm", help="Dataset file format")
    parser.add_argument("--loss", type=str, choices=LOSSES, default="logistic", help="Loss of the problem")
    parser.add_argument("--label-threshold", type=float, help="Binarize labels as `label > threshold`")
    parser.add_argument("--no-normalize", action="store_true", help="Do not scale columns to unit norm")
    parser.add_argument("--no-intercept", action="store_true", help="Do not append an all-ones column")
    parser.add_argument("--lambda", dest="lam", type=float, help="Ridge parameter, overrides the config value")
    parser.add_argument("-o", "--output", type=str, help="A path to the output file")


def _add_point_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--at",
        type=str,
        choices=["zero", "reference"],
        default="zero",
        help="Point of the Hessian: the zero vector or the Newton reference solution",
    )


def build_parser() -> argparse.ArgumentParser:
    """Builds the argument parser with all subcommands."""
    parser = argparse.ArgumentParser(prog="ssn_bench", description="Sub-sampled Newton benchmark")

    parser.add_argument("--seed", type=int, help="Single seed replacing the configured seeds")
    parser.add_argument("--out-dir", type=str, help="Output directory replacing the configured one")
    parser.add_argument("--threads", type=int, help="Number of cells run in parallel")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log progress messages")
    parser.add_argument(
        "--optimizer-plugins",
        type=str,
        nargs="+",
        help="""
        Additional optimizers, e.g. `--optimizer-plugins my_method=your_module.YourOptimizer`
        Values will be imported and treated like Optimizer, so ensure that module with optimizer is in `sys.path`.
        """,
        required=False,
    )

    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("run", "Run every method and seed of an experiment"),
        ("sweep", "Run the budget sweep of the sub-sampled Newton methods, and the lambda sweep when configured"),
    ):
        command = commands.add_parser(name, help=help_text)
        command.add_argument("-i", "--input", type=str, help="A path to yaml experiment config", required=True)

    synth = commands.add_parser("synth", help="Write the configured synthetic problem to a data file")
    synth.add_argument("-i", "--input", type=str, help="A path to yaml experiment config", required=True)
    synth.add_argument("--format", type=str, choices=FORMATS, default="libsvm", help="Output file format")
    synth.add_argument("-o", "--output", type=str, help="A path to the output file")

    levscores = commands.add_parser("levscores", help="Compute block partial leverage scores")
    _add_problem_arguments(levscores)
    _add_point_argument(levscores)
    levscores.add_argument("--mode", type=str, choices=LEVERAGE_MODES, default="exact", help="Exact or sketched")
    levscores.add_argument("--sketch-rows", type=int, help="Rows of the sparse embedding in the fast mode")
    levscores.add_argument("--eps", type=float, default=0.5, help="Accuracy of the reported sampling size")
    levscores.add_argument("--delta", type=float, default=0.1, help="Failure probability of the sampling size")

    certify = commands.add_parser("certify", help="Measure how often sampled Hessians meet the accuracy conditions")
    _add_problem_arguments(certify)
    _add_point_argument(certify)
    certify.add_argument("--scheme", type=str, choices=SCHEMES, default="block_partial_leverage")
    certify.add_argument("--budget", type=str, default="auto", help="Blocks to sample: integer, `<k>d` or `auto`")
    certify.add_argument("--trials", type=int, default=200, help="Number of independent draws")
    certify.add_argument("--eps", type=float, default=0.5, help="Accuracy threshold")
    certify.add_argument("--delta", type=float, default=0.1, help="Allowed failure probability")

    condnums = commands.add_parser(
        "condnums", help="Report condition numbers at the reference solution and zero for every configured lambda"
    )
    _add_problem_arguments(condnums)

    return parser


def run_cli() -> None:
    """Parses arguments and runs the application."""
    args = build_parser().parse_args()
    sys.exit(bench_main(args))
