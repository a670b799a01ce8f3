"""vpal command line module.

``vpal <command> [options]`` with the commands simulate, solve, compare, scale, grid and
stream. Options left out take their defaults from :py:class:`vpal.config.Config`;
``--config FILE`` reads ``key=value`` lines that override the options given on the command
line.

Exit status: 0 on success, 2 when a solver diverged, 1 on usage or I/O errors.

This module provides:
- build_parser
- read_config_file
- main
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import TYPE_CHECKING, Any, Callable

from . import experiments
from .experiments import AXES, COMMANDS, SOLVERS, ExperimentConfig
from .simulate import MESH_KINDS, read_meta
from .solver import STEP_MODES

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DIVERGED = 2

# Spellings accepted in config files besides the option names
_ALIASES = {"lambda": "lam", "out": "outdir", "max-iter": "max_iter"}


class UsageError(ValueError):
    """Invalid command line or config file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _list_of(convert: Callable[[str], Any]) -> Callable[[str], list[Any]]:
    def parse(text: str) -> list[Any]:
        return [convert(v.strip()) for v in text.split(",") if v.strip()]

    return parse


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    msg = f"not a boolean: {text!r}"
    raise ValueError(msg)


def _add_dataset_options(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument("--data", required=required, help="dataset directory written by 'vpal simulate'")
    p.add_argument("--leadfield", help="matrix file (.dmat or .csv) replacing the dataset lead field")


def _add_generator_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("dataset generation")
    g.add_argument("--kind", choices=MESH_KINDS, help="mesh kind")
    g.add_argument("--n", type=int, help="target node count")
    g.add_argument("--T", dest="T", type=int, help="number of time points")
    g.add_argument("--sensors", type=int, help="number of sensors")
    g.add_argument("--sources", type=int, help="number of active sources")
    g.add_argument("--noise", type=float, help="relative noise level")


def _add_solver_options(p: argparse.ArgumentParser, overlap: bool = True) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--lambda", dest="lam", type=float, help="time regularization weight")
    g.add_argument("--mu", type=float, help="sparsity weight")
    g.add_argument("--eta", type=float, help="augmented Lagrangian penalty")
    g.add_argument("--tol", type=float, help="relative tolerance")
    g.add_argument("--max-iter", dest="max_iter", type=int, help="maximum outer iterations")
    g.add_argument("--lipschitz", type=float, help="FISTA Lipschitz estimate")
    g.add_argument("--step-mode", dest="step_mode", choices=STEP_MODES, help="VPAL step rule")
    g.add_argument("--w", type=int, help="window width of windowed VPAL")
    if overlap:
        g.add_argument("--overlap", type=int, help="window overlap of windowed VPAL")
    g.add_argument("--admm-max-n", dest="admm_max_n", type=int, help="largest mesh ADMM accepts")
    g.add_argument("--time-limit", dest="time_limit", type=float, help="wall-clock limit per run, seconds")


def _add_experiment_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment")
    g.add_argument("--solvers", type=_list_of(str), help=f"comma-separated subset of {','.join(SOLVERS)}")
    g.add_argument("--trials", type=int, help="trials with distinct seeds")
    g.add_argument("--workers", type=int, help="worker threads for independent cells")


def build_parser() -> argparse.ArgumentParser:
    """The argument parser of the ``vpal`` command."""
    common = _Parser(add_help=False)
    common.add_argument("--config", help="file of key=value lines overriding the options")
    common.add_argument("--out", dest="outdir", help="output directory")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    common.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")

    parser = _Parser(prog="vpal", description="Graph-regularized elastic-net EEG source reconstruction experiments.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic dataset")
    _add_generator_options(p)
    p.add_argument("--leadfield", help="matrix file (.dmat or .csv) used instead of a generated lead field")

    p = sub.add_parser("solve", parents=[common], help="run one solver on a dataset")
    _add_dataset_options(p)
    _add_generator_options(p)
    _add_solver_options(p)
    p.add_argument("--solver", dest="solvers", type=_list_of(str), help=f"one of {','.join(SOLVERS)}")

    p = sub.add_parser("compare", parents=[common], help="compare all solvers on one dataset configuration")
    _add_dataset_options(p)
    _add_generator_options(p)
    _add_solver_options(p)
    _add_experiment_options(p)

    p = sub.add_parser("scale", parents=[common], help="runtime sweep over n or T")
    _add_generator_options(p)
    _add_solver_options(p)
    _add_experiment_options(p)
    p.add_argument("--axis", choices=AXES, help="sweep axis")
    p.add_argument("--sizes", type=_list_of(int), help="comma-separated node counts of the n sweep")
    p.add_argument("--times", type=_list_of(int), help="comma-separated time point counts of the T sweep")

    p = sub.add_parser("grid", parents=[common], help="grid search over mu and lambda")
    _add_dataset_options(p)
    _add_generator_options(p)
    _add_solver_options(p)
    _add_experiment_options(p)
    p.add_argument("--grid-size", dest="grid_size", type=int, help="grid points per axis")
    p.add_argument("--grid-min", dest="grid_min", type=float, help="smallest nonzero grid value")
    p.add_argument("--grid-max", dest="grid_max", type=float, help="largest grid value")
    p.add_argument("--grid-zero", dest="grid_zero", action="store_const", const=True, help="add a zero row and column")

    p = sub.add_parser("stream", parents=[common], help="reconstruct data columns read from standard input")
    _add_dataset_options(p, required=True)
    # one new time point per window; the overlap is always w
    _add_solver_options(p, overlap=False)

    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:  # noqa: SLF001
        if isinstance(action, argparse._SubParsersAction):  # noqa: SLF001
            return action.choices[command]
    msg = f"No subcommand {command}"
    raise KeyError(msg)


def read_config_file(path: str, parser: argparse.ArgumentParser) -> dict[str, Any]:
    """Read ``key=value`` lines and convert every value like its option.

    Keys are option names without the leading dashes (``max-iter`` or ``max_iter``);
    ``lambda`` and ``out`` are accepted as well.

    Raises:
        UsageError: A key is not an option of the command, or a value does not convert.
        OSError: The file cannot be read.
    """
    actions = {a.dest: a for a in parser._actions if a.dest not in ("help", "config", "verbose", "quiet")}  # noqa: SLF001
    values = {}
    for raw_key, text in read_meta(path).items():
        key = _ALIASES.get(raw_key, raw_key.replace("-", "_"))
        action = actions.get(key)
        if action is None:
            msg = f"{path}: unknown key '{raw_key}'"
            raise UsageError(msg)
        try:
            if action.const is True:
                value = _bool(text)
            elif action.type is not None:
                value = action.type(text)  # type: ignore[operator]
            else:
                value = text
        except ValueError as e:
            msg = f"{path}: bad value for '{raw_key}': {e}"
            raise UsageError(msg) from e
        if action.choices is not None and value not in action.choices:
            msg = f"{path}: '{raw_key}' must be one of {', '.join(map(str, action.choices))}"
            raise UsageError(msg)
        values[key] = value
    return values


def experiment_config(parser: argparse.ArgumentParser, args: argparse.Namespace) -> ExperimentConfig:
    """Merge command line options and the config file into an :py:class:`ExperimentConfig`."""
    options = {k: v for k, v in vars(args).items() if k in ExperimentConfig.FIELDS and v is not None}
    if args.config is not None:
        options.update(read_config_file(args.config, _subparser(parser, args.command)))
    return ExperimentConfig(**options)


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")


def _simulate(exp: ExperimentConfig) -> int:
    ds = experiments.run_simulate(exp)
    logger.info("simulate: wrote %r to %s", ds, exp.outdir)
    return EXIT_OK


def _solve(exp: ExperimentConfig) -> int:
    result = experiments.run_solve(exp)
    if result.status == "error":
        logger.error("solve: %s", result.error)
        return EXIT_ERROR
    return EXIT_DIVERGED if result.status == "diverged" else EXIT_OK


def _compare(exp: ExperimentConfig) -> int:
    results = experiments.run_compare(exp)
    diverged = sorted({name for (name, _), r in results.items() if r.status == "diverged"})
    if diverged:
        logger.warning("compare: diverged: %s", ", ".join(diverged))
        return EXIT_DIVERGED
    return EXIT_OK


def _scale(exp: ExperimentConfig) -> int:
    experiments.run_scale(exp)
    return EXIT_OK


def _grid(exp: ExperimentConfig) -> int:
    experiments.run_grid(exp)
    return EXIT_OK


def _stream(exp: ExperimentConfig) -> int:
    stream = experiments.run_stream(exp, sys.stdin, sys.stdout)
    return EXIT_DIVERGED if any(r.diverged for r in stream.reports) else EXIT_OK


_RUNNERS: dict[str, Callable[[ExperimentConfig], int]] = {
    "simulate": _simulate,
    "solve": _solve,
    "compare": _compare,
    "scale": _scale,
    "grid": _grid,
    "stream": _stream,
}
assert set(_RUNNERS) == set(COMMANDS)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the ``vpal`` command.

    Arguments:
        argv (list, optional): Arguments without the program name; default ``sys.argv[1:]``.

    Returns:
        int: Exit status.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _configure_logging(args.verbose, args.quiet)
        exp = experiment_config(parser, args)
        return _RUNNERS[args.command](exp)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"vpal: error: {e}\n")
        return EXIT_ERROR
    except (ValueError, OSError) as e:
        logger.error("%s", e)  # noqa: TRY400
        return EXIT_ERROR
