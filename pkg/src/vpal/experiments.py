"""vpal experiments module.

Experiment drivers behind the command line: dataset simulation, single solves, the solver
comparison, runtime scaling over n or T, the (mu, lambda) grid search and streaming
reconstruction. Each driver writes its files with :py:func:`vpal.report.emit_report` and a
``manifest.txt``.

Independent cells (solver, trial, grid point) may run on worker threads; results are
keyed by cell coordinates, so the output does not depend on completion order.

This module provides:
- ExperimentConfig
- CellResult
- SOLVERS
- run_simulate
- run_solve
- run_compare
- run_scale
- run_grid
- run_stream
"""

from __future__ import annotations

import logging
import math
import time
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable, Literal, TypeVar, Union

import numpy as np
from joblib import Parallel, delayed

from .admm import ADMM
from .config import Config
from .fista import FISTA
from .matrix_io import load_matrix, save_dmat
from .metrics import METRIC_COLUMNS, MetricReport, evaluate
from .report import Heatmap, LinePlot, ReportBundle, emit_report, write_manifest
from .simulate import MESH_KINDS, Dataset, SourceSpec, load_dataset, make_dataset
from .sloreta import SLORETA
from .solver import REPORT_CSV_COLUMNS, SolveReport, SolverConfig
from .vpal import VPAL
from .windowed import StreamReconstructor, make_windows, vpal_windowed_solve

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence
    from typing import TextIO

    from .problem import Problem

logger = logging.getLogger(__name__)

PathT = Union[str, Path]
CommandT = Literal["simulate", "solve", "compare", "scale", "grid", "stream"]
AxisT = Literal["n", "T"]
K = TypeVar("K")
R = TypeVar("R")

COMMANDS = ("simulate", "solve", "compare", "scale", "grid", "stream")
AXES = ("n", "T")

DEFAULT_SIZES = (200, 1000, 2000)
DEFAULT_TIMES = tuple(range(10, 101, 10))

# Worst first; a row of several trials reports the worst status
_STATUS_ORDER = ("error", "diverged", "intractable", "timeout", "max_iter", "converged")


def _run_sloreta(problem: Problem, cfg: SolverConfig, X_true: np.ndarray | None, exp: ExperimentConfig) -> SolveReport:  # noqa: ARG001
    return SLORETA(cfg)(problem, X_true=X_true)


def _run_admm(problem: Problem, cfg: SolverConfig, X_true: np.ndarray | None, exp: ExperimentConfig) -> SolveReport:  # noqa: ARG001
    return ADMM(cfg)(problem, X_true=X_true)


def _run_fista(problem: Problem, cfg: SolverConfig, X_true: np.ndarray | None, exp: ExperimentConfig) -> SolveReport:  # noqa: ARG001
    return FISTA(cfg)(problem, X_true=X_true)


def _run_vpal(problem: Problem, cfg: SolverConfig, X_true: np.ndarray | None, exp: ExperimentConfig) -> SolveReport:  # noqa: ARG001
    return VPAL(cfg)(problem, X_true=X_true)


def _run_vpalw(problem: Problem, cfg: SolverConfig, X_true: np.ndarray | None, exp: ExperimentConfig) -> SolveReport:
    sched = make_windows(problem.num_times, exp.w, exp.overlap)
    cfg_loop = cfg.replace(max_iter=min(cfg.max_iter, Config.loop_max_iter))
    return vpal_windowed_solve(problem, sched, cfg, cfg_loop, X_true)


SolverFnT = Callable[[Any, SolverConfig, Union[np.ndarray, None], "ExperimentConfig"], SolveReport]

SOLVERS: dict[str, SolverFnT] = {
    "sloreta": _run_sloreta,
    "admm": _run_admm,
    "fista": _run_fista,
    "vpal": _run_vpal,
    "vpalw": _run_vpalw,
}
"""Solver runners by command-line name, in report order."""

_DEFAULT_SOLVERS: dict[str, tuple[str, ...]] = {
    "simulate": (),
    "solve": ("vpal",),
    "compare": tuple(SOLVERS),
    "scale_n": ("admm", "vpal", "vpalw"),
    "scale_T": ("vpal", "vpalw"),
    "grid": ("admm", "fista", "vpal"),
    "stream": ("vpalw",),
}


class ExperimentConfig:
    """Settings of one experiment run.

    Every keyword argument left as None takes its value from :py:class:`vpal.config.Config`.

    Examples: ::

        exp = ExperimentConfig('compare', n=1000, T=20, trials=3, outdir='out/compare')
        run_compare(exp)
    """

    FIELDS = (
        "command",
        "data",
        "leadfield",
        "outdir",
        "solvers",
        "trials",
        "seed",
        "kind",
        "n",
        "T",
        "sensors",
        "sources",
        "noise",
        "lam",
        "mu",
        "eta",
        "tol",
        "max_iter",
        "lipschitz",
        "step_mode",
        "w",
        "overlap",
        "admm_max_n",
        "time_limit",
        "workers",
        "axis",
        "sizes",
        "times",
        "grid_size",
        "grid_min",
        "grid_max",
        "grid_zero",
    )

    def __init__(  # noqa: PLR0913, PLR0915
        self,
        command: CommandT = "compare",
        data: PathT | None = None,
        leadfield: PathT | None = None,
        outdir: PathT = "results",
        solvers: Sequence[str] | None = None,
        trials: int = 3,
        seed: int = 0,
        kind: str = "grid2d",
        n: int = 200,
        T: int = 20,
        sensors: int | None = None,
        sources: int = 1,
        noise: float = 0.1,
        lam: float | None = None,
        mu: float | None = None,
        eta: float | None = None,
        tol: float | None = None,
        max_iter: int | None = None,
        lipschitz: float | None = None,
        step_mode: str | None = None,
        w: int = 1,
        overlap: int = 1,
        admm_max_n: int | None = None,
        time_limit: float | None = None,
        workers: int | None = None,
        axis: AxisT = "T",
        sizes: Sequence[int] | None = None,
        times: Sequence[int] | None = None,
        grid_size: int = 8,
        grid_min: float = 1e-5,
        grid_max: float = 1e2,
        grid_zero: bool = False,
    ) -> None:
        """Constructor.

        Keyword Arguments:
            command (string, optional): 'simulate', 'solve', 'compare', 'scale', 'grid' or 'stream'.
            data (string or Path, optional): Dataset directory; when None, datasets are generated.
            leadfield (string or Path, optional): Matrix file replacing the lead field of the dataset.
            outdir (string or Path, optional): Output directory.
            solvers (list, optional): Solver names from :py:data:`SOLVERS`; default depends on the command.
            trials (int, optional): Repetitions with distinct seeds, >= 1.
            seed (int, optional): Seed of the first trial; trial ``k`` uses ``seed + k``.
            kind (string, optional): Mesh kind of generated datasets.
            n (int, optional): Node count of generated datasets.
            T (int, optional): Time points of generated datasets.
            sensors (int, optional): Sensors of generated datasets.
            sources (int, optional): Active sources of generated datasets.
            noise (float, optional): Relative noise level of generated datasets.
            lam (float, optional): Time regularization weight.
            mu (float, optional): Sparsity weight.
            eta (float, optional): Penalty parameter.
            tol (float, optional): Relative tolerance.
            max_iter (int, optional): Maximum outer iterations.
            lipschitz (float, optional): FISTA Lipschitz estimate.
            step_mode (string, optional): VPAL step rule.
            w (int, optional): Window width of windowed VPAL.
            overlap (int, optional): Window overlap of windowed VPAL, ``<= w``.
            admm_max_n (int, optional): Largest mesh ADMM accepts.
            time_limit (float, optional): Wall-clock limit per cell, seconds;
                default :py:attr:`vpal.config.Config.cell_time_limit`.
            workers (int, optional): Worker threads for independent cells.
            axis (string, optional): Scaling axis, 'n' or 'T'.
            sizes (list, optional): Node counts of the n sweep.
            times (list, optional): Time point counts of the T sweep.
            grid_size (int, optional): Grid points per axis of the grid search.
            grid_min (float, optional): Smallest nonzero grid value.
            grid_max (float, optional): Largest grid value.
            grid_zero (bool, optional): Prepend a zero row and column to the grid.

        Raises:
            ValueError: A setting is out of range or a dataset path does not exist.
        """
        self.command = command
        self.data = None if data is None else Path(data)
        self.leadfield = None if leadfield is None else Path(leadfield)
        self.outdir = Path(outdir)
        self.trials = int(trials)
        self.seed = int(seed)
        self.kind = kind
        self.n = int(n)
        self.T = int(T)
        self.sensors = int(Config.sensors if sensors is None else sensors)
        self.sources = int(sources)
        self.noise = float(noise)
        self.lam = float(Config.lam if lam is None else lam)
        self.mu = float(Config.mu if mu is None else mu)
        self.eta = float(Config.eta if eta is None else eta)
        self.tol = float(Config.tol if tol is None else tol)
        self.max_iter = int(Config.max_iter if max_iter is None else max_iter)
        self.lipschitz = float(Config.lipschitz if lipschitz is None else lipschitz)
        self.step_mode = Config.step_mode if step_mode is None else step_mode
        self.w = int(w)
        self.overlap = int(overlap)
        self.admm_max_n = int(Config.admm_max_n if admm_max_n is None else admm_max_n)
        self.time_limit = float(Config.cell_time_limit if time_limit is None else time_limit)
        self.workers = int(Config.workers if workers is None else workers)
        self.axis = axis
        self.sizes = tuple(int(v) for v in (DEFAULT_SIZES if sizes is None else sizes))
        self.times = tuple(int(v) for v in (DEFAULT_TIMES if times is None else times))
        self.grid_size = int(grid_size)
        self.grid_min = float(grid_min)
        self.grid_max = float(grid_max)
        self.grid_zero = bool(grid_zero)

        default_key = f"scale_{axis}" if command == "scale" else command
        self.solvers = tuple(_DEFAULT_SOLVERS.get(default_key, ()) if solvers is None else solvers)
        self._validate()

    def _validate(self) -> None:  # noqa: C901, PLR0912
        if self.command not in COMMANDS:
            msg = f"command must be one of {', '.join(COMMANDS)}"
            raise ValueError(msg)
        unknown = [s for s in self.solvers if s not in SOLVERS]
        if unknown:
            msg = f"Unknown solvers: {', '.join(unknown)}; choose from {', '.join(SOLVERS)}"
            raise ValueError(msg)
        if self.trials < 1:
            msg = "trials must be at least 1"
            raise ValueError(msg)
        if self.kind not in MESH_KINDS:
            msg = f"kind must be one of {', '.join(MESH_KINDS)}"
            raise ValueError(msg)
        if self.axis not in AXES:
            msg = "axis must be 'n' or 'T'"
            raise ValueError(msg)
        if self.workers < 1:
            msg = "workers must be at least 1"
            raise ValueError(msg)
        if self.grid_size < 1 or not 0 < self.grid_min <= self.grid_max:
            msg = "Grid needs grid_size >= 1 and 0 < grid_min <= grid_max"
            raise ValueError(msg)
        if self.noise < 0:
            msg = "noise must be non-negative"
            raise ValueError(msg)
        for name in ("data", "leadfield"):
            path = getattr(self, name)
            if path is not None and not path.exists():
                msg = f"{name} path does not exist: {path}"
                raise ValueError(msg)
        if self.data is not None and self.outdir.resolve() == self.data.resolve():
            msg = "Output directory must differ from the dataset directory"
            raise ValueError(msg)

    def __repr__(self) -> str:
        """Returns the settings as keyword arguments."""
        args = ", ".join(f"{k}={v!r}" for k, v in self.as_dict().items())
        return f"ExperimentConfig({args})"

    def as_dict(self) -> dict[str, Any]:
        """All settings by name."""
        return {name: getattr(self, name) for name in self.FIELDS}

    def replace(self, **changes) -> ExperimentConfig:
        """Return a copy with some settings changed.

        Raises:
            ValueError: Unknown setting.
        """
        unknown = set(changes) - set(self.FIELDS)
        if unknown:
            msg = f"Unknown experiment settings: {', '.join(sorted(unknown))}"
            raise ValueError(msg)
        values = self.as_dict()
        values.update(changes)
        return ExperimentConfig(**values)

    def solver_config(self, record_history: bool = True) -> SolverConfig:
        """Solver options of every cell."""
        return SolverConfig(
            tol=self.tol,
            max_iter=self.max_iter,
            lipschitz=self.lipschitz,
            step_mode=self.step_mode,
            admm_max_n=self.admm_max_n,
            time_limit=self.time_limit,
            record_history=record_history,
        )

    def source_spec(self) -> SourceSpec:
        """Activity shape of generated datasets."""
        return SourceSpec(num_sources=self.sources)


class CellResult:
    """Outcome of one solver run inside an experiment.

    Attributes:
        solver (string): Solver name.
        report (SolveReport or None): Report; None when the solver raised.
        metrics (MetricReport or None): Metrics against the ground truth, when computable.
        runtime_s (float): Wall-clock seconds of the solve call alone.
        error (string or None): Exception message of a failed run.
    """

    def __init__(
        self,
        solver: str,
        report: SolveReport | None = None,
        metrics: MetricReport | None = None,
        runtime_s: float = math.nan,
        error: str | None = None,
    ) -> None:
        """Constructor."""
        self.solver = solver
        self.report = report
        self.metrics = metrics
        self.runtime_s = runtime_s
        self.error = error

    def __repr__(self) -> str:
        """Returns a short description."""
        return f"CellResult(solver={self.solver!r}, status={self.status!r}, runtime_s={self.runtime_s:.3f})"

    @property
    def status(self) -> str:
        """'error' for a raised exception, otherwise the report termination."""
        if self.report is None:
            return "error"
        if self.report.termination != "intractable" and not np.all(np.isfinite(self.report.X)):
            return "diverged"
        return self.report.termination

    @property
    def ok(self) -> bool:
        """True if the run produced a usable estimate."""
        return self.status in ("converged", "max_iter")


def run_cell(name: str, problem: Problem, exp: ExperimentConfig, X_true: np.ndarray | None = None, record_history: bool = True) -> CellResult:
    """Run one solver on one problem; exceptions are logged and recorded, not raised.

    A run stopped by the wall-clock limit ``exp.time_limit`` is recorded as intractable.

    Arguments:
        name (string): Solver name from :py:data:`SOLVERS`.
        problem (Problem): Problem to solve.
        exp (ExperimentConfig): Experiment settings.
        X_true (ndarray, optional): Ground truth for metrics and error histories.
        record_history (bool, optional): Record residual, error and time histories.

    Returns:
        CellResult: The outcome.
    """
    cfg = exp.solver_config(record_history)
    try:
        started = time.perf_counter()
        report = SOLVERS[name](problem, cfg, X_true, exp)
        runtime = time.perf_counter() - started
    except (ValueError, ArithmeticError, MemoryError) as e:
        logger.warning("%s: run failed: %s", name, e)
        return CellResult(name, error=str(e))

    if report.termination == "timeout":
        report.termination = "intractable"
        report.note(f"no result within the {exp.time_limit:g} s cell limit")
        logger.warning("%s: cell limit of %g s reached, recorded as intractable", name, exp.time_limit)

    result = CellResult(name, report, runtime_s=runtime)
    if X_true is not None and result.ok:
        try:
            result.metrics = evaluate(report.X, X_true, problem.mesh)
        except ValueError as e:
            logger.warning("%s: metrics unavailable: %s", name, e)
    return result


def map_cells(fn: Callable[[K], R], keys: Iterable[K], workers: int = 1) -> dict[K, R]:
    """Apply ``fn`` to every key, on ``workers`` threads; the result is ordered like ``keys``."""
    keys = list(keys)
    if workers <= 1 or len(keys) <= 1:
        return {k: fn(k) for k in keys}
    values = Parallel(n_jobs=workers, prefer="threads")(delayed(fn)(k) for k in keys)
    return dict(zip(keys, values))


def _worst(statuses: Iterable[str]) -> str:
    return min(statuses, key=_STATUS_ORDER.index)


def _stats(values: Sequence[float]) -> tuple[float | None, float | None, float | None]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return None, None, None
    return float(np.mean(finite)), float(np.std(finite)), float(np.median(finite))


def _external_leadfield(exp: ExperimentConfig) -> np.ndarray | None:
    return None if exp.leadfield is None else load_matrix(exp.leadfield)


def load_or_make(exp: ExperimentConfig, trial: int = 0, n: int | None = None, T: int | None = None) -> Dataset:
    """The dataset of one trial: the configured dataset directory, or a generated one.

    Generated datasets use seed ``exp.seed + trial``; ``n`` and ``T`` override the configured sizes.
    """
    if exp.data is not None:
        return load_dataset(exp.data, exp.leadfield)
    return make_dataset(
        exp.kind,
        exp.n if n is None else n,
        exp.T if T is None else T,
        exp.sensors,
        exp.source_spec(),
        exp.noise,
        exp.seed + trial,
        _external_leadfield(exp),
    )


def _history_table(bundle: ReportBundle, name: str, report: SolveReport) -> None:
    table = bundle.table(name, REPORT_CSV_COLUMNS)
    for row in report.csv_rows():
        table.add(*row)


def _history_plots(bundle: ReportBundle, prefix: str, results: dict[str, CellResult]) -> None:
    error = LinePlot("Relative error", "time (ms)", "relative error", logy=True)
    residual = LinePlot("Relative residual", "time (ms)", "||LX - B|| / ||B||", logy=True)
    for name, result in results.items():
        report = result.report
        if report is None or not report.time_history:
            continue
        if len(report.error_history) == len(report.time_history):
            error.add(name, report.time_history, report.error_history)
        residual.add(name, report.time_history, report.residual_history)
    bundle.plots[f"{prefix}_error.svg"] = error
    bundle.plots[f"{prefix}_residual.svg"] = residual


def _finish(exp: ExperimentConfig, bundle: ReportBundle) -> list[Path]:
    written = emit_report(bundle, exp.outdir)
    written.append(write_manifest(exp.outdir, exp.command, exp.as_dict()))
    return written


def run_simulate(exp: ExperimentConfig) -> Dataset:
    """Generate one dataset and save it into ``exp.outdir``.

    Returns:
        Dataset: The dataset written.
    """
    ds = make_dataset(exp.kind, exp.n, exp.T, exp.sensors, exp.source_spec(), exp.noise, exp.seed, _external_leadfield(exp))
    ds.save(exp.outdir)
    write_manifest(exp.outdir, exp.command, exp.as_dict())
    return ds


SOLVE_COLUMNS = ("solver", "termination", "iterations", "objective", "runtime_s", *METRIC_COLUMNS)


def run_solve(exp: ExperimentConfig) -> CellResult:
    """Run the first configured solver once and write its estimate, history and metrics.

    Files: ``X.dmat``, ``solve.csv``, ``history_<solver>.csv``, ``solve_error.svg``,
    ``solve_residual.svg``, ``summary.txt`` and ``manifest.txt``.

    Raises:
        ValueError: No solver is selected.
    """
    if not exp.solvers:
        msg = "No solver selected"
        raise ValueError(msg)
    name = exp.solvers[0]
    ds = load_or_make(exp)
    result = run_cell(name, ds.problem(exp.lam, exp.mu, exp.eta), exp, ds.X_true)

    bundle = ReportBundle()
    table = bundle.table("solve.csv", SOLVE_COLUMNS)
    metrics = result.metrics.as_dict() if result.metrics is not None else dict.fromkeys(METRIC_COLUMNS)
    report = result.report
    table.add(
        name,
        result.status,
        None if report is None else report.iterations,
        None if report is None else report.objective,
        result.runtime_s,
        *metrics.values(),
    )
    if report is not None:
        _history_table(bundle, f"history_{name}.csv", report)
        _history_plots(bundle, "solve", {name: result})
        exp.outdir.mkdir(parents=True, exist_ok=True)
        if report.X.size and np.all(np.isfinite(report.X)):
            save_dmat(exp.outdir / "X.dmat", report.X)
    bundle.summary.append(f"{name}: {result.status} after {0 if report is None else report.iterations} iterations in {result.runtime_s:.3f} s")
    if report is not None:
        bundle.summary.extend(f"{name}: note: {note}" for note in report.notes)
    _finish(exp, bundle)
    return result


COMPARE_COLUMNS = (
    "solver",
    "runtime_mean_s",
    "runtime_std_s",
    "runtime_median_s",
    *METRIC_COLUMNS,
    "iterations",
    "termination",
)


def run_compare(exp: ExperimentConfig) -> dict[tuple[str, int], CellResult]:
    """Run every configured solver on ``exp.trials`` datasets and compare them.

    Files: ``compare.csv`` (one row per solver: runtime mean, std and median over trials,
    metric means, mean iterations and the worst termination), ``history_<solver>.csv`` and the
    error and residual plots of the first trial, ``summary.txt`` and ``manifest.txt``.

    Returns:
        dict: Cell results keyed by ``(solver, trial)``.
    """
    datasets = map_cells(lambda trial: load_or_make(exp, trial), range(exp.trials), exp.workers)

    def cell(key: tuple[str, int]) -> CellResult:
        name, trial = key
        ds = datasets[trial]
        return run_cell(name, ds.problem(exp.lam, exp.mu, exp.eta), exp, ds.X_true)

    keys = [(name, trial) for name in exp.solvers for trial in range(exp.trials)]
    results = map_cells(cell, keys, exp.workers)

    bundle = ReportBundle()
    table = bundle.table("compare.csv", COMPARE_COLUMNS)
    for name in exp.solvers:
        cells = [results[name, trial] for trial in range(exp.trials)]
        runtime = _stats([c.runtime_s for c in cells if c.ok])
        measured = [c.metrics.as_dict() for c in cells if c.metrics is not None]
        metric_means = [float(np.mean([m[col] for m in measured])) if measured else None for col in METRIC_COLUMNS]
        iterations = [c.report.iterations for c in cells if c.report is not None]
        status = _worst(c.status for c in cells)
        table.add(name, *runtime, *metric_means, float(np.mean(iterations)) if iterations else None, status)

        first = cells[0]
        if first.report is not None:
            _history_table(bundle, f"history_{name}.csv", first.report)
        mean_s = "n/a" if runtime[0] is None else f"{runtime[0]:.3f} s"
        re = "n/a" if metric_means[1] is None else f"{metric_means[1]:.4g}"
        bundle.summary.append(f"{name}: {status}, runtime {mean_s}, relative error {re}")

    _history_plots(bundle, "compare", {name: results[name, 0] for name in exp.solvers})
    _finish(exp, bundle)
    return results


SCALE_COLUMNS = (
    "solver",
    "axis",
    "value",
    "trials",
    "runtime_mean_s",
    "runtime_std_s",
    "runtime_median_s",
    "iterations_mean",
    "latency_mean_ms",
    "latency_std_ms",
    "termination",
)


def _window_latencies(result: CellResult) -> list[float]:
    if result.report is None:
        return []
    return [r.wall_time_ms["total"] for r in result.report.window_reports[1:]]


def run_scale(exp: ExperimentConfig, axis: AxisT | None = None) -> dict[tuple[str, int, int], CellResult]:
    """Runtime sweep over the node count or the number of time points.

    For ``axis='n'`` the datasets have ``exp.sizes`` nodes and ``exp.T`` time points; for
    ``axis='T'`` they have ``exp.n`` nodes and ``exp.times`` time points. ADMM reports
    meshes above ``exp.admm_max_n`` nodes as intractable. Windowed VPAL rows also carry the
    per-window latency after the first window, i.e. the cost of one new time point.

    Files: ``scale_<axis>.csv``, ``scale_<axis>.svg``, ``summary.txt`` and ``manifest.txt``.

    Returns:
        dict: Cell results keyed by ``(solver, value, trial)``.

    Raises:
        ValueError: A dataset directory is configured.
    """
    if exp.data is not None:
        msg = "Scaling sweeps generate their datasets; a dataset directory cannot be swept"
        raise ValueError(msg)
    axis = exp.axis if axis is None else axis
    values = exp.sizes if axis == "n" else exp.times

    def dataset(key: tuple[int, int]) -> Dataset:
        value, trial = key
        return load_or_make(exp, trial, n=value) if axis == "n" else load_or_make(exp, trial, T=value)

    datasets = map_cells(dataset, [(v, t) for v in values for t in range(exp.trials)], exp.workers)

    def cell(key: tuple[str, int, int]) -> CellResult:
        name, value, trial = key
        ds = datasets[value, trial]
        return run_cell(name, ds.problem(exp.lam, exp.mu, exp.eta), exp, ds.X_true, record_history=False)

    keys = [(name, v, t) for name in exp.solvers for v in values for t in range(exp.trials)]
    results = map_cells(cell, keys, exp.workers)

    bundle = ReportBundle()
    table = bundle.table(f"scale_{axis}.csv", SCALE_COLUMNS)
    plot = LinePlot(f"Runtime against {axis}", axis, "runtime (s)")
    for name in exp.solvers:
        xs, means, stds = [], [], []
        for v in values:
            cells = [results[name, v, t] for t in range(exp.trials)]
            mean, std, median = _stats([c.runtime_s for c in cells if c.ok])
            iterations = [c.report.iterations for c in cells if c.report is not None]
            latencies = [ms for c in cells for ms in _window_latencies(c)]
            lat_mean, lat_std, _ = _stats(latencies)
            status = _worst(c.status for c in cells)
            table.add(
                name,
                axis,
                v,
                exp.trials,
                mean,
                std,
                median,
                float(np.mean(iterations)) if iterations else None,
                lat_mean,
                lat_std,
                status,
            )
            if mean is not None:
                xs.append(v)
                means.append(mean)
                stds.append(std)
            if lat_mean:
                bundle.summary.append(f"{name} {axis}={v}: latency per new time point {lat_mean:.3f} +- {lat_std:.3f} ms")
            if status == "intractable":
                bundle.summary.append(f"{name} {axis}={v}: intractable")
        plot.add(name, xs, means, stds)
    bundle.plots[f"scale_{axis}.svg"] = plot

    _finish(exp, bundle)
    return results


def grid_values(exp: ExperimentConfig) -> list[float]:
    """Log-spaced grid over ``[grid_min, grid_max]``, with a leading zero if ``grid_zero``.

    Examples: ::

        >>> grid_values(ExperimentConfig('grid', grid_size=3, grid_min=1e-2, grid_max=1.0, grid_zero=True))
        [0.0, 0.01, 0.1, 1.0]
    """
    points = np.logspace(math.log10(exp.grid_min), math.log10(exp.grid_max), exp.grid_size)
    values = [float(v) for v in points]
    return [0.0, *values] if exp.grid_zero else values


def grid_cell_value(result: CellResult) -> float | str:
    """Relative error of a grid cell, or 'div', 'n/a' or 'error'."""
    if result.status == "error":
        return "error"
    if result.status == "intractable":
        return "n/a"
    if result.status == "diverged" or result.metrics is None or not math.isfinite(result.metrics.rel_error):
        return "div"
    return result.metrics.rel_error


def run_grid(exp: ExperimentConfig) -> dict[str, list[list[float | str]]]:
    """Brute-force search over (mu, lambda) with eta fixed.

    Every solver runs on the first trial's dataset at every grid point; the cell value is the
    final relative error, or 'div' for a diverged run.

    Files: ``grid_<solver>.csv`` (rows mu, columns lambda), ``grid_<solver>.svg``,
    ``grid_best.csv`` with the best cell per solver, ``summary.txt`` and ``manifest.txt``.

    Returns:
        dict: Per solver, the matrix of cell values indexed ``[mu][lambda]``.
    """
    values = grid_values(exp)
    ds = load_or_make(exp)

    def cell(key: tuple[str, int, int]) -> CellResult:
        name, i, j = key
        problem = ds.problem(lam=values[j], mu=values[i], eta=exp.eta)
        return run_cell(name, problem, exp, ds.X_true, record_history=False)

    size = len(values)
    keys = [(name, i, j) for name in exp.solvers for i in range(size) for j in range(size)]
    results = map_cells(cell, keys, exp.workers)

    bundle = ReportBundle()
    best = bundle.table("grid_best.csv", ("solver", "mu", "lambda", "rel_error"))
    labels = [f"{v:.0e}" for v in values]
    matrices = {}
    for name in exp.solvers:
        matrix = [[grid_cell_value(results[name, i, j]) for j in range(size)] for i in range(size)]
        matrices[name] = matrix

        table = bundle.table(f"grid_{name}.csv", ("mu\\lambda", *(repr(v) for v in values)))
        for i, row in enumerate(matrix):
            table.add(values[i], *row)
        numeric = [[v if isinstance(v, float) else None for v in row] for row in matrix]
        bundle.plots[f"grid_{name}.svg"] = Heatmap(f"{name}: relative error", numeric, labels, labels, row_name="mu", col_name="lambda")

        cells = [(v, i, j) for i, row in enumerate(numeric) for j, v in enumerate(row) if v is not None]
        if cells:
            err, i, j = min(cells)
            best.add(name, values[i], values[j], err)
            bundle.summary.append(f"{name}: best relative error {err:.4g} at mu={values[i]:.3g}, lambda={values[j]:.3g}")
        else:
            best.add(name, None, None, None)
            bundle.summary.append(f"{name}: no grid cell converged")
        diverged = sum(v == "div" for row in matrix for v in row)
        if diverged:
            bundle.summary.append(f"{name}: {diverged} diverged cells")

    _finish(exp, bundle)
    return matrices


def parse_column(line: str, lineno: int) -> np.ndarray:
    """Parse one whitespace-separated line of real numbers.

    Raises:
        ValueError: A token is not a number; the message names the line number.
    """
    try:
        return np.array([float(v) for v in line.split()], dtype=np.float64)
    except ValueError as e:
        msg = f"line {lineno}: {e}"
        raise ValueError(msg) from e


STREAM_COLUMNS = ("step", "latency_ms", "iterations", "termination")


def run_stream(exp: ExperimentConfig, source: Iterable[str], sink: TextIO) -> StreamReconstructor:
    """Reconstruct data columns read from ``source`` one time point at a time.

    Each non-blank line of ``source`` holds the p values of one data column. Reconstructed
    columns are written to ``sink`` as lines of n values as soon as they are available: the
    first ``w + 1`` together once the first window is full, then one per line read. Per-step
    timings are logged.

    Files: ``stream_latency.csv``, ``summary.txt`` and ``manifest.txt``.

    Returns:
        StreamReconstructor: The reconstructor, holding the full solution and per-step reports.

    Raises:
        ValueError: No dataset is configured, or a line is malformed or has the wrong length.
    """
    if exp.data is None:
        msg = "Streaming needs a dataset for the lead field and mesh"
        raise ValueError(msg)
    ds = load_dataset(exp.data, exp.leadfield)
    cfg = exp.solver_config(record_history=False)
    stream = StreamReconstructor(
        ds.leadfield,
        ds.mesh,
        exp.lam,
        exp.mu,
        exp.eta,
        w=exp.w,
        cfg_init=cfg,
        cfg_loop=cfg.replace(max_iter=min(cfg.max_iter, Config.loop_max_iter)),
    )

    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        column = parse_column(line, lineno)
        try:
            out = stream.push(column)
        except ValueError as e:
            msg = f"line {lineno}: {e}"
            raise ValueError(msg) from e
        if out is None:
            continue
        for column in out.T:
            sink.write(" ".join(repr(float(v)) for v in column) + "\n")
        sink.flush()
        logger.info("stream: step %d reconstructed in %.3f ms", stream.num_received, stream.latencies_ms[-1])

    if not stream.reports:
        logger.warning("stream: input ended after %d columns, before the first window was full", stream.num_received)

    bundle = ReportBundle()
    table = bundle.table("stream_latency.csv", STREAM_COLUMNS)
    for step, (ms, report) in enumerate(zip(stream.latencies_ms, stream.reports)):
        table.add(step, ms, report.iterations, report.termination)
    loop = stream.latencies_ms[1:]
    if loop:
        mean, std, median = _stats(loop)
        assert mean is not None
        assert std is not None
        cv = std / mean if mean > 0 else math.nan
        bundle.summary.append(f"stream: {len(loop)} steps, latency {mean:.3f} +- {std:.3f} ms (median {median:.3f}, cv {cv:.3f})")
    _finish(exp, bundle)
    return stream
