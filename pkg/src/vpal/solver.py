"""vpal solver class module.

This module provides:
- SolverConfig
- SolveReport
- Solver
- check_convergence
"""

from __future__ import annotations

import csv
import logging
import math
import time
from collections import Counter
from pathlib import Path
from typing import TYPE_CHECKING, Any, Literal, Union

import numpy as np

from .config import Config

if TYPE_CHECKING:
    from .problem import Problem

logger = logging.getLogger(__name__)

PathT = Union[str, Path]
TerminationT = Literal["converged", "max_iter", "diverged", "timeout", "intractable"]
StepModeT = Literal["linearized", "optimal_1d", "backtracking"]
BetaModeT = Literal["fr", "pr", "hybrid"]

STEP_MODES = ("linearized", "optimal_1d", "backtracking")
BETA_MODES = ("fr", "pr", "hybrid")

REPORT_CSV_COLUMNS = ("iter", "objective", "rel_change_x", "rel_change_f", "time_ms")


class SolverConfig:
    """Options of a single solve.

    Every keyword argument left as None takes its value from :py:class:`vpal.config.Config`.

    Examples: ::

        >>> cfg = SolverConfig(tol=1e-8)
        >>> cfg.replace(step_mode='backtracking').step_mode
        'backtracking'
    """

    _FIELDS = (
        "tol",
        "max_iter",
        "inner_iters",
        "step_mode",
        "beta_mode",
        "backtracking_delta",
        "backtracking_rho",
        "backtracking_eps0",
        "backtracking_eps_decay",
        "lipschitz",
        "divergence_patience",
        "multiplier_step",
        "prox_tol",
        "prox_max_iter",
        "admm_max_n",
        "time_limit",
    )

    def __init__(  # noqa: PLR0913
        self,
        tol: float | None = None,
        max_iter: int | None = None,
        inner_iters: int | None = None,
        step_mode: StepModeT | None = None,
        beta_mode: BetaModeT | None = None,
        backtracking_delta: float | None = None,
        backtracking_rho: float | None = None,
        backtracking_eps0: float | None = None,
        backtracking_eps_decay: float | None = None,
        lipschitz: float | None = None,
        divergence_patience: int | None = None,
        multiplier_step: float | None = None,
        prox_tol: float | None = None,
        prox_max_iter: int | None = None,
        admm_max_n: int | None = None,
        time_limit: float | None = None,
        record_history: bool = True,
    ) -> None:
        """Constructor.

        Keyword Arguments:
            tol (float, optional): Relative tolerance on the iterate and objective changes.
            max_iter (int, optional): Maximum number of outer iterations.
            inner_iters (int, optional): Conjugate gradient steps per VPAL outer iteration.
            step_mode (string, optional): 'linearized', 'optimal_1d' or 'backtracking'.
            beta_mode (string, optional): 'fr', 'pr' or 'hybrid'.
            backtracking_delta (float, optional): Sufficient decrease constant, > 0.
            backtracking_rho (float, optional): Contraction factor, in (0, 1).
            backtracking_eps0 (float, optional): First slack term, > 0.
            backtracking_eps_decay (float, optional): Slack decay, in (0, 1).
            lipschitz (float, optional): FISTA Lipschitz estimate, > 0.
            divergence_patience (int, optional): Consecutive objective increases that mean divergence.
            multiplier_step (float, optional): Step of the scaled multiplier update, > 0.
            prox_tol (float, optional): Tolerance of the FISTA proximal subproblem.
            prox_max_iter (int, optional): Iteration cap of the FISTA proximal subproblem.
            admm_max_n (int, optional): Largest mesh ADMM accepts.
            time_limit (float, optional): Wall-clock limit in seconds.
            record_history (bool, optional): Record residual, error and time histories.

        Note:
            Default settings are set through :py:class:`vpal.config.Config`.

        Raises:
            ValueError: An option is out of range.
        """
        values = locals()
        for name in self._FIELDS:
            value = values[name]
            setattr(self, name, getattr(Config, name) if value is None else value)
        self.record_history = record_history
        self._validate()

    def _validate(self) -> None:  # noqa: C901
        if not self.tol > 0:
            msg = "tol must be positive"
            raise ValueError(msg)
        if self.max_iter < 1:
            msg = "max_iter must be at least 1"
            raise ValueError(msg)
        if self.inner_iters < 1:
            msg = "inner_iters must be at least 1"
            raise ValueError(msg)
        if self.step_mode not in STEP_MODES:
            msg = f"step_mode must be one of {', '.join(STEP_MODES)}"
            raise ValueError(msg)
        if self.beta_mode not in BETA_MODES:
            msg = f"beta_mode must be one of {', '.join(BETA_MODES)}"
            raise ValueError(msg)
        if not self.backtracking_delta > 0:
            msg = "backtracking_delta must be positive"
            raise ValueError(msg)
        if not 0 < self.backtracking_rho < 1:
            msg = "backtracking_rho must be in (0, 1)"
            raise ValueError(msg)
        if not self.backtracking_eps0 > 0:
            msg = "backtracking_eps0 must be positive"
            raise ValueError(msg)
        if not 0 < self.backtracking_eps_decay < 1:
            msg = "backtracking_eps_decay must be in (0, 1)"
            raise ValueError(msg)
        if not self.lipschitz > 0:
            msg = "lipschitz must be positive"
            raise ValueError(msg)
        if self.divergence_patience < 1:
            msg = "divergence_patience must be at least 1"
            raise ValueError(msg)
        if not self.multiplier_step > 0:
            msg = "multiplier_step must be positive"
            raise ValueError(msg)
        if self.time_limit is not None and not self.time_limit > 0:
            msg = "time_limit must be positive"
            raise ValueError(msg)

    def __repr__(self) -> str:
        """Returns the options as keyword arguments."""
        args = ", ".join(f"{k}={v!r}" for k, v in self.as_dict().items())
        return f"SolverConfig({args})"

    def __eq__(self, other: object) -> bool:
        """Options compare equal field by field."""
        return isinstance(other, SolverConfig) and self.as_dict() == other.as_dict()

    __hash__ = None  # type: ignore[assignment]

    def as_dict(self) -> dict[str, Any]:
        """All options by name."""
        out = {name: getattr(self, name) for name in self._FIELDS}
        out["record_history"] = self.record_history
        return out

    def replace(self, **changes) -> SolverConfig:
        """Return a copy with some options changed.

        Raises:
            ValueError: Unknown option name or an option out of range.
        """
        values = self.as_dict()
        unknown = set(changes) - set(values)
        if unknown:
            msg = f"Unknown solver options: {', '.join(sorted(unknown))}"
            raise ValueError(msg)
        values.update(changes)
        return SolverConfig(**values)

    def backtracking_eps(self, j: int) -> float:
        """Slack ``eps0 * decay^j`` of inner step ``j``."""
        return self.backtracking_eps0 * self.backtracking_eps_decay**j


class SolveReport:
    """Outcome of a solve.

    Attributes:
        X (ndarray): Final source estimate, n x T.
        iterations (int): Completed outer iterations.
        termination (string): 'converged', 'max_iter', 'diverged', 'timeout' or 'intractable'.
        initial_objective (float): Objective at the starting point.
        objective_history (list): Objective after each outer iteration.
        rel_change_history (list): Relative iterate change after each outer iteration.
        rel_change_f_history (list): Relative objective change after each outer iteration.
        residual_history (list): ``||LX - B|| / ||B||`` after each outer iteration.
        error_history (list): Relative error to the supplied ground truth after each outer iteration.
        time_history (list): Milliseconds since the start of the solve after each outer iteration.
        wall_time_ms (dict): Milliseconds spent per phase ('setup', 'iterate', 'total').
        op_counts (Counter): Number of operator applications, linear solves and factorizations.
        monitor (list): Backtracking records ``(k, j, h_before, h_after, eps_j)``.
        notes (list): Fallbacks and other remarks, each recorded once.
        window_reports (list): Per-window reports of windowed solves.
    """

    def __init__(self, solver: str = "") -> None:
        """Constructor.

        Arguments:
            solver (string, optional): Name of the solver that produced the report.
        """
        self.solver = solver
        self.X: np.ndarray = np.zeros((0, 0))
        self.iterations = 0
        self.termination: TerminationT = "max_iter"
        self.initial_objective = math.nan
        self.objective_history: list[float] = []
        self.rel_change_history: list[float] = []
        self.rel_change_f_history: list[float] = []
        self.residual_history: list[float] = []
        self.error_history: list[float] = []
        self.time_history: list[float] = []
        self.wall_time_ms: dict[str, float] = {}
        self.op_counts: Counter = Counter()
        self.monitor: list[tuple[int, int, float, float, float]] = []
        self.notes: list[str] = []
        self.window_reports: list[SolveReport] = []

    def __repr__(self) -> str:
        """Returns a short description."""
        return f"SolveReport(solver={self.solver!r}, termination={self.termination!r}, iterations={self.iterations})"

    @property
    def objective(self) -> float:
        """Final objective, or the initial one when no iteration completed."""
        return self.objective_history[-1] if self.objective_history else self.initial_objective

    @property
    def diverged(self) -> bool:
        """True if the run diverged."""
        return self.termination == "diverged"

    def note(self, message: str) -> None:
        """Record a remark once."""
        if message not in self.notes:
            self.notes.append(message)

    def csv_rows(self) -> list[tuple[int, float, float, float, float]]:
        """History rows ``(iter, objective, rel_change_x, rel_change_f, time_ms)``."""
        times = self.time_history if len(self.time_history) == len(self.objective_history) else [math.nan] * len(self.objective_history)
        return [
            (k + 1, f, dx, df, t)
            for k, (f, dx, df, t) in enumerate(zip(self.objective_history, self.rel_change_history, self.rel_change_f_history, times))
        ]

    def to_csv(self, path: PathT) -> None:
        """Write the iteration history as CSV with columns ``iter,objective,rel_change_x,rel_change_f,time_ms``."""
        with Path(path).open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(REPORT_CSV_COLUMNS)
            for k, obj, dx, df, t in self.csv_rows():
                writer.writerow([k, repr(obj), repr(dx), repr(df), f"{t:.3f}"])


def check_convergence(report: SolveReport, tol: float, patience: int | None = None) -> TerminationT | None:
    """Decide whether a solve should stop after its latest iteration.

    Arguments:
        report (SolveReport): Report whose histories hold at least one completed iteration.
        tol (float): Relative tolerance.
        patience (int, optional): Consecutive objective increases (each larger than ``tol`` relative)
            that mark divergence. Default is None, in which case the :py:class:`vpal.config.Config` setting will be used.

    Returns:
        string or None: 'diverged', 'converged', or None to continue.

    Examples: ::

        >>> r = SolveReport()
        >>> r.initial_objective = 1.0
        >>> r.objective_history.append(1.0)
        >>> r.rel_change_history.append(0.0)
        >>> r.rel_change_f_history.append(0.0)
        >>> check_convergence(r, 1e-5)
        'converged'
    """
    assert report.objective_history, "check_convergence needs a completed iteration"

    patience = Config.divergence_patience if patience is None else patience

    f = report.objective_history[-1]
    dx = report.rel_change_history[-1]
    df = report.rel_change_f_history[-1]

    if not (math.isfinite(f) and math.isfinite(dx)):
        return "diverged"

    objectives = [report.initial_objective, *report.objective_history]
    if len(objectives) > patience:
        tail = objectives[-(patience + 1) :]
        if all(b - a > tol * max(abs(a), 1e-12) for a, b in zip(tail, tail[1:])):
            return "diverged"

    if dx <= tol and df <= tol:
        return "converged"
    return None


def relative_change(new: np.ndarray | float, old: np.ndarray | float) -> float:
    """``||new - old|| / max(||old||, 1e-12)`` for arrays (Frobenius) or scalars."""
    if isinstance(new, np.ndarray):
        return float(np.linalg.norm(new - old) / max(float(np.linalg.norm(old)), 1e-12))
    return abs(new - old) / max(abs(old), 1e-12)


class Solver:
    """Base class for all solver classes."""

    name = "solver"
    """Short name used in reports and on the command line."""

    def __init__(self, config: SolverConfig | None = None, **kwargs) -> None:
        """Constructor.

        Keyword Arguments:
            config (SolverConfig, optional): Solve options.
                Default is None, in which case a :py:class:`SolverConfig` is built from ``kwargs``.
            **kwargs: :py:class:`SolverConfig` options, used when ``config`` is None.
        """
        self.config = SolverConfig(**kwargs) if config is None else config
        self.log_level = logging.INFO

    def __call__(self, problem: Problem, X0: np.ndarray | None = None, X_true: np.ndarray | None = None) -> SolveReport:
        """Returns the report created by :py:meth:`solve`."""
        return self.solve(problem, X0=X0, X_true=X_true)

    def __repr__(self) -> str:
        """Returns the solver name and its options."""
        return f"{type(self).__name__}({self.config!r})"

    def solve(self, problem: Problem, X0: np.ndarray | None = None, X_true: np.ndarray | None = None) -> SolveReport:
        """Derived classes must override and run the algorithm.

        Arguments:
            problem (Problem): Problem to solve.
            X0 (ndarray, optional): Starting point; default zeros.
            X_true (ndarray, optional): Ground truth for the error history.

        Returns:
            SolveReport: Solution and history.

        Raises:
            ValueError: The problem cannot be solved with the given options.
            NotImplementedError: There is no base class implementation.
        """
        raise NotImplementedError

    # Helpers shared by the iterative solvers

    def _start(self, problem: Problem) -> tuple[SolveReport, float]:
        report = SolveReport(self.name)
        logger.debug("%s: starting on %r", self.name, problem)
        return report, time.perf_counter()

    def _record(
        self,
        report: SolveReport,
        problem: Problem,
        X: np.ndarray,
        X_prev: np.ndarray,
        started: float,
        X_true: np.ndarray | None,
    ) -> TerminationT | None:
        """Record one outer iteration and return a termination reason, if any."""
        cfg = self.config
        f_prev = report.objective
        f = problem.objective(X, report.op_counts) if np.all(np.isfinite(X)) else math.nan

        report.iterations += 1
        report.objective_history.append(f)
        report.rel_change_history.append(relative_change(X, X_prev))
        report.rel_change_f_history.append(relative_change(f, f_prev))

        elapsed = time.perf_counter() - started
        if cfg.record_history:
            report.time_history.append(1000.0 * elapsed)
            norm_b = max(float(np.linalg.norm(problem.data)), 1e-12)
            report.residual_history.append(float(np.linalg.norm(problem.forward(X) - problem.data)) / norm_b)
            if X_true is not None:
                norm_t = max(float(np.linalg.norm(X_true)), 1e-12)
                report.error_history.append(float(np.linalg.norm(X - X_true)) / norm_t)

        logger.debug(
            "%s: iteration %d objective %.10g rel_change_x %.3g rel_change_f %.3g",
            self.name,
            report.iterations,
            f,
            report.rel_change_history[-1],
            report.rel_change_f_history[-1],
        )

        decision = check_convergence(report, cfg.tol, cfg.divergence_patience)
        if decision is None and cfg.time_limit is not None and elapsed > cfg.time_limit:
            return "timeout"
        return decision

    def _finish(self, report: SolveReport, X: np.ndarray, termination: TerminationT, started: float, setup_done: float) -> SolveReport:
        now = time.perf_counter()
        report.X = X
        report.termination = termination
        report.wall_time_ms = {
            "setup": 1000.0 * (setup_done - started),
            "iterate": 1000.0 * (now - setup_done),
            "total": 1000.0 * (now - started),
        }
        logger.log(
            self.log_level,
            "%s: %s after %d iterations in %.1f ms",
            self.name,
            termination,
            report.iterations,
            report.wall_time_ms["total"],
        )
        return report
