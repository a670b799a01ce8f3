"""vpal windowed module.

Windowed VPAL: the time axis is cut into overlapping windows that are solved one after
another, each warm-started from its predecessor. With one new time point per window the
same machinery reconstructs a stream of incoming data columns.

Windows are 0-based half-open column ranges ``(start, stop)``.

This module provides:
- WindowSchedule
- make_windows
- warm_start
- vpal_windowed_solve
- stream_step
- StreamReconstructor
"""

from __future__ import annotations

import logging
import time
from typing import TYPE_CHECKING

import numpy as np

from .config import Config
from .problem import Problem
from .solver import SolveReport, SolverConfig
from .vpal import VPAL

if TYPE_CHECKING:
    from .graph import MeshGraph
    from .problem import LeadfieldT

logger = logging.getLogger(__name__)

# Worst first: the assembled report takes the worst window outcome
_SEVERITY = ("diverged", "timeout", "max_iter", "converged")


class WindowSchedule:
    """Ordered overlapping windows covering ``[0, T)``.

    Attributes:
        windows (tuple): ``(start, stop)`` pairs.
        num_times (int): T.
        width (int): w; full windows hold ``w + 1`` columns.
        overlap (int): Columns shared by consecutive windows.
    """

    def __init__(self, windows: list[tuple[int, int]], num_times: int, width: int, overlap: int) -> None:
        """Constructor.

        Raises:
            ValueError: The windows do not cover ``[0, T)`` with the stated overlap.
        """
        if not windows or windows[0][0] != 0 or windows[-1][1] != num_times:
            msg = f"Windows must cover [0, {num_times})"
            raise ValueError(msg)
        for j, (start, stop) in enumerate(windows):
            if stop - start < overlap + 1:
                msg = f"Window {j} [{start}, {stop}) is shorter than overlap + 1"
                raise ValueError(msg)
            if j and windows[j - 1][1] - start != overlap:
                msg = f"Window {j} does not overlap its predecessor by {overlap} columns"
                raise ValueError(msg)

        self.windows = tuple((int(a), int(b)) for a, b in windows)
        self.num_times = num_times
        self.width = width
        self.overlap = overlap

    def __repr__(self) -> str:
        """Returns a short description."""
        return f"WindowSchedule(T={self.num_times}, w={self.width}, overlap={self.overlap}, windows={len(self)})"

    def __len__(self) -> int:
        """Number of windows."""
        return len(self.windows)

    def __iter__(self):  # noqa: ANN204
        """Iterate over ``(start, stop)`` pairs."""
        return iter(self.windows)

    def __getitem__(self, j: int) -> tuple[int, int]:
        """Window ``j``."""
        return self.windows[j]


def make_windows(T: int, w: int = 1, overlap: int = 1) -> WindowSchedule:
    """Build the window schedule.

    The first window holds ``w + 1`` columns; each later window starts ``overlap`` columns
    before the end of its predecessor and holds ``w + 1`` columns, except the last, which is
    truncated at T.

    Arguments:
        T (int): Number of time points.
        w (int, optional): Window width; windows hold ``w + 1`` columns.
        overlap (int, optional): Columns shared by consecutive windows, ``0 <= overlap <= w``.

    Returns:
        WindowSchedule: The schedule.

    Raises:
        ValueError: ``T < w + 1`` or ``overlap`` out of range.

    Examples: ::

        >>> make_windows(7, w=2, overlap=1).windows
        ((0, 3), (2, 5), (4, 7))
    """
    if w < 1:
        msg = "Window width w must be at least 1"
        raise ValueError(msg)
    if not 0 <= overlap <= w:
        msg = f"overlap must be in [0, {w}]"
        raise ValueError(msg)
    if T < w + 1:
        msg = f"T = {T} is too short for windows of {w + 1} columns"
        raise ValueError(msg)

    windows = []
    start = 0
    while True:
        stop = min(start + w + 1, T)
        windows.append((start, stop))
        if stop == T:
            break
        start = stop - overlap

    return WindowSchedule(windows, T, w, overlap)


def warm_start(previous: np.ndarray, length: int, overlap: int) -> np.ndarray:
    """Initial guess for a window from the solution of its predecessor.

    The first ``overlap`` columns are the trailing columns of ``previous``; the remaining
    columns repeat the last column of ``previous``.

    Examples: ::

        >>> warm_start(np.array([[1.0, 2.0, 3.0]]), 3, 1)
        array([[3., 3., 3.]])
    """
    kept = previous[:, previous.shape[1] - overlap :] if overlap else previous[:, :0]
    fill = np.repeat(previous[:, -1:], length - kept.shape[1], axis=1)
    return np.hstack([kept, fill])


def _solve_window(problem: Problem, cfg: SolverConfig, X0: np.ndarray | None, X_true: np.ndarray | None) -> SolveReport:
    solver = VPAL(cfg)
    solver.log_level = logging.DEBUG
    return solver(problem, X0=X0, X_true=X_true)


def vpal_windowed_solve(
    prob: Problem,
    sched: WindowSchedule | None = None,
    cfg_init: SolverConfig | None = None,
    cfg_loop: SolverConfig | None = None,
    X_true: np.ndarray | None = None,
) -> SolveReport:
    """Solve ``prob`` window by window with warm starts.

    Arguments:
        prob (Problem): Problem over all T time points.
        sched (WindowSchedule, optional): Windows; default ``make_windows(T)``.
        cfg_init (SolverConfig, optional): Options of the first window; default from :py:class:`vpal.config.Config`.
        cfg_loop (SolverConfig, optional): Options of later windows; default as ``cfg_init`` but
            with ``max_iter = Config.loop_max_iter``.
        X_true (ndarray, optional): Ground truth for the per-window error histories.

    Returns:
        SolveReport: Assembled solution, overlap columns taken from the later window. Histories
        are the per-window histories concatenated; ``window_reports`` holds the per-window reports;
        termination is the worst window outcome.

    Raises:
        ValueError: The schedule does not match the problem, or a window failed (message names the window).
    """
    T = prob.num_times
    sched = make_windows(T) if sched is None else sched
    if sched.num_times != T:
        msg = f"Schedule covers {sched.num_times} time points, problem has {T}"
        raise ValueError(msg)

    cfg_init = SolverConfig() if cfg_init is None else cfg_init
    cfg_loop = cfg_init.replace(max_iter=Config.loop_max_iter) if cfg_loop is None else cfg_loop

    started = time.perf_counter()
    report = SolveReport("vpalw")
    X = np.full((prob.num_nodes, T), np.nan)
    previous: np.ndarray | None = None
    elapsed_ms = 0.0

    for j, (start, stop) in enumerate(sched):
        window = prob.window(start, stop)
        truth = None if X_true is None else X_true[:, start:stop]
        try:
            if previous is None:
                part = _solve_window(window, cfg_init, None, truth)
            else:
                part = _solve_window(window, cfg_loop, warm_start(previous, stop - start, sched.overlap), truth)
        except ValueError as e:
            msg = f"Window {j} [{start}, {stop}): {e}"
            raise ValueError(msg) from e

        _append_window(report, part, elapsed_ms)
        elapsed_ms += part.wall_time_ms["total"]
        X[:, start:stop] = part.X
        previous = part.X

        logger.debug("vpalw: window %d [%d, %d) %s in %.1f ms", j, start, stop, part.termination, part.wall_time_ms["total"])
        if part.termination == "diverged":
            report.note(f"window {j} diverged; later windows were not solved")
            break

    total_ms = 1000.0 * (time.perf_counter() - started)
    loop_ms = [r.wall_time_ms["total"] for r in report.window_reports[1:]]
    report.X = X
    report.wall_time_ms = {
        "total": total_ms,
        "first_window": report.window_reports[0].wall_time_ms["total"],
        "loop_mean": float(np.mean(loop_ms)) if loop_ms else 0.0,
    }
    report.termination = min((r.termination for r in report.window_reports), key=_SEVERITY.index)
    logger.info("vpalw: %s after %d windows in %.1f ms", report.termination, len(report.window_reports), total_ms)
    return report


def _append_window(report: SolveReport, part: SolveReport, offset_ms: float) -> None:
    if not report.window_reports:
        report.initial_objective = part.initial_objective
    report.window_reports.append(part)
    report.iterations += part.iterations
    report.objective_history.extend(part.objective_history)
    report.rel_change_history.extend(part.rel_change_history)
    report.rel_change_f_history.extend(part.rel_change_f_history)
    report.residual_history.extend(part.residual_history)
    report.error_history.extend(part.error_history)
    report.time_history.extend(t + offset_ms for t in part.time_history)
    report.op_counts.update(part.op_counts)
    report.monitor.extend(part.monitor)
    for note in part.notes:
        report.note(note)


def _stream_window(prob_so_far: Problem, previous: np.ndarray, new_column: np.ndarray, cfg_loop: SolverConfig, overlap: int) -> SolveReport:
    column = np.asarray(new_column, dtype=np.float64).reshape(-1, 1)
    if column.shape[0] != prob_so_far.num_sensors:
        msg = f"New column has {column.shape[0]} values, expected {prob_so_far.num_sensors}"
        raise ValueError(msg)
    if prob_so_far.num_times < overlap:
        msg = f"Stream holds {prob_so_far.num_times} columns, fewer than the overlap {overlap}"
        raise ValueError(msg)

    data = np.hstack([prob_so_far.data[:, prob_so_far.num_times - overlap :], column])
    window = prob_so_far.replace(data=data)
    return _solve_window(window, cfg_loop, warm_start(previous, overlap + 1, overlap), None)


def stream_step(
    prob_so_far: Problem,
    prev_window_solution: np.ndarray,
    new_column: np.ndarray,
    cfg_loop: SolverConfig | None = None,
    overlap: int = 1,
) -> np.ndarray:
    """Reconstruct the window that ends with one newly arrived data column.

    The window holds the last ``overlap`` data columns seen so far and the new column; it is
    solved from the warm start built from the previous window's solution. Only those columns
    are read.

    Arguments:
        prob_so_far (Problem): Problem whose data holds the columns received so far.
        prev_window_solution (ndarray): Solution of the preceding window.
        new_column (ndarray): The new data column, length p.
        cfg_loop (SolverConfig, optional): Options; default ``max_iter = Config.loop_max_iter``.
        overlap (int, optional): Columns shared with the preceding window.

    Returns:
        ndarray: Solution of the new window, n x (overlap + 1).
    """
    cfg_loop = SolverConfig(max_iter=Config.loop_max_iter) if cfg_loop is None else cfg_loop
    part = _stream_window(prob_so_far, prev_window_solution, new_column, cfg_loop, overlap)
    logger.debug("stream: window solved in %.3f ms", part.wall_time_ms["total"])
    return part.X


class StreamReconstructor:
    """Single-consumer stream of data columns reconstructed one time point at a time.

    The first ``w + 1`` columns are buffered and solved together with ``cfg_init``; every
    later column is reconstructed by :py:func:`stream_step` with ``overlap = w``.

    Examples: ::

        stream = StreamReconstructor(L, mesh, lam=1e-5, mu=1e-3)
        for column in columns:
            newest = stream.push(column)
    """

    def __init__(  # noqa: PLR0913
        self,
        leadfield: LeadfieldT,
        mesh: MeshGraph,
        lam: float | None = None,
        mu: float | None = None,
        eta: float | None = None,
        w: int = 1,
        cfg_init: SolverConfig | None = None,
        cfg_loop: SolverConfig | None = None,
    ) -> None:
        """Constructor.

        Keyword Arguments:
            lam (float, optional): Time regularization weight; default from :py:class:`vpal.config.Config`.
            mu (float, optional): Sparsity weight; default from :py:class:`vpal.config.Config`.
            eta (float, optional): Penalty parameter; default from :py:class:`vpal.config.Config`.
            w (int, optional): Window width; each window holds ``w + 1`` columns.
            cfg_init (SolverConfig, optional): Options of the first window.
            cfg_loop (SolverConfig, optional): Options of later windows.
        """
        if w < 1:
            msg = "Window width w must be at least 1"
            raise ValueError(msg)

        self.problem = Problem(
            leadfield,
            np.zeros((leadfield.shape[0], 1)),
            mesh,
            lam=Config.lam if lam is None else lam,
            mu=Config.mu if mu is None else mu,
            eta=Config.eta if eta is None else eta,
        )
        self.w = w
        self.cfg_init = SolverConfig() if cfg_init is None else cfg_init
        self.cfg_loop = self.cfg_init.replace(max_iter=Config.loop_max_iter) if cfg_loop is None else cfg_loop

        self.latencies_ms: list[float] = []
        self.reports: list[SolveReport] = []
        self._buffer: list[np.ndarray] = []
        self._window: np.ndarray | None = None
        self._data: np.ndarray = np.zeros((self.problem.num_sensors, 0))
        self._columns: list[np.ndarray] = []

    @property
    def num_received(self) -> int:
        """Columns pushed so far."""
        return len(self._columns) + (len(self._buffer) if self._window is None else 0)

    def push(self, column: np.ndarray) -> np.ndarray | None:
        """Feed one data column.

        Returns:
            ndarray or None: None while the first window is buffering; then the ``w + 1``
            reconstructed columns of the first window (n x (w + 1)); afterwards the newest
            reconstructed column (n x 1).

        Raises:
            ValueError: The column length differs from the sensor count.
        """
        column = np.asarray(column, dtype=np.float64).reshape(-1)
        if column.shape[0] != self.problem.num_sensors:
            msg = f"Column has {column.shape[0]} values, expected {self.problem.num_sensors}"
            raise ValueError(msg)

        started = time.perf_counter()

        if self._window is None:
            self._buffer.append(column)
            if len(self._buffer) < self.w + 1:
                return None
            first = self.problem.replace(data=np.column_stack(self._buffer))
            part = _solve_window(first, self.cfg_init, None, None)
            self._data = first.data
            self._buffer = []
            self._columns = [part.X[:, i] for i in range(part.X.shape[1])]
            out = part.X
        else:
            so_far = self.problem.replace(data=self._data)
            part = _stream_window(so_far, self._window, column, self.cfg_loop, self.w)
            self._data = np.hstack([self._data[:, 1:], column[:, None]])
            self._columns[-self.w :] = [part.X[:, i] for i in range(self.w)]
            self._columns.append(part.X[:, -1])
            out = part.X[:, -1:]

        self._window = part.X
        self.reports.append(part)
        self.latencies_ms.append(1000.0 * (time.perf_counter() - started))
        logger.debug("stream: column %d reconstructed in %.3f ms", self.num_received, self.latencies_ms[-1])
        return out

    def solution(self) -> np.ndarray:
        """All reconstructed columns so far, later windows winning on overlaps; n x (columns received)."""
        if not self._columns:
            return np.zeros((self.problem.num_nodes, 0))
        return np.column_stack(self._columns)
