"""vpal VPAL solver module.

Variable projected augmented Lagrangian. Each outer iteration eliminates ``Y`` through
its closed-form shrinkage, takes a few nonlinear conjugate gradient steps on the
projected objective in ``X`` and then updates the scaled multipliers. No linear system
is ever solved.

This module provides:
- VPAL
- vpal_solve
"""

from __future__ import annotations

import logging
import time
from typing import TYPE_CHECKING

import numpy as np

from .line_search import LineRestriction, StepSizeError, compute_beta, step_backtracking, step_linearized, step_optimal_1d
from .problem import Iterate
from .solver import Solver, SolveReport, SolverConfig

if TYPE_CHECKING:
    from .problem import Problem

logger = logging.getLogger(__name__)


class _StepState:
    """Step bookkeeping of one solve: the inner step count over all outer iterations and the last step."""

    def __init__(self) -> None:
        self.inner_step = 0
        self.alpha_prev: float | None = None


class VPAL(Solver):
    """Variable projected augmented Lagrangian solver.

    Examples: ::

        >>> report = VPAL(tol=1e-6)(problem)
        >>> report.termination
        'converged'
    """

    name = "vpal"

    def solve(self, problem: Problem, X0: np.ndarray | None = None, X_true: np.ndarray | None = None) -> SolveReport:
        """Run VPAL.

        Arguments:
            problem (Problem): Problem to solve.
            X0 (ndarray, optional): Starting point; default zeros.
            X_true (ndarray, optional): Ground truth for the error history.

        Returns:
            SolveReport: Solution and history. ``op_counts['linear_solve']`` is always zero.

        Raises:
            ValueError: ``X0`` does not fit the problem.
        """
        cfg = self.config
        report, started = self._start(problem)
        counts = report.op_counts

        it = Iterate.initial(problem, X0, counts)
        X, Y, C = it.X, it.Y, it.C
        report.initial_objective = problem.objective(X, counts)
        setup_done = time.perf_counter()

        state = _StepState()
        termination = "max_iter"

        for k in range(1, cfg.max_iter + 1):
            X_prev = X
            X, Y = self._inner_loop(problem, X, Y, C, k, report, state)
            if np.all(np.isfinite(X)):
                C = C + cfg.multiplier_step * (problem.graphtv(X, counts) - Y)

            decision = self._record(report, problem, X, X_prev, started, X_true)
            if decision is not None:
                termination = decision
                break

        return self._finish(report, X, termination, started, setup_done)

    def _inner_loop(  # noqa: PLR0913
        self,
        problem: Problem,
        X: np.ndarray,
        Y: np.ndarray,
        C: np.ndarray,
        k: int,
        report: SolveReport,
        state: _StepState,
    ) -> tuple[np.ndarray, np.ndarray]:
        cfg = self.config
        counts = report.op_counts

        G = problem.grad_x(X, Y, C, counts)
        S = -G

        for i in range(cfg.inner_iters):
            try:
                line = LineRestriction(problem, X, Y, C, S, counts)
            except StepSizeError:
                break  # zero gradient

            alpha = self._step(problem, X, Y, C, S, line, report, state)
            if alpha is None:
                break

            h_before = line.h(0.0) if cfg.step_mode == "backtracking" else 0.0

            X = X - alpha * S
            Y = problem.shrink(X, C, counts)

            if cfg.step_mode == "backtracking":
                h_after = problem.h(X, Y, C)
                report.monitor.append((k, state.inner_step, h_before, h_after, cfg.backtracking_eps(state.inner_step)))

            state.inner_step += 1
            state.alpha_prev = alpha

            if not np.all(np.isfinite(X)):
                break

            if i + 1 < cfg.inner_iters:
                G_new = problem.grad_x(X, Y, C, counts)
                try:
                    beta = compute_beta(cfg.beta_mode, G_new, G)
                except ValueError:
                    break
                S = -G_new + beta * S
                if np.vdot(G_new, S) >= 0:
                    S = -G_new  # restart
                G = G_new

        return X, Y

    def _step(  # noqa: PLR0913
        self,
        problem: Problem,
        X: np.ndarray,
        Y: np.ndarray,
        C: np.ndarray,
        S: np.ndarray,
        line: LineRestriction,
        report: SolveReport,
        state: _StepState,
    ) -> float | None:
        """Step along ``S`` by the configured rule, falling back between the linearized and optimal rules."""
        cfg = self.config

        if cfg.step_mode == "backtracking":
            try:
                return step_backtracking(problem, X, Y, C, S, state.inner_step, cfg, line=line)
            except StepSizeError as e:
                logger.warning("%s: %s", self.name, e)
                report.note(f"backtracking stalled: {e}")
                return None

        if cfg.step_mode == "linearized":
            try:
                return step_linearized(problem, X, Y, C, S, line=line)
            except StepSizeError as e:
                logger.warning("%s: linearized step failed (%s), using the optimal step", self.name, e)
                report.note("linearized step fell back to optimal_1d")
            try:
                return step_optimal_1d(problem, X, Y, C, S, alpha_start=state.alpha_prev, line=line)
            except StepSizeError as e:
                logger.warning("%s: %s", self.name, e)
                report.note(f"no step found: {e}")
                return None

        try:
            return step_optimal_1d(problem, X, Y, C, S, alpha_start=state.alpha_prev, line=line)
        except StepSizeError as e:
            logger.warning("%s: optimal step failed (%s), using the linearized step", self.name, e)
            report.note("optimal_1d step fell back to linearized")
        try:
            return step_linearized(problem, X, Y, C, S, line=line)
        except StepSizeError as e:
            report.note(f"no step found: {e}")
            return None


def vpal_solve(
    prob: Problem,
    cfg: SolverConfig | None = None,
    X0: np.ndarray | None = None,
    X_true: np.ndarray | None = None,
) -> SolveReport:
    """Solve ``prob`` with VPAL.

    Arguments:
        prob (Problem): Problem to solve.
        cfg (SolverConfig, optional): Options; default from :py:class:`vpal.config.Config`.
        X0 (ndarray, optional): Starting point; default zeros.
        X_true (ndarray, optional): Ground truth for the error history.

    Returns:
        SolveReport: Solution and history.
    """
    return VPAL(cfg)(prob, X0=X0, X_true=X_true)
