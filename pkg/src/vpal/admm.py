"""vpal ADMM solver module.

This module provides:
- ADMM
- admm_solve
"""

from __future__ import annotations

import logging
import time
from typing import TYPE_CHECKING

import numpy as np
import scipy.sparse

from .linalg import SylvesterSolver, timediff_gram
from .problem import Iterate
from .solver import Solver, SolveReport, SolverConfig

if TYPE_CHECKING:
    from .problem import Problem

logger = logging.getLogger(__name__)


class ADMM(Solver):
    """Alternating direction method of multipliers.

    The ``X`` update solves the Sylvester equation
    ``(L^T L + eta^2 D2^T D2) X + lam^2 X D1 D1^T = L^T B + eta^2 D2^T (Y - C)``
    with one factorization reused for all iterations.
    """

    name = "admm"

    def solve(self, problem: Problem, X0: np.ndarray | None = None, X_true: np.ndarray | None = None) -> SolveReport:
        """Run ADMM.

        Arguments:
            problem (Problem): Problem to solve.
            X0 (ndarray, optional): Starting point; default zeros.
            X_true (ndarray, optional): Ground truth for the error history.

        Returns:
            SolveReport: Solution and history; termination is 'intractable' when the mesh has more
            than ``admm_max_n`` nodes.

        Raises:
            numpy.linalg.LinAlgError: ``L^T L + eta^2 D2^T D2`` is not positive definite.
        """
        cfg = self.config
        report, started = self._start(problem)
        counts = report.op_counts

        it = Iterate.initial(problem, X0, counts)
        X, Y, C = it.X, it.Y, it.C
        report.initial_objective = problem.objective(X, counts)

        if problem.num_nodes > cfg.admm_max_n:
            report.note(f"mesh has {problem.num_nodes} nodes, above admm_max_n={cfg.admm_max_n}")
            return self._finish(report, X, "intractable", started, time.perf_counter())

        sylvester = self.factorize(problem)
        counts["factorization"] += sylvester.num_factorizations

        eta2 = problem.eta**2
        LtB = problem.adjoint(problem.data, counts)
        setup_done = time.perf_counter()

        termination = "max_iter"
        for _ in range(cfg.max_iter):
            X_prev = X

            X = sylvester.solve(LtB + eta2 * problem.graphtv_adjoint(Y - C, counts))
            counts["linear_solve"] += 1

            DX = problem.graphtv(X, counts)
            Y = problem.shrink(X, C, counts)
            C = C + cfg.multiplier_step * (DX - Y)

            decision = self._record(report, problem, X, X_prev, started, X_true)
            if decision is not None:
                termination = decision
                break

        return self._finish(report, X, termination, started, setup_done)

    @staticmethod
    def factorize(problem: Problem) -> SylvesterSolver:
        """Assemble ``L^T L + eta^2 D2^T D2`` and factor the Sylvester operator of the ``X`` update."""
        L = problem.leadfield
        LtL = (L.T @ L).toarray() if scipy.sparse.issparse(L) else L.T @ L
        D2 = problem.mesh.to_sparse()
        hth = LtL + problem.eta**2 * (D2.T @ D2).toarray()

        if problem.has_time_term:
            return SylvesterSolver(hth, timediff_gram(problem.num_times), problem.lam**2)
        return SylvesterSolver(hth, np.zeros((problem.num_times, problem.num_times)), 0.0)


def admm_solve(
    prob: Problem,
    cfg: SolverConfig | None = None,
    X0: np.ndarray | None = None,
    X_true: np.ndarray | None = None,
) -> SolveReport:
    """Solve ``prob`` with ADMM.

    See Also:
        :py:class:`ADMM`
    """
    return ADMM(cfg)(prob, X0=X0, X_true=X_true)
