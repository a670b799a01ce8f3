"""vpal sLORETA module.

Standardized low-resolution tomography: the Tikhonov minimum-norm estimate with each
source rescaled by its resolution. It is the closed-form l2 baseline the iterative solvers
are compared against.

This module provides:
- SLORETA
- minimum_norm
- sloreta_solve
"""

from __future__ import annotations

import logging
import time
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg
import scipy.sparse

from .config import Config
from .solver import Solver, SolveReport

if TYPE_CHECKING:
    from .problem import Problem
    from .solver import SolverConfig

logger = logging.getLogger(__name__)


def _check_reg(reg: float) -> None:
    if not (np.isfinite(reg) and reg > 0):
        msg = "reg must be finite and positive"
        raise ValueError(msg)


def _dense_leadfield(prob: Problem) -> np.ndarray:
    L = prob.leadfield
    return L.toarray() if scipy.sparse.issparse(L) else np.asarray(L)


def _factor_gram(L: np.ndarray, reg: float) -> tuple[np.ndarray, bool]:
    gram = L @ L.T + reg * np.eye(L.shape[0])
    return scipy.linalg.cho_factor(gram, lower=True)


def minimum_norm(prob: Problem, reg: float) -> np.ndarray:
    """Tikhonov minimum-norm estimate ``L^T (L L^T + reg I)^-1 B``.

    Arguments:
        prob (Problem): Only the lead field and data are used.
        reg (float): Tikhonov weight, > 0.

    Returns:
        ndarray: Source estimate, n x T.

    Raises:
        ValueError: ``reg`` is not positive.
    """
    _check_reg(reg)
    L = _dense_leadfield(prob)
    return L.T @ scipy.linalg.cho_solve(_factor_gram(L, reg), prob.data)


def sloreta_solve(prob: Problem, reg: float | None = None) -> np.ndarray:
    """sLORETA estimate.

    The minimum-norm estimate with source row ``i`` divided by ``sqrt(R_ii)``, where
    ``R = L^T (L L^T + reg I)^-1 L`` is the resolution matrix. Sources with ``R_ii = 0``
    (zero lead field column) are set to zero.

    Arguments:
        prob (Problem): Only the lead field and data are used.
        reg (float, optional): Tikhonov weight, > 0.
            Default is None, in which case the :py:class:`vpal.config.Config` setting will be used.

    Returns:
        ndarray: Standardized source estimate, n x T.

    Raises:
        ValueError: ``reg`` is not positive.
    """
    reg = Config.sloreta_reg if reg is None else reg
    _check_reg(reg)

    L = _dense_leadfield(prob)
    factor = _factor_gram(L, reg)
    X = L.T @ scipy.linalg.cho_solve(factor, prob.data)
    resolution = np.einsum("ij,ij->j", L, scipy.linalg.cho_solve(factor, L))

    scale = np.zeros_like(resolution)
    positive = resolution > 0
    scale[positive] = 1.0 / np.sqrt(resolution[positive])
    return scale[:, None] * X


class SLORETA(Solver):
    """sLORETA wrapped as a solver, so it reports like the iterative methods."""

    name = "sloreta"

    def __init__(self, config: SolverConfig | None = None, reg: float | None = None, **kwargs) -> None:
        """Constructor.

        Keyword Arguments:
            config (SolverConfig, optional): Options; only ``record_history`` matters.
            reg (float, optional): Tikhonov weight.
                Default is None, in which case the :py:class:`vpal.config.Config` setting will be used.
            **kwargs: :py:class:`vpal.solver.SolverConfig` options.
        """
        super().__init__(config, **kwargs)
        self.reg = Config.sloreta_reg if reg is None else reg

    def solve(self, problem: Problem, X0: np.ndarray | None = None, X_true: np.ndarray | None = None) -> SolveReport:  # noqa: ARG002
        """Compute the sLORETA estimate; the report holds one iteration."""
        report, started = self._start(problem)
        report.initial_objective = problem.objective(problem.zeros())
        report.op_counts["factorization"] += 1
        setup_done = time.perf_counter()

        X = sloreta_solve(problem, self.reg)
        self._record(report, problem, X, problem.zeros(), started, X_true)
        return self._finish(report, X, "converged", started, setup_done)
