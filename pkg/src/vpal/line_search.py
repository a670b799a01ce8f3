"""vpal line_search module.

Step size and conjugate direction rules of the VPAL inner loop.

All step rules return ``alpha`` for the update ``X <- X - alpha * S``. With the descent
direction ``S = -g + beta * S_prev`` the returned steps are therefore non-positive.

This module provides:
- StepSizeError
- LineRestriction
- step_linearized
- step_optimal_1d
- step_backtracking
- compute_beta
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import numpy as np
import scipy.optimize

from .linalg import kron_right_apply
from .problem import soft_threshold

if TYPE_CHECKING:
    from .problem import OpCountsT, Problem
    from .solver import BetaModeT, SolverConfig

logger = logging.getLogger(__name__)

_TINY = 1e-300
_MIN_STEP = 1e-16
_BRACKET_MAXITER = 60


class StepSizeError(ValueError):
    """A step rule could not produce a step along the given direction."""


class LineRestriction:
    """The problem restricted to the line ``X - alpha * S`` for fixed ``C``.

    Every operator is applied once in the constructor; evaluating the restricted
    functions afterwards costs only vector arithmetic.
    """

    def __init__(
        self,
        problem: Problem,
        X: np.ndarray,
        Y: np.ndarray,
        C: np.ndarray,
        S: np.ndarray,
        counts: OpCountsT | None = None,
    ) -> None:
        """Constructor.

        Arguments:
            problem (Problem): The problem.
            X (ndarray): Current sources.
            Y (ndarray): Current auxiliary field.
            C (ndarray): Current scaled multipliers.
            S (ndarray): Search direction.
            counts (Counter, optional): Operation counter.

        Raises:
            StepSizeError: ``S`` is zero.
        """
        self.s_norm2 = float(np.vdot(S, S))
        if self.s_norm2 == 0.0:
            msg = "Search direction is zero"
            raise StepSizeError(msg)

        self.problem = problem
        self.Y = Y
        self.eta2 = problem.eta**2
        self.lam2 = problem.lam**2 if problem.has_time_term else 0.0
        self.mu = problem.mu
        self.kappa = problem.mu / self.eta2
        self.c_norm2 = float(np.vdot(C, C))

        self.R0 = problem.residual(X, counts)
        self.LS = problem.forward(S, counts)
        self.V0 = problem.graphtv(X, counts) + C
        self.DS = problem.graphtv(S, counts)
        if self.lam2:
            self.TX = kron_right_apply(X)
            self.TS = kron_right_apply(S)

    def _quadratic(self, alpha: float) -> float:
        R = self.R0 - alpha * self.LS
        value = 0.5 * float(np.vdot(R, R))
        if self.lam2:
            Z = self.TX - alpha * self.TS
            value += 0.5 * self.lam2 * float(np.vdot(Z, Z))
        return value

    def phi(self, alpha: float) -> float:
        """Smooth part of the augmented Lagrangian at ``X - alpha * S`` with ``Y`` held fixed."""
        E = self.V0 - alpha * self.DS - self.Y
        return self._quadratic(alpha) + 0.5 * self.eta2 * (float(np.vdot(E, E)) - self.c_norm2)

    def h(self, alpha: float) -> float:
        """Augmented Lagrangian at ``X - alpha * S`` with ``Y`` held fixed."""
        return self.phi(alpha) + self.mu * float(np.abs(self.Y).sum())

    def f_proj(self, alpha: float) -> float:
        """Projected objective at ``X - alpha * S``: ``Y`` re-optimized by shrinkage."""
        V = self.V0 - alpha * self.DS
        Yopt = soft_threshold(V, self.kappa)
        E = V - Yopt
        return self._quadratic(alpha) + 0.5 * self.eta2 * float(np.vdot(E, E)) + self.mu * float(np.abs(Yopt).sum())

    def slope(self) -> float:
        """``<S, G>`` where ``G`` is the gradient of the smooth part at ``alpha = 0``."""
        value = float(np.vdot(self.R0, self.LS)) + self.eta2 * float(np.vdot(self.V0 - self.Y, self.DS))
        if self.lam2:
            value += self.lam2 * float(np.vdot(self.TX, self.TS))
        return value

    def curvature(self) -> float:
        """``<S, H S>`` for the Hessian ``H`` of the smooth part."""
        value = float(np.vdot(self.LS, self.LS)) + self.eta2 * float(np.vdot(self.DS, self.DS))
        if self.lam2:
            value += self.lam2 * float(np.vdot(self.TS, self.TS))
        return value


def step_linearized(
    problem: Problem,
    X: np.ndarray,
    Y: np.ndarray,
    C: np.ndarray,
    S: np.ndarray,
    line: LineRestriction | None = None,
) -> float:
    """Exact minimizer along ``S`` of the augmented Lagrangian with ``Y`` frozen.

    Returns:
        float: ``alpha = <S, G> / <S, H S>``.

    Raises:
        StepSizeError: ``S`` is zero or the curvature along ``S`` is not positive.
    """
    line = line or LineRestriction(problem, X, Y, C, S)
    denom = line.curvature()
    if not denom > _TINY:
        msg = f"Curvature along the search direction is {denom:g}"
        raise StepSizeError(msg)
    return line.slope() / denom


def step_optimal_1d(  # noqa: PLR0913
    problem: Problem,
    X: np.ndarray,
    Y: np.ndarray,
    C: np.ndarray,
    S: np.ndarray,
    alpha_start: float | None = None,
    line: LineRestriction | None = None,
    xtol: float = 1e-8,
) -> float:
    """Minimize the projected objective along ``S`` by golden-section search.

    The bracket is grown from ``(0, alpha_start)``; ``alpha_start`` defaults to the linearized step.

    Keyword Arguments:
        alpha_start (float, optional): Initial trial step, usually the previously accepted one.
        line (LineRestriction, optional): Precomputed restriction to reuse.
        xtol (float, optional): Relative tolerance of the golden-section search.

    Returns:
        float: The minimizing step.

    Raises:
        StepSizeError: ``S`` is zero or no bracket was found.
    """
    line = line or LineRestriction(problem, X, Y, C, S)

    if not alpha_start:
        try:
            alpha_start = step_linearized(problem, X, Y, C, S, line=line)
        except StepSizeError:
            alpha_start = -1.0
        if not alpha_start:
            alpha_start = -1.0

    try:
        xa, xb, xc, *_ = scipy.optimize.bracket(line.f_proj, xa=0.0, xb=alpha_start, maxiter=_BRACKET_MAXITER)
        result = scipy.optimize.minimize_scalar(line.f_proj, bracket=(xa, xb, xc), method="golden", options={"xtol": xtol})
    except (RuntimeError, ValueError) as e:
        msg = f"No bracket for the optimal step: {e}"
        raise StepSizeError(msg) from e

    if not np.isfinite(result.x):
        msg = "Optimal step search produced a non-finite step"
        raise StepSizeError(msg)
    return float(result.x)


def step_backtracking(  # noqa: PLR0913
    problem: Problem,
    X: np.ndarray,
    Y: np.ndarray,
    C: np.ndarray,
    S: np.ndarray,
    j: int,
    params: SolverConfig,
    line: LineRestriction | None = None,
) -> float:
    """Backtracking with summable slack.

    Accepts the largest step ``rho^i`` along ``S`` with
    ``phi(X + rho^i S, Y) <= phi(X, Y) - delta ||rho^i S||^2 + eps_j``,
    where ``eps_j = eps0 * eps_decay^j`` and ``phi`` is the smooth part of the augmented Lagrangian.

    Arguments:
        problem (Problem): The problem.
        X (ndarray): Current sources.
        Y (ndarray): Current auxiliary field.
        C (ndarray): Current scaled multipliers.
        S (ndarray): Descent direction.
        j (int): Global inner step counter selecting the slack term.
        params (SolverConfig): Supplies ``backtracking_delta``, ``backtracking_rho``,
            ``backtracking_eps0`` and ``backtracking_eps_decay``.
        line (LineRestriction, optional): Precomputed restriction to reuse.

    Returns:
        float: ``-rho^i``.

    Raises:
        StepSizeError: ``S`` is zero or the step underflowed.
    """
    line = line or LineRestriction(problem, X, Y, C, S)
    delta = params.backtracking_delta
    rho = params.backtracking_rho
    budget = line.phi(0.0) + params.backtracking_eps(j)

    step = 1.0
    while step >= _MIN_STEP:
        if line.phi(-step) <= budget - delta * step * step * line.s_norm2:
            return -step
        step *= rho

    msg = "Backtracking step underflowed"
    raise StepSizeError(msg)


def compute_beta(mode: BetaModeT, g_new: np.ndarray, g_old: np.ndarray, warmth: float = 1.0) -> float:
    """Conjugate gradient parameter.

    Arguments:
        mode (string): 'fr' (Fletcher-Reeves), 'pr' (Polak-Ribiere) or 'hybrid'
            (Polak-Ribiere clamped to ``[-FR, FR]``).
        g_new (ndarray): Current gradient.
        g_old (ndarray): Previous gradient.
        warmth (float, optional): Share of the previous direction kept, in ``[0, 1]``.
            The result of ``mode`` is scaled by it, so 0 restarts from steepest descent and
            the hybrid clamp becomes ``[-warmth FR, warmth FR]``. Default is 1.

    Returns:
        float: beta

    Raises:
        ValueError: ``g_old`` is zero, ``warmth`` is outside ``[0, 1]`` or ``mode`` is unknown.

    Examples: ::

        >>> g = np.array([1.0, 2.0])
        >>> compute_beta('hybrid', g, g)
        0.0
        >>> compute_beta('fr', 2.0 * g, g, warmth=0.5)
        2.0
    """
    if not 0.0 <= warmth <= 1.0:
        msg = f"warmth must be in [0, 1], got {warmth}"
        raise ValueError(msg)

    old2 = float(np.vdot(g_old, g_old))
    if old2 == 0.0:
        msg = "Previous gradient is zero"
        raise ValueError(msg)

    fr = float(np.vdot(g_new, g_new)) / old2
    if mode == "fr":
        return warmth * fr

    pr = float(np.vdot(g_new, g_new - g_old)) / old2
    if mode == "pr":
        return warmth * pr
    if mode == "hybrid":
        return warmth * min(max(pr, -fr), fr)

    msg = f"Unknown beta mode '{mode}'"
    raise ValueError(msg)
