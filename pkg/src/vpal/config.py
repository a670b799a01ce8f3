"""vpal config class module.

This module provides:
- Config
"""

from __future__ import annotations


class Config:
    """Global default settings for all solvers and experiments.

    Values set on these class attributes will affect every :py:class:`vpal.solver.SolverConfig`
    and :py:class:`vpal.experiments.ExperimentConfig` created afterwards, unless the
    instance overrides them.

    Examples: ::

        vpal.Config.tol = 1e-6
        vpal.Config.step_mode = 'backtracking'

    """

    tol = 1e-5
    """Relative tolerance on both the iterate change and the objective change."""

    max_iter = 1000
    """Maximum number of outer iterations."""

    loop_max_iter = 100
    """Maximum number of outer iterations for windows after the first in windowed solves."""

    inner_iters = 2
    """Number of conjugate gradient steps per outer iteration of VPAL."""

    step_mode = "linearized"
    """Step size rule: 'linearized', 'optimal_1d' or 'backtracking'."""

    beta_mode = "hybrid"
    """Conjugate gradient beta rule: 'fr', 'pr' or 'hybrid'."""

    lam = 1e-5
    """Time regularization weight."""

    mu = 1e-3
    """Sparsity weight on the graph total variation."""

    eta = 10.0
    """Penalty parameter of the augmented Lagrangian."""

    lipschitz = 1000.0
    """Lipschitz constant estimate used by FISTA."""

    backtracking_delta = 1e-4
    """Sufficient decrease constant of the backtracking rule."""

    backtracking_rho = 0.5
    """Contraction factor of the backtracking rule, in (0, 1)."""

    backtracking_eps0 = 1e-3
    """First term of the summable slack sequence of the backtracking rule."""

    backtracking_eps_decay = 0.5
    """Geometric decay of the slack sequence, in (0, 1)."""

    divergence_patience = 10
    """Number of consecutive objective increases that mark a run as diverged."""

    multiplier_step = 1.0
    """Step applied to the scaled Lagrange multipliers after each outer iteration."""

    prox_tol = 1e-6
    """Tolerance of the inner VPAL solve of the FISTA proximal subproblem."""

    prox_max_iter = 50
    """Iteration cap of the inner VPAL solve of the FISTA proximal subproblem."""

    admm_max_n = 10000
    """ADMM refuses meshes with more nodes than this and reports the run as intractable."""

    time_limit = None
    """Wall-clock limit per solve, in seconds.

    * None = No limit
    * float = Solvers stop between iterations once exceeded and report 'timeout'
    """

    workers = 1
    """Worker threads used for independent experiment cells."""

    sloreta_reg = 1e-2
    """Tikhonov weight of the sLORETA minimum-norm stage, > 0."""

    cell_time_limit = 1800.0
    """Wall-clock limit of one experiment cell, in seconds; exceeding it reports 'timeout'."""

    sensors = 32
    """Number of virtual sensors of generated datasets."""
