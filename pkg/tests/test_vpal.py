import logging

import numpy as np
import pytest
from joblib import Parallel, delayed
from numpy.testing import assert_allclose, assert_array_equal

from vpal.graph import MeshGraph
from vpal.problem import Problem
from vpal.solver import SolverConfig
from vpal.vpal import VPAL, vpal_solve


def random_graph(rng: np.random.Generator, n: int) -> MeshGraph:
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    keep = rng.random(len(pairs)) < 0.5
    edges = [p for p, k in zip(pairs, keep) if k] or [(0, 1)]
    return MeshGraph(rng.random((n, 3)), edges, rng.uniform(0.5, 2.0, len(edges)))


def random_problem(seed: int, n: int = 8, T: int = 4, p: int = 5) -> Problem:
    rng = np.random.default_rng(seed)
    return Problem(rng.standard_normal((p, n)), rng.standard_normal((p, T)), random_graph(rng, n), lam=0.2, mu=0.05, eta=2.0)


class TestVPAL:
    def test_identity_leadfield_without_edges(self) -> None:
        rng = np.random.default_rng(1)
        B = rng.standard_normal((4, 3))
        prob = Problem(np.eye(4), B, MeshGraph(rng.random((4, 3)), []), mu=0.1)
        report = vpal_solve(prob, SolverConfig(tol=1e-10))
        assert report.termination == "converged"
        assert report.iterations == 2
        assert_allclose(report.X, B, rtol=1e-12, atol=1e-14)
        assert report.objective == pytest.approx(0.0, abs=1e-24)

    @pytest.mark.parametrize("step_mode", ["linearized", "optimal_1d", "backtracking"])
    def test_objective_decreases(self, step_mode: str) -> None:
        prob = random_problem(2)
        report = VPAL(step_mode=step_mode, max_iter=50)(prob)
        assert report.solver == "vpal"
        assert np.all(np.isfinite(report.X))
        assert report.objective < report.initial_objective
        assert report.iterations == len(report.objective_history)

    @pytest.mark.parametrize("beta_mode", ["fr", "pr", "hybrid"])
    def test_beta_modes(self, beta_mode: str) -> None:
        report = VPAL(beta_mode=beta_mode, max_iter=30)(random_problem(3))
        assert report.objective < report.initial_objective

    def test_never_solves_linear_systems(self) -> None:
        report = VPAL(max_iter=20)(random_problem(4))
        counts = report.op_counts
        assert counts["linear_solve"] == 0
        assert counts["factorization"] == 0
        assert counts["forward"] > 0
        assert counts["adjoint"] > 0
        assert counts["graphtv"] > 0

    def test_deterministic(self) -> None:
        prob = random_problem(5)
        first = VPAL(max_iter=25)(prob)
        second = VPAL(max_iter=25)(prob)
        assert_array_equal(first.X, second.X)
        assert first.objective_history == second.objective_history

    def test_backtracking_monitor(self) -> None:
        report = VPAL(step_mode="backtracking", max_iter=20, inner_iters=3)(random_problem(6))
        assert report.monitor
        for k, j, h_before, h_after, eps in report.monitor:
            assert k >= 1
            assert j >= 0
            assert h_after <= h_before + eps + 1e-9 * abs(h_before)
        steps = [j for _, j, _, _, _ in report.monitor]
        assert steps == list(range(len(steps)))

    def test_max_iter(self) -> None:
        report = VPAL(max_iter=3, tol=1e-14)(random_problem(7))
        assert report.termination == "max_iter"
        assert report.iterations == 3

    def test_timeout(self) -> None:
        report = VPAL(time_limit=1e-9, tol=1e-14)(random_problem(8))
        assert report.termination == "timeout"
        assert report.iterations == 1

    def test_histories(self) -> None:
        prob = random_problem(9)
        X_true = np.ones((prob.num_nodes, prob.num_times))
        report = VPAL(max_iter=10, tol=1e-14)(prob, X_true=X_true)
        assert len(report.residual_history) == report.iterations
        assert len(report.error_history) == report.iterations
        assert len(report.time_history) == report.iterations
        assert report.time_history == sorted(report.time_history)
        assert set(report.wall_time_ms) == {"setup", "iterate", "total"}

    def test_without_history(self) -> None:
        report = VPAL(max_iter=5, tol=1e-14, record_history=False)(random_problem(10))
        assert report.residual_history == []
        assert report.time_history == []
        assert len(report.objective_history) == 5

    def test_warm_start(self) -> None:
        prob = random_problem(11)
        cold = VPAL(max_iter=200, tol=1e-8)(prob)
        warm = VPAL(max_iter=200, tol=1e-8)(prob, X0=cold.X)
        assert warm.initial_objective == pytest.approx(cold.objective)

    def test_bad_start(self) -> None:
        prob = random_problem(12)
        with pytest.raises(ValueError):
            vpal_solve(prob, X0=np.zeros((3, 3)))
        with pytest.raises(ValueError):
            vpal_solve(prob, X0=np.full((prob.num_nodes, prob.num_times), np.nan))

    def test_logs_termination(self, caplog: pytest.LogCaptureFixture) -> None:
        with caplog.at_level(logging.INFO, logger="vpal.solver"):
            VPAL(max_iter=2, tol=1e-14)(random_problem(13))
        assert "vpal: max_iter after 2 iterations" in caplog.text

    def test_shared_solver_across_threads(self) -> None:
        solver = VPAL(step_mode="backtracking", max_iter=30, inner_iters=3)
        problems = [random_problem(seed) for seed in range(20, 26)]
        sequential = [solver(prob) for prob in problems]
        threaded = Parallel(n_jobs=3, prefer="threads")(delayed(solver)(prob) for prob in problems)
        for alone, shared in zip(sequential, threaded):
            assert_allclose(shared.X, alone.X, rtol=1e-10, atol=1e-12)
            steps = [j for _, j, _, _, _ in shared.monitor]
            assert steps == list(range(len(steps)))
        assert not hasattr(solver, "_inner_step")
