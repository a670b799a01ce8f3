import numpy as np
import pytest

from vpal.admm import ADMM
from vpal.fista import FISTA
from vpal.graph import MeshGraph, build_dense_d2
from vpal.linalg import timediff_matrix
from vpal.problem import Problem
from vpal.vpal import VPAL

cp = pytest.importorskip("cvxpy")


def path_graph(n: int) -> MeshGraph:
    coords = np.zeros((n, 3))
    coords[:, 0] = np.arange(n)
    return MeshGraph(coords, [(i, i + 1) for i in range(n - 1)])


def oracle_problem(seed: int) -> Problem:
    rng = np.random.default_rng(seed)
    n, T, p = 6, 4, 9
    X_true = np.zeros((n, T))
    X_true[2:4] = 1.0
    L = rng.standard_normal((p, n))
    B = L @ X_true + 0.05 * rng.standard_normal((p, T))
    return Problem(L, B, path_graph(n), lam=0.3, mu=0.2, eta=2.0)


def oracle_objective(prob: Problem) -> float:
    L, B = prob.leadfield, prob.data
    D1 = timediff_matrix(prob.num_times)
    D2 = build_dense_d2(prob.mesh).toarray()
    X = cp.Variable((prob.num_nodes, prob.num_times))
    objective = 0.5 * cp.sum_squares(L @ X - B) + 0.5 * prob.lam**2 * cp.sum_squares(X @ D1) + prob.mu * cp.sum(cp.abs(D2 @ X))
    cp.Problem(cp.Minimize(objective)).solve()
    return prob.objective(np.asarray(X.value))


@pytest.mark.slow
class TestAgainstConvexSolver:
    def test_admm(self) -> None:
        prob = oracle_problem(1)
        best = oracle_objective(prob)
        report = ADMM(tol=1e-10, max_iter=20000)(prob)
        assert report.objective == pytest.approx(best, rel=1e-5)

    @pytest.mark.parametrize("step_mode", ["linearized", "optimal_1d", "backtracking"])
    def test_vpal(self, step_mode: str) -> None:
        prob = oracle_problem(2)
        best = oracle_objective(prob)
        report = VPAL(tol=1e-10, max_iter=20000, step_mode=step_mode)(prob)
        assert report.objective == pytest.approx(best, rel=1e-3)

    def test_fista(self) -> None:
        prob = oracle_problem(3)
        best = oracle_objective(prob)
        lipschitz = np.linalg.norm(prob.leadfield, 2) ** 2 + 4.0 * prob.lam**2
        report = FISTA(lipschitz=lipschitz, tol=1e-10, max_iter=5000)(prob)
        assert report.objective == pytest.approx(best, rel=1e-3)
