import numpy as np
from numpy.testing import assert_allclose

from vpal.fista import FISTA, fista_solve
from vpal.graph import MeshGraph
from vpal.problem import Problem
from vpal.solver import SolverConfig


def path_graph(n: int) -> MeshGraph:
    coords = np.zeros((n, 3))
    coords[:, 0] = np.arange(n)
    return MeshGraph(coords, [(i, i + 1) for i in range(n - 1)])


def tall_problem(seed: int, mu: float = 0.0) -> Problem:
    rng = np.random.default_rng(seed)
    return Problem(rng.standard_normal((12, 5)), rng.standard_normal((12, 3)), path_graph(5), mu=mu)


class TestFISTA:
    def test_smooth_problem_reaches_least_squares(self) -> None:
        prob = tall_problem(1)
        lipschitz = np.linalg.norm(prob.leadfield, 2) ** 2
        report = fista_solve(prob, SolverConfig(lipschitz=lipschitz, tol=1e-13, max_iter=5000))
        expected = np.linalg.lstsq(prob.leadfield, prob.data, rcond=None)[0]
        assert report.op_counts["prox_forward"] == 0
        assert_allclose(report.X, expected, rtol=1e-5, atol=1e-7)

    def test_underestimated_lipschitz_diverges(self) -> None:
        prob = tall_problem(2)
        report = FISTA(lipschitz=1e-3)(prob)
        assert report.termination == "diverged"
        assert report.diverged
        assert report.iterations < 1000

    def test_proximal_steps(self) -> None:
        prob = tall_problem(3, mu=0.5)
        lipschitz = np.linalg.norm(prob.leadfield, 2) ** 2
        report = FISTA(lipschitz=lipschitz, max_iter=20)(prob)
        counts = report.op_counts
        assert report.solver == "fista"
        assert counts["prox_graphtv"] > 0
        assert counts["prox_linear_solve"] == 0
        assert report.objective < report.initial_objective

    def test_unconverged_prox_is_noted(self) -> None:
        prob = tall_problem(4, mu=0.5)
        lipschitz = np.linalg.norm(prob.leadfield, 2) ** 2
        report = FISTA(lipschitz=lipschitz, max_iter=5, prox_max_iter=1)(prob)
        assert "prox did not converge (max_iter) at iteration 1" in report.notes
        assert sum(note.startswith("prox did not converge (max_iter)") for note in report.notes) == 1

    def test_converged_prox_leaves_no_note(self) -> None:
        prob = tall_problem(5, mu=0.5)
        lipschitz = np.linalg.norm(prob.leadfield, 2) ** 2
        report = FISTA(lipschitz=lipschitz, max_iter=3, prox_max_iter=5000, prox_tol=1e-3)(prob)
        assert not any(note.startswith("prox") for note in report.notes)
