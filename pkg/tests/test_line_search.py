import numpy as np
import pytest
from numpy.testing import assert_allclose

from vpal.graph import MeshGraph
from vpal.line_search import LineRestriction, StepSizeError, compute_beta, step_backtracking, step_linearized, step_optimal_1d
from vpal.problem import Iterate, Problem
from vpal.solver import SolverConfig


def random_graph(rng: np.random.Generator, n: int) -> MeshGraph:
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    keep = rng.random(len(pairs)) < 0.5
    edges = [p for p, k in zip(pairs, keep) if k] or [(0, 1)]
    return MeshGraph(rng.random((n, 3)), edges, rng.uniform(0.5, 2.0, len(edges)))


def random_state(rng: np.random.Generator, lam: float = 0.3) -> tuple[Problem, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n, T, p = 6, 4, 5
    prob = Problem(rng.standard_normal((p, n)), rng.standard_normal((p, T)), random_graph(rng, n), lam=lam, mu=0.05, eta=2.0)
    X = rng.standard_normal((n, T))
    C = 0.1 * rng.standard_normal((prob.num_edges, T))
    Y = prob.shrink(X, C)
    S = -prob.grad_x(X, Y, C)
    return prob, X, Y, C, S


class TestLineRestriction:
    def test_phi_matches_smooth(self) -> None:
        rng = np.random.default_rng(1)
        for lam in (0.0, 0.4):
            prob, X, Y, C, S = random_state(rng, lam)
            line = LineRestriction(prob, X, Y, C, S)
            for alpha in (0.0, -0.01, 0.3):
                assert_allclose(line.phi(alpha), prob.smooth(X - alpha * S, Y, C), rtol=1e-10)
                assert_allclose(line.h(alpha), prob.h(X - alpha * S, Y, C), rtol=1e-10)
                assert_allclose(line.f_proj(alpha), prob.f_proj(X - alpha * S, C), rtol=1e-10)

    def test_slope_and_curvature(self) -> None:
        prob, X, Y, C, S = random_state(np.random.default_rng(2))
        line = LineRestriction(prob, X, Y, C, S)
        G = prob.grad_x(X, Y, C)
        assert_allclose(line.slope(), np.vdot(S, G), rtol=1e-10)
        assert_allclose(line.curvature(), np.vdot(S, prob.hessian_apply(S)), rtol=1e-10)

    def test_zero_direction(self) -> None:
        prob, X, Y, C, _ = random_state(np.random.default_rng(3))
        with pytest.raises(StepSizeError):
            LineRestriction(prob, X, Y, C, np.zeros_like(X))


class TestStepRules:
    def test_linearized_identity_leadfield(self) -> None:
        rng = np.random.default_rng(4)
        B = rng.standard_normal((4, 3))
        prob = Problem(np.eye(4), B, MeshGraph(rng.random((4, 3)), []))
        it = Iterate.initial(prob)
        S = -prob.grad_x(it.X, it.Y, it.C)
        alpha = step_linearized(prob, it.X, it.Y, it.C, S)
        assert_allclose(alpha, -1.0, rtol=1e-14)
        assert_allclose(it.X - alpha * S, B, rtol=1e-14)

    def test_linearized_minimizes_phi(self) -> None:
        rng = np.random.default_rng(5)
        for _ in range(20):
            prob, X, Y, C, S = random_state(rng)
            line = LineRestriction(prob, X, Y, C, S)
            alpha = step_linearized(prob, X, Y, C, S, line=line)
            assert alpha < 0
            assert line.phi(alpha) <= line.phi(alpha + 1e-4)
            assert line.phi(alpha) <= line.phi(alpha - 1e-4)

    def test_linearized_zero_curvature(self) -> None:
        rng = np.random.default_rng(6)
        prob = Problem(np.zeros((2, 3)), np.ones((2, 2)), MeshGraph(rng.random((3, 3)), []))
        X = np.zeros((3, 2))
        E = np.zeros((0, 2))
        with pytest.raises(StepSizeError):
            step_linearized(prob, X, E, E, np.ones((3, 2)))

    def test_optimal_1d_dominates_linearized(self) -> None:
        rng = np.random.default_rng(7)
        for _ in range(20):
            prob, X, Y, C, S = random_state(rng)
            line = LineRestriction(prob, X, Y, C, S)
            alpha_lin = step_linearized(prob, X, Y, C, S, line=line)
            alpha_opt = step_optimal_1d(prob, X, Y, C, S, line=line)
            f_lin = line.f_proj(alpha_lin)
            assert line.f_proj(alpha_opt) <= f_lin + 1e-9 * abs(f_lin)
            assert line.f_proj(alpha_opt) <= line.f_proj(0.0)

    def test_optimal_1d_with_start(self) -> None:
        prob, X, Y, C, S = random_state(np.random.default_rng(8))
        line = LineRestriction(prob, X, Y, C, S)
        alpha = step_optimal_1d(prob, X, Y, C, S, alpha_start=-1e-3, line=line)
        assert line.f_proj(alpha) < line.f_proj(0.0)

    def test_backtracking_inequality(self) -> None:
        rng = np.random.default_rng(9)
        cfg = SolverConfig()
        for j in range(10):
            prob, X, Y, C, S = random_state(rng)
            line = LineRestriction(prob, X, Y, C, S)
            alpha = step_backtracking(prob, X, Y, C, S, j, cfg, line=line)
            assert alpha < 0
            i = round(np.log(-alpha) / np.log(cfg.backtracking_rho))
            assert_allclose(-alpha, cfg.backtracking_rho**i, rtol=1e-12)
            bound = line.phi(0.0) - cfg.backtracking_delta * alpha * alpha * np.vdot(S, S) + cfg.backtracking_eps(j)
            assert line.phi(alpha) <= bound

    def test_backtracking_takes_unit_step_when_possible(self) -> None:
        rng = np.random.default_rng(10)
        B = rng.standard_normal((3, 2))
        prob = Problem(np.eye(3), B, MeshGraph(rng.random((3, 3)), []))
        it = Iterate.initial(prob)
        S = -prob.grad_x(it.X, it.Y, it.C)
        assert step_backtracking(prob, it.X, it.Y, it.C, S, 0, SolverConfig()) == -1.0

    def test_zero_direction(self) -> None:
        prob, X, Y, C, _ = random_state(np.random.default_rng(11))
        S = np.zeros_like(X)
        with pytest.raises(StepSizeError):
            step_linearized(prob, X, Y, C, S)
        with pytest.raises(StepSizeError):
            step_optimal_1d(prob, X, Y, C, S)
        with pytest.raises(StepSizeError):
            step_backtracking(prob, X, Y, C, S, 0, SolverConfig())


class TestComputeBeta:
    def test_doc_example(self) -> None:
        g = np.array([1.0, 2.0])
        assert compute_beta("hybrid", g, g) == 0.0

    def test_fletcher_reeves(self) -> None:
        assert compute_beta("fr", np.array([1.0, 0.0]), np.array([2.0, 0.0])) == 0.25

    def test_polak_ribiere(self) -> None:
        assert compute_beta("pr", np.array([1.0, 0.0]), np.array([2.0, 0.0])) == -0.25
        assert compute_beta("pr", np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == 2.0

    def test_hybrid_clamps(self) -> None:
        assert compute_beta("hybrid", np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == 1.0
        assert_allclose(compute_beta("hybrid", np.array([1.0, 0.0]), np.array([3.0, 0.0])), -1.0 / 9.0)
        assert compute_beta("hybrid", np.array([1.0, 0.0]), np.array([2.0, 0.0])) == -0.25

    def test_hybrid_bounded_by_fletcher_reeves(self) -> None:
        rng = np.random.default_rng(12)
        for _ in range(200):
            g_new = rng.standard_normal(8)
            g_old = rng.standard_normal(8)
            fr = compute_beta("fr", g_new, g_old)
            beta = compute_beta("hybrid", g_new, g_old)
            assert abs(beta) <= fr
            pr = compute_beta("pr", g_new, g_old)
            if abs(pr) <= fr:
                assert beta == pr

    def test_errors(self) -> None:
        with pytest.raises(ValueError):
            compute_beta("fr", np.ones(2), np.zeros(2))
        with pytest.raises(ValueError):
            compute_beta("dy", np.ones(2), np.ones(2))  # type: ignore[arg-type]

    def test_warmth_scales_beta(self) -> None:
        g_new = np.array([1.0, 0.0])
        g_old = np.array([3.0, 0.0])
        assert compute_beta("hybrid", g_new, g_old, warmth=0.0) == 0.0
        assert_allclose(compute_beta("hybrid", g_new, g_old, warmth=0.5), -1.0 / 18.0)
        assert compute_beta("fr", 2.0 * g_new, g_new, warmth=0.5) == 2.0
        assert compute_beta("pr", g_new, -g_new, warmth=0.25) == 0.5

    def test_warmth_bounds_hybrid(self) -> None:
        rng = np.random.default_rng(13)
        for _ in range(100):
            g_new = rng.standard_normal(6)
            g_old = rng.standard_normal(6)
            fr = compute_beta("fr", g_new, g_old)
            assert abs(compute_beta("hybrid", g_new, g_old, warmth=0.3)) <= 0.3 * fr + 1e-15

    def test_warmth_out_of_range(self) -> None:
        with pytest.raises(ValueError, match="warmth"):
            compute_beta("hybrid", np.ones(2), np.ones(2), warmth=1.5)
        with pytest.raises(ValueError, match="warmth"):
            compute_beta("fr", np.ones(2), np.ones(2), warmth=-0.1)
