import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from vpal.config import Config
from vpal.graph import MeshGraph
from vpal.problem import Problem
from vpal.solver import SolverConfig
from vpal.vpal import VPAL
from vpal.windowed import StreamReconstructor, WindowSchedule, make_windows, stream_step, vpal_windowed_solve, warm_start


def random_graph(rng: np.random.Generator, n: int) -> MeshGraph:
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    keep = rng.random(len(pairs)) < 0.5
    edges = [p for p, k in zip(pairs, keep) if k] or [(0, 1)]
    return MeshGraph(rng.random((n, 3)), edges, rng.uniform(0.5, 2.0, len(edges)))


def random_problem(seed: int, T: int = 6, n: int = 8, p: int = 5) -> Problem:
    rng = np.random.default_rng(seed)
    return Problem(rng.standard_normal((p, n)), rng.standard_normal((p, T)), random_graph(rng, n), lam=0.2, mu=0.05, eta=2.0)


class TestWindowSchedule:
    def test_doc_example(self) -> None:
        assert make_windows(7, w=2, overlap=1).windows == ((0, 3), (2, 5), (4, 7))

    def test_default_schedule(self) -> None:
        sched = make_windows(5)
        assert sched.windows == ((0, 2), (1, 3), (2, 4), (3, 5))
        assert len(sched) == 4
        assert sched[1] == (1, 3)
        assert list(sched) == list(sched.windows)
        assert repr(sched) == "WindowSchedule(T=5, w=1, overlap=1, windows=4)"

    def test_truncated_last_window(self) -> None:
        assert make_windows(6, w=2, overlap=1).windows == ((0, 3), (2, 5), (4, 6))
        assert make_windows(7, w=2, overlap=0).windows == ((0, 3), (3, 6), (6, 7))

    def test_single_window(self) -> None:
        assert make_windows(3, w=2).windows == ((0, 3),)

    def test_errors(self) -> None:
        with pytest.raises(ValueError):
            make_windows(5, w=0)
        with pytest.raises(ValueError):
            make_windows(5, w=2, overlap=3)
        with pytest.raises(ValueError):
            make_windows(5, w=2, overlap=-1)
        with pytest.raises(ValueError):
            make_windows(2, w=2)

    def test_invalid_schedules(self) -> None:
        with pytest.raises(ValueError):
            WindowSchedule([], 4, 1, 1)
        with pytest.raises(ValueError):
            WindowSchedule([(0, 2), (2, 4)], 4, 1, 1)
        with pytest.raises(ValueError):
            WindowSchedule([(0, 2), (1, 3)], 4, 1, 1)

    def test_warm_start(self) -> None:
        assert_array_equal(warm_start(np.array([[1.0, 2.0, 3.0]]), 3, 1), [[3.0, 3.0, 3.0]])
        assert_array_equal(warm_start(np.array([[1.0, 2.0, 3.0]]), 3, 2), [[2.0, 3.0, 3.0]])
        assert_array_equal(warm_start(np.array([[1.0, 2.0]]), 2, 0), [[2.0, 2.0]])


class TestWindowedSolve:
    def test_single_window_matches_vpal(self) -> None:
        prob = random_problem(1, T=3)
        cfg = SolverConfig(max_iter=40)
        report = vpal_windowed_solve(prob, make_windows(3, w=2), cfg)
        direct = VPAL(cfg)(prob)
        assert report.solver == "vpalw"
        assert_array_equal(report.X, direct.X)
        assert report.termination == direct.termination
        assert report.objective_history == direct.objective_history

    def test_assembles_windows(self) -> None:
        prob = random_problem(2)
        sched = make_windows(6, w=2, overlap=1)
        report = vpal_windowed_solve(prob, sched, SolverConfig(max_iter=30), SolverConfig(max_iter=10))
        parts = report.window_reports
        assert len(parts) == len(sched)
        assert np.all(np.isfinite(report.X))
        assert_array_equal(report.X[:, 4:6], parts[-1].X)
        assert_array_equal(report.X[:, 2:4], parts[1].X[:, :2])
        assert_array_equal(report.X[:, 0:2], parts[0].X[:, :2])
        assert report.iterations == sum(p.iterations for p in parts)
        assert all(p.iterations <= 10 for p in parts[1:])
        assert report.op_counts["forward"] == sum(p.op_counts["forward"] for p in parts)
        assert len(report.objective_history) == report.iterations
        assert set(report.wall_time_ms) == {"total", "first_window", "loop_mean"}

    def test_loop_defaults(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setattr(Config, "loop_max_iter", 2)
        report = vpal_windowed_solve(random_problem(3), cfg_init=SolverConfig(tol=1e-14, max_iter=5))
        assert report.window_reports[0].iterations == 5
        assert all(p.iterations == 2 for p in report.window_reports[1:])
        assert report.termination == "max_iter"

    def test_schedule_mismatch(self) -> None:
        with pytest.raises(ValueError):
            vpal_windowed_solve(random_problem(4), make_windows(5))


class TestStream:
    def test_matches_windowed_solve(self) -> None:
        prob = random_problem(5)
        cfg_init = SolverConfig(max_iter=30)
        cfg_loop = SolverConfig(max_iter=10)
        batch = vpal_windowed_solve(prob, make_windows(6, w=1, overlap=1), cfg_init, cfg_loop)

        stream = StreamReconstructor(prob.leadfield, prob.mesh, prob.lam, prob.mu, prob.eta, w=1, cfg_init=cfg_init, cfg_loop=cfg_loop)
        outputs = [stream.push(prob.data[:, t]) for t in range(6)]

        assert outputs[0] is None
        assert outputs[1].shape == (8, 2)
        assert all(out.shape == (8, 1) for out in outputs[2:])
        assert stream.num_received == 6
        assert len(stream.latencies_ms) == 5
        assert len(stream.reports) == 5
        assert_allclose(stream.solution(), batch.X, rtol=1e-12, atol=1e-14)

    def test_buffering(self) -> None:
        prob = random_problem(6)
        stream = StreamReconstructor(prob.leadfield, prob.mesh, w=2)
        assert stream.solution().shape == (8, 0)
        assert stream.push(prob.data[:, 0]) is None
        assert stream.push(prob.data[:, 1]) is None
        assert stream.num_received == 2
        assert stream.push(prob.data[:, 2]).shape == (8, 3)
        assert stream.solution().shape == (8, 3)

    def test_bad_column(self) -> None:
        prob = random_problem(7)
        stream = StreamReconstructor(prob.leadfield, prob.mesh)
        with pytest.raises(ValueError):
            stream.push(np.ones(4))
        with pytest.raises(ValueError):
            StreamReconstructor(prob.leadfield, prob.mesh, w=0)

    def test_stream_step(self) -> None:
        prob = random_problem(8)
        so_far = prob.window(0, 3)
        previous = VPAL(max_iter=20)(prob.window(1, 3)).X
        X = stream_step(so_far, previous, prob.data[:, 3], SolverConfig(max_iter=5))
        assert X.shape == (8, 2)
        assert np.all(np.isfinite(X))
        with pytest.raises(ValueError):
            stream_step(so_far, previous, np.ones(2))
