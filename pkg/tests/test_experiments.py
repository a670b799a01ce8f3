import csv
import io
from pathlib import Path

import numpy as np
import pytest

from vpal.experiments import (
    COMPARE_COLUMNS,
    SCALE_COLUMNS,
    SOLVERS,
    CellResult,
    ExperimentConfig,
    grid_cell_value,
    grid_values,
    load_or_make,
    map_cells,
    run_cell,
    run_compare,
    run_grid,
    run_scale,
    run_simulate,
    run_solve,
    run_stream,
)
from vpal.matrix_io import load_dmat
from vpal.metrics import MetricReport
from vpal.solver import SolveReport


def tiny(command: str, outdir: Path, **kwargs) -> ExperimentConfig:
    settings = {"kind": "grid2d", "n": 16, "T": 6, "sensors": 6, "trials": 1, "max_iter": 30, "seed": 3}
    settings.update(kwargs)
    return ExperimentConfig(command, outdir=outdir, **settings)


def read_rows(path: Path) -> list[list[str]]:
    with path.open(newline="") as f:
        return list(csv.reader(f))


class TestExperimentConfig:
    def test_default_solvers(self) -> None:
        assert ExperimentConfig("compare").solvers == tuple(SOLVERS)
        assert ExperimentConfig("solve").solvers == ("vpal",)
        assert ExperimentConfig("scale", axis="n").solvers == ("admm", "vpal", "vpalw")
        assert ExperimentConfig("scale", axis="T").solvers == ("vpal", "vpalw")
        assert ExperimentConfig("grid").solvers == ("admm", "fista", "vpal")

    def test_validation(self, tmp_path: Path) -> None:
        with pytest.raises(ValueError):
            ExperimentConfig("plot")  # type: ignore[arg-type]
        with pytest.raises(ValueError, match="newton"):
            ExperimentConfig(solvers=["vpal", "newton"])
        with pytest.raises(ValueError):
            ExperimentConfig(trials=0)
        with pytest.raises(ValueError):
            ExperimentConfig(kind="torus")
        with pytest.raises(ValueError):
            ExperimentConfig(data=tmp_path / "missing")
        with pytest.raises(ValueError):
            ExperimentConfig(data=tmp_path, outdir=tmp_path)
        with pytest.raises(ValueError):
            ExperimentConfig(grid_min=0.0)

    def test_replace(self) -> None:
        exp = ExperimentConfig("compare", n=50)
        assert exp.replace(T=7).T == 7
        assert exp.replace(T=7).n == 50
        with pytest.raises(ValueError):
            exp.replace(colour="red")

    def test_solver_config(self) -> None:
        cfg = ExperimentConfig(tol=1e-7, max_iter=12, time_limit=5.0).solver_config(record_history=False)
        assert (cfg.tol, cfg.max_iter, cfg.time_limit, cfg.record_history) == (1e-7, 12, 5.0, False)

    def test_grid_values(self) -> None:
        exp = ExperimentConfig("grid", grid_size=3, grid_min=1e-2, grid_max=1.0, grid_zero=True)
        assert grid_values(exp) == pytest.approx([0.0, 0.01, 0.1, 1.0])
        assert len(grid_values(exp.replace(grid_zero=False))) == 3


class TestCells:
    def test_map_cells_keeps_key_order(self) -> None:
        keys = [3, 1, 2, 5, 4]
        assert list(map_cells(lambda k: k * k, keys, workers=3)) == keys
        assert map_cells(lambda k: k * k, keys, workers=3) == {k: k * k for k in keys}

    def test_status(self) -> None:
        assert CellResult("vpal").status == "error"
        report = SolveReport("vpal")
        report.X = np.array([[np.nan]])
        report.termination = "converged"
        assert CellResult("vpal", report).status == "diverged"
        report.X = np.zeros((1, 1))
        assert CellResult("vpal", report).status == "converged"
        assert CellResult("vpal", report).ok

    def test_run_cell_records_errors(self, tmp_path: Path) -> None:
        exp = tiny("compare", tmp_path)
        ds = load_or_make(exp.replace(T=1))
        result = run_cell("vpalw", ds.problem(exp.lam, exp.mu, exp.eta), exp, ds.X_true)
        assert result.status == "error"
        assert result.error

    def test_run_cell_time_limit(self, tmp_path: Path) -> None:
        exp = tiny("compare", tmp_path, time_limit=1e-9)
        ds = load_or_make(exp)
        result = run_cell("vpal", ds.problem(exp.lam, exp.mu, exp.eta), exp, ds.X_true)
        assert result.status == "intractable"
        assert result.report is not None
        assert "no result within the 1e-09 s cell limit" in result.report.notes
        assert grid_cell_value(result) == "n/a"

    def test_grid_cell_value(self) -> None:
        assert grid_cell_value(CellResult("admm")) == "error"
        report = SolveReport("admm")
        report.termination = "intractable"
        assert grid_cell_value(CellResult("admm", report)) == "n/a"
        report = SolveReport("vpal")
        report.X = np.zeros((1, 1))
        report.termination = "diverged"
        assert grid_cell_value(CellResult("vpal", report)) == "div"
        report.termination = "converged"
        metrics = MetricReport(psnr=1.0, rel_error=0.25, ssim=0.5, sed=0.0, sparsity=0.0)
        assert grid_cell_value(CellResult("vpal", report, metrics)) == 0.25


class TestRuns:
    def test_simulate(self, tmp_path: Path) -> None:
        ds = run_simulate(tiny("simulate", tmp_path / "ds"))
        for name in ("mesh.txt", "L.dmat", "Xtrue.dmat", "B.dmat", "meta.txt", "manifest.txt"):
            assert (tmp_path / "ds" / name).is_file()
        assert ds.B.shape == (6, 6)

    def test_solve(self, tmp_path: Path) -> None:
        result = run_solve(tiny("solve", tmp_path / "out"))
        assert result.ok
        out = tmp_path / "out"
        assert load_dmat(out / "X.dmat").shape == (16, 6)
        rows = read_rows(out / "solve.csv")
        assert len(rows) == 2
        assert rows[1][0] == "vpal"
        assert (out / "history_vpal.csv").is_file()
        assert (out / "summary.txt").is_file()
        assert (out / "manifest.txt").read_text().startswith("command=solve\n")

    def test_solve_from_dataset(self, tmp_path: Path) -> None:
        run_simulate(tiny("simulate", tmp_path / "ds"))
        result = run_solve(ExperimentConfig("solve", data=tmp_path / "ds", outdir=tmp_path / "out", solvers=["sloreta"]))
        assert result.status == "converged"
        assert result.metrics is not None

    def test_compare(self, tmp_path: Path) -> None:
        results = run_compare(tiny("compare", tmp_path / "out"))
        assert set(results) == {(name, 0) for name in SOLVERS}
        rows = read_rows(tmp_path / "out" / "compare.csv")
        assert rows[0] == list(COMPARE_COLUMNS)
        assert [row[0] for row in rows[1:]] == list(SOLVERS)
        assert all(len(row) == len(COMPARE_COLUMNS) for row in rows)
        for name in SOLVERS:
            assert (tmp_path / "out" / f"history_{name}.csv").is_file()
        assert (tmp_path / "out" / "compare_error.svg").is_file()

    def test_compare_is_deterministic(self, tmp_path: Path) -> None:
        timing = {COMPARE_COLUMNS.index(c) for c in ("runtime_mean_s", "runtime_std_s", "runtime_median_s")}
        tables = []
        for name in ("first", "second"):
            run_compare(tiny("compare", tmp_path / name, trials=2, workers=2))
            rows = read_rows(tmp_path / name / "compare.csv")
            tables.append([[v for i, v in enumerate(row) if i not in timing] for row in rows])
        assert tables[0] == tables[1]

    def test_scale(self, tmp_path: Path) -> None:
        exp = tiny("scale", tmp_path / "out", axis="T", times=[4, 6], solvers=["vpal", "vpalw"])
        results = run_scale(exp)
        assert len(results) == 4
        rows = read_rows(tmp_path / "out" / "scale_T.csv")
        assert rows[0] == list(SCALE_COLUMNS)
        assert len(rows) == 5
        vpalw = [row for row in rows[1:] if row[0] == "vpalw"]
        latency = SCALE_COLUMNS.index("latency_mean_ms")
        assert all(row[latency] for row in vpalw)
        assert (tmp_path / "out" / "scale_T.svg").is_file()

    def test_scale_intractable(self, tmp_path: Path) -> None:
        exp = tiny("scale", tmp_path / "out", axis="n", sizes=[9, 16], solvers=["admm"], admm_max_n=10)
        results = run_scale(exp)
        assert results["admm", 9, 0].status != "intractable"
        assert results["admm", 16, 0].status == "intractable"
        assert "admm n=16: intractable" in (tmp_path / "out" / "summary.txt").read_text()

    def test_scale_time_limit_is_intractable(self, tmp_path: Path) -> None:
        exp = tiny("scale", tmp_path / "out", axis="n", sizes=[16], solvers=["vpal"], time_limit=1e-9)
        result = run_scale(exp)["vpal", 16, 0]
        assert result.status == "intractable"
        assert not result.ok
        assert result.metrics is None
        rows = read_rows(tmp_path / "out" / "scale_n.csv")
        assert rows[1][SCALE_COLUMNS.index("runtime_mean_s")] == ""
        assert rows[1][SCALE_COLUMNS.index("termination")] == "intractable"
        assert "vpal n=16: intractable" in (tmp_path / "out" / "summary.txt").read_text()

    def test_scale_rejects_dataset(self, tmp_path: Path) -> None:
        run_simulate(tiny("simulate", tmp_path / "ds"))
        with pytest.raises(ValueError):
            run_scale(ExperimentConfig("scale", data=tmp_path / "ds", outdir=tmp_path / "out"))

    def test_grid(self, tmp_path: Path) -> None:
        exp = tiny("grid", tmp_path / "out", solvers=["admm", "vpal"], grid_size=2, grid_min=1e-3, grid_max=1e-1, grid_zero=True)
        matrices = run_grid(exp)
        assert set(matrices) == {"admm", "vpal"}
        for name, matrix in matrices.items():
            assert len(matrix) == 3
            assert all(len(row) == 3 for row in matrix)
            rows = read_rows(tmp_path / "out" / f"grid_{name}.csv")
            assert len(rows) == 4
            assert rows[0][0] == "mu\\lambda"
        best = read_rows(tmp_path / "out" / "grid_best.csv")
        assert [row[0] for row in best[1:]] == ["admm", "vpal"]

    def test_stream(self, tmp_path: Path) -> None:
        ds = run_simulate(tiny("simulate", tmp_path / "ds"))
        exp = ExperimentConfig("stream", data=tmp_path / "ds", outdir=tmp_path / "out", max_iter=20)
        source = [" ".join(repr(float(v)) for v in column) + "\n" for column in ds.B.T]
        source.insert(2, "\n")
        sink = io.StringIO()
        stream = run_stream(exp, source, sink)
        lines = sink.getvalue().splitlines()
        assert len(lines) == 6
        assert all(len(line.split()) == 16 for line in lines)
        assert stream.num_received == 6
        rows = read_rows(tmp_path / "out" / "stream_latency.csv")
        assert len(rows) == 1 + 5

    def test_stream_errors(self, tmp_path: Path) -> None:
        run_simulate(tiny("simulate", tmp_path / "ds"))
        exp = ExperimentConfig("stream", data=tmp_path / "ds", outdir=tmp_path / "out")
        with pytest.raises(ValueError, match="line 2"):
            run_stream(exp, ["1 2 3 4 5 6\n", "1 2 x 4 5 6\n"], io.StringIO())
        with pytest.raises(ValueError, match="line 1"):
            run_stream(exp, ["1 2 3\n"], io.StringIO())
        with pytest.raises(ValueError):
            run_stream(ExperimentConfig("stream", outdir=tmp_path / "out"), [], io.StringIO())
