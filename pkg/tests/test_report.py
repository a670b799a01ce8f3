import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from vpal import __version__
from vpal.report import Heatmap, LinePlot, ReportBundle, Table, emit_report, format_cell, write_manifest


def sample_bundle() -> ReportBundle:
    bundle = ReportBundle()
    table = bundle.table("results.csv", ("solver", "runtime_s", "psnr"))
    table.add("vpal", 0.5, 31.25)
    table.add("admm", 2.0, None)
    plot = LinePlot("Relative error", "time (ms)", "relative error", logy=True)
    plot.add("vpal", [1.0, 2.0, 3.0], [1.0, 0.1, 0.01])
    plot.add("admm", [1.0, 5.0], [1.0, 0.5], yerr=[0.1, 0.1])
    bundle.plots["error.svg"] = plot
    bundle.plots["grid.svg"] = Heatmap("grid", [[0.5, None], [0.25, float("nan")]], ["0", "1"], ["a", "b"], "mu", "lambda")
    bundle.summary.append("vpal: converged")
    return bundle


class TestReport:
    def test_format_cell(self) -> None:
        assert (format_cell(0.1), format_cell(None), format_cell("div")) == ("0.1", "", "div")
        assert format_cell(3) == "3"
        assert format_cell(float("inf")) == "inf"

    def test_table(self, tmp_path: Path) -> None:
        table = Table(("a", "b"))
        table.add(1, 0.5)
        table.add("x", None)
        with pytest.raises(ValueError):
            table.add(1)
        table.write(tmp_path / "t.csv")
        assert (tmp_path / "t.csv").read_text() == "a,b\n1,0.5\nx,\n"

    def test_bundle_table_is_reused(self) -> None:
        bundle = ReportBundle()
        assert bundle.table("t.csv", ("a",)) is bundle.table("t.csv", ("b",))

    def test_empty_bundle(self, tmp_path: Path) -> None:
        bundle = ReportBundle()
        bundle.table("results.csv", ("solver", "psnr"))
        bundle.plots["error.svg"] = LinePlot("Relative error", "t", "e")
        bundle.plots["grid.svg"] = Heatmap("grid", [], [], [])
        written = emit_report(bundle, tmp_path / "out")
        assert written == [tmp_path / "out" / "results.csv"]
        assert (tmp_path / "out" / "results.csv").read_text() == "solver,psnr\n"
        assert not (tmp_path / "out" / "error.svg").exists()
        assert not (tmp_path / "out" / "summary.txt").exists()

    def test_emit_report(self, tmp_path: Path) -> None:
        written = emit_report(sample_bundle(), tmp_path)
        assert [p.name for p in written] == ["results.csv", "error.svg", "grid.svg", "summary.txt"]
        assert (tmp_path / "results.csv").read_text() == "solver,runtime_s,psnr\nvpal,0.5,31.25\nadmm,2.0,\n"
        assert (tmp_path / "summary.txt").read_text() == "vpal: converged\n"
        for name in ("error.svg", "grid.svg"):
            root = ET.parse(tmp_path / name).getroot()
            assert root.tag.endswith("svg")

    def test_output_is_byte_identical(self, tmp_path: Path) -> None:
        emit_report(sample_bundle(), tmp_path / "first")
        emit_report(sample_bundle(), tmp_path / "second")
        for name in ("results.csv", "error.svg", "grid.svg", "summary.txt"):
            assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()

    def test_manifest(self, tmp_path: Path) -> None:
        path = write_manifest(tmp_path / "out", "compare", {"tol": 1e-5, "n": 50})
        lines = path.read_text().splitlines()
        assert lines[:3] == ["command=compare", "n=50", "tol=1e-05"]
        assert f"vpal_version={__version__}" in lines
        assert any(line.startswith("numpy_version=") for line in lines)
