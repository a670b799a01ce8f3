"""vpal module."""

from .admm import ADMM, admm_solve
from .config import Config
from .experiments import ExperimentConfig, run_compare, run_grid, run_scale, run_simulate, run_solve, run_stream
from .fista import FISTA, fista_solve
from .graph import MeshGraph, load_mesh, save_mesh
from .metrics import MetricReport, evaluate
from .problem import Iterate, Problem
from .report import emit_report
from .simulate import Dataset, SourceSpec, load_dataset, make_dataset, save_dataset
from .sloreta import SLORETA, sloreta_solve
from .solver import Solver, SolveReport, SolverConfig
from .vpal import VPAL, vpal_solve
from .windowed import StreamReconstructor, WindowSchedule, make_windows, stream_step, vpal_windowed_solve

__version__ = "1.0.0"

__all__ = [
    "ADMM",
    "Config",
    "Dataset",
    "ExperimentConfig",
    "FISTA",
    "Iterate",
    "MeshGraph",
    "MetricReport",
    "Problem",
    "SLORETA",
    "SolveReport",
    "Solver",
    "SolverConfig",
    "SourceSpec",
    "StreamReconstructor",
    "VPAL",
    "WindowSchedule",
    "admm_solve",
    "emit_report",
    "evaluate",
    "fista_solve",
    "load_dataset",
    "load_mesh",
    "make_dataset",
    "make_windows",
    "run_compare",
    "run_grid",
    "run_scale",
    "run_simulate",
    "run_solve",
    "run_stream",
    "save_dataset",
    "save_mesh",
    "sloreta_solve",
    "stream_step",
    "vpal_solve",
    "vpal_windowed_solve",
]
