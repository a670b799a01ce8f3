"""vpal report module.

Experiment outputs: CSV tables, SVG line plots and heatmaps, a text summary and a manifest.
File names are fixed by the caller and every file is written deterministically; SVG files
embed glyphs as paths and carry no timestamp.

This module provides:
- Table
- LinePlot
- Heatmap
- ReportBundle
- emit_report
- write_manifest
"""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import TYPE_CHECKING, Any, Union

import matplotlib as mpl
import numpy as np
from matplotlib.colors import LogNorm
from matplotlib.figure import Figure

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = logging.getLogger(__name__)

PathT = Union[str, Path]
CellT = Union[str, int, float, None]

_SVG_RC = {
    "svg.fonttype": "path",
    "svg.hashsalt": "vpal",
}


def format_cell(value: CellT) -> str:
    """CSV text of a cell: floats with ``repr``, None as empty.

    Examples: ::

        >>> format_cell(0.1), format_cell(None), format_cell('div')
        ('0.1', '', 'div')
    """
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class Table:
    """CSV table with a fixed header."""

    def __init__(self, header: Sequence[str], rows: list[Sequence[CellT]] | None = None) -> None:
        """Constructor."""
        self.header = tuple(header)
        self.rows: list[Sequence[CellT]] = [] if rows is None else rows

    def add(self, *cells: CellT) -> None:
        """Append a row.

        Raises:
            ValueError: Cell count differs from the header.
        """
        if len(cells) != len(self.header):
            msg = f"Row has {len(cells)} cells, header has {len(self.header)}"
            raise ValueError(msg)
        self.rows.append(cells)

    def write(self, path: PathT) -> None:
        """Write the table as CSV."""
        with Path(path).open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(self.header)
            writer.writerows([format_cell(c) for c in row] for row in self.rows)


class LinePlot:
    """Line plot with optional error bars; one series per label."""

    def __init__(self, title: str, xlabel: str, ylabel: str, logy: bool = False) -> None:
        """Constructor."""
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.logy = logy
        self.series: dict[str, tuple[list[float], list[float], list[float] | None]] = {}

    def add(self, label: str, x: Sequence[float], y: Sequence[float], yerr: Sequence[float] | None = None) -> None:
        """Add a series."""
        self.series[label] = (list(x), list(y), None if yerr is None else list(yerr))

    @property
    def empty(self) -> bool:
        """True if no series holds a point."""
        return not any(x for x, _, _ in self.series.values())

    def write(self, path: PathT) -> None:
        """Render as SVG."""
        fig = Figure(figsize=(6.4, 4.0))
        ax = fig.add_subplot()
        for label in sorted(self.series):
            x, y, yerr = self.series[label]
            if yerr is None:
                ax.plot(x, y, marker="o", markersize=3, label=label)
            else:
                ax.errorbar(x, y, yerr=yerr, marker="o", markersize=3, capsize=3, label=label)
        if self.logy:
            ax.set_yscale("log")
        ax.set_title(self.title)
        ax.set_xlabel(self.xlabel)
        ax.set_ylabel(self.ylabel)
        ax.grid(visible=True, alpha=0.3)
        ax.legend()
        _save_svg(fig, path)


class Heatmap:
    """Matrix of values on a labeled grid; missing cells (None or non-finite) are shown as 'div'."""

    def __init__(
        self,
        title: str,
        values: list[list[float | None]],
        row_labels: Sequence[str],
        col_labels: Sequence[str],
        row_name: str = "",
        col_name: str = "",
    ) -> None:
        """Constructor."""
        self.title = title
        self.values = values
        self.row_labels = list(row_labels)
        self.col_labels = list(col_labels)
        self.row_name = row_name
        self.col_name = col_name

    @property
    def empty(self) -> bool:
        """True if the matrix has no cells."""
        return not self.values or not self.values[0]

    def write(self, path: PathT) -> None:
        """Render as SVG."""
        data = np.array([[np.nan if v is None else v for v in row] for row in self.values], dtype=np.float64)
        finite = data[np.isfinite(data) & (data > 0)]
        norm = LogNorm(vmin=finite.min(), vmax=finite.max()) if finite.size and finite.max() > finite.min() else None

        fig = Figure(figsize=(6.4, 5.2))
        ax = fig.add_subplot()
        image = ax.imshow(np.ma.masked_invalid(data), cmap="viridis", norm=norm, origin="lower")
        fig.colorbar(image, ax=ax)

        for i, row in enumerate(data):
            for j, v in enumerate(row):
                text = "div" if not math.isfinite(v) else f"{v:.2g}"
                ax.text(j, i, text, ha="center", va="center", fontsize=6, color="white" if not math.isfinite(v) else "black")

        ax.set_xticks(range(len(self.col_labels)), self.col_labels, rotation=45, fontsize=7)
        ax.set_yticks(range(len(self.row_labels)), self.row_labels, fontsize=7)
        ax.set_xlabel(self.col_name)
        ax.set_ylabel(self.row_name)
        ax.set_title(self.title)
        _save_svg(fig, path)


def _save_svg(fig: Figure, path: PathT) -> None:
    with mpl.rc_context(_SVG_RC):
        fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")


class ReportBundle:
    """Everything an experiment writes: tables, plots and summary lines, keyed by file name."""

    def __init__(self) -> None:
        """Constructor."""
        self.tables: dict[str, Table] = {}
        self.plots: dict[str, LinePlot | Heatmap] = {}
        self.summary: list[str] = []

    def table(self, name: str, header: Sequence[str]) -> Table:
        """Create (or return) the table written to ``name``."""
        if name not in self.tables:
            self.tables[name] = Table(header)
        return self.tables[name]


def emit_report(results: ReportBundle, outdir: PathT) -> list[Path]:
    """Write a report bundle into ``outdir``.

    Tables are always written (header only when empty); plots without data are skipped;
    the summary goes to ``summary.txt``.

    Returns:
        list: Paths written, in order.

    Raises:
        OSError: ``outdir`` cannot be created or written.
    """
    root = Path(outdir)
    root.mkdir(parents=True, exist_ok=True)
    written = []

    for name in sorted(results.tables):
        path = root / name
        results.tables[name].write(path)
        written.append(path)

    for name in sorted(results.plots):
        plot = results.plots[name]
        if plot.empty:
            logger.debug("report: skipping empty plot %s", name)
            continue
        path = root / name
        plot.write(path)
        written.append(path)

    if results.summary:
        path = root / "summary.txt"
        path.write_text("\n".join(results.summary) + "\n", encoding="utf-8")
        written.append(path)

    logger.info("report: wrote %d files to %s", len(written), root)
    return written


def write_manifest(outdir: PathT, command: str, settings: dict[str, Any]) -> Path:
    """Write ``manifest.txt`` with the command, every setting and the library versions."""
    import scipy  # noqa: PLC0415

    from . import __version__  # noqa: PLC0415

    lines = [
        f"command={command}",
        *(f"{k}={v}" for k, v in sorted(settings.items())),
        f"vpal_version={__version__}",
        f"numpy_version={np.__version__}",
        f"scipy_version={scipy.__version__}",
        f"matplotlib_version={mpl.__version__}",
    ]
    path = Path(outdir) / "manifest.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
