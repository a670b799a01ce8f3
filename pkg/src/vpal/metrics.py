"""vpal metrics module.

Reconstruction quality of a source estimate ``X`` against the ground truth ``X_true``.

This module provides:
- MetricReport
- psnr
- rel_error
- ssim
- sed
- sparsity_ratio
- evaluate
"""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .graph import MeshGraph

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ("psnr", "rel_error", "ssim", "sed", "sparsity")

SSIM_WINDOW = 8
SPARSITY_TAU = 1e-8


def _check_shapes(X: np.ndarray, X_true: np.ndarray) -> None:
    if X.shape != X_true.shape:
        msg = f"Shapes differ: {X.shape} and {X_true.shape}"
        raise ValueError(msg)


def psnr(X: np.ndarray, X_true: np.ndarray) -> float:
    """Peak signal-to-noise ratio ``10 log10(max(X)^2 / ||X - X_true||_F^2)`` in decibels.

    The peak is the largest entry of the reconstruction ``X``; the error is not divided by the
    element count.

    Returns:
        float: PSNR; ``inf`` if ``X == X_true``, ``-inf`` (with a warning) if ``max(X) <= 0``.

    Examples: ::

        >>> psnr(np.array([[2.0, 0.0]]), np.array([[0.0, 0.0]]))
        0.0
    """
    _check_shapes(X, X_true)
    err2 = float(np.sum((X - X_true) ** 2))
    if err2 == 0:
        return math.inf
    peak = float(np.max(X))
    if peak <= 0:
        logger.warning("psnr: reconstruction has no positive entry")
        return -math.inf
    return 10.0 * math.log10(peak * peak / err2)


def rel_error(X: np.ndarray, X_true: np.ndarray) -> float:
    """Relative error ``||X - X_true||_F / ||X_true||_F``.

    Raises:
        ValueError: ``X_true`` is zero.
    """
    _check_shapes(X, X_true)
    norm = float(np.linalg.norm(X_true))
    if norm == 0:
        msg = "Relative error is undefined for a zero ground truth"
        raise ValueError(msg)
    return float(np.linalg.norm(X - X_true)) / norm


def _box_mean(A: np.ndarray, w: int) -> np.ndarray:
    """Means of all w x w windows (stride 1) from an integral image."""
    S = np.zeros((A.shape[0] + 1, A.shape[1] + 1))
    S[1:, 1:] = A.cumsum(axis=0).cumsum(axis=1)
    return (S[w:, w:] - S[:-w, w:] - S[w:, :-w] + S[:-w, :-w]) / (w * w)


def ssim(X: np.ndarray, X_true: np.ndarray, window: int = SSIM_WINDOW) -> float:
    """Structural similarity of the n x T matrices viewed as grayscale images.

    Windows are ``window x window`` (shrunk to the matrix extent when smaller) at stride 1,
    with population statistics, dynamic range ``max(X_true) - min(X_true)``,
    ``C1 = (0.01 range)^2`` and ``C2 = (0.03 range)^2``. The result is the mean over windows.

    Raises:
        ValueError: The ground truth is constant while ``X`` differs from it.
    """
    _check_shapes(X, X_true)
    dyn = float(np.max(X_true) - np.min(X_true))
    if dyn == 0:
        if np.array_equal(X, X_true):
            return 1.0
        msg = "SSIM is undefined for a constant ground truth"
        raise ValueError(msg)

    w = min(window, *X.shape)
    c1 = (0.01 * dyn) ** 2
    c2 = (0.03 * dyn) ** 2

    mx = _box_mean(X, w)
    my = _box_mean(X_true, w)
    vx = _box_mean(X * X, w) - mx * mx
    vy = _box_mean(X_true * X_true, w) - my * my
    cxy = _box_mean(X * X_true, w) - mx * my

    index = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(index.mean())


def sed(X: np.ndarray, X_true: np.ndarray, mesh: MeshGraph) -> float:
    """Source error distance.

    For each time point the Euclidean distance between the nodes of largest magnitude in
    ``X`` and in ``X_true``, averaged over time points. Time points where ``X_true`` is zero
    are skipped.

    Raises:
        ValueError: ``X_true`` is zero at every time point.
    """
    _check_shapes(X, X_true)
    keep = np.any(X_true != 0, axis=0)
    if not np.any(keep):
        msg = "Ground truth is zero at every time point"
        raise ValueError(msg)

    est = np.argmax(np.abs(X[:, keep]), axis=0)
    ref = np.argmax(np.abs(X_true[:, keep]), axis=0)
    return float(np.linalg.norm(mesh.coords[est] - mesh.coords[ref], axis=1).mean())


def sparsity_ratio(X: np.ndarray, mesh: MeshGraph, tau: float = SPARSITY_TAU) -> float:
    """Nonzero entries of ``D2 X`` divided by the element count of ``X``.

    An entry counts as nonzero if its magnitude exceeds ``tau`` times the largest magnitude.
    The ratio exceeds 1 when the mesh has more edges than nodes and ``D2 X`` is dense.
    """
    D = np.abs(mesh.graphtv(X))
    peak = float(D.max()) if D.size else 0.0
    if peak == 0:
        return 0.0
    return int(np.count_nonzero(D > tau * peak)) / X.size


class MetricReport:
    """The five reconstruction metrics of one estimate."""

    def __init__(self, psnr: float, rel_error: float, ssim: float, sed: float, sparsity: float) -> None:
        """Constructor."""
        self.psnr = psnr
        self.rel_error = rel_error
        self.ssim = ssim
        self.sed = sed
        self.sparsity = sparsity

    def __repr__(self) -> str:
        """Returns the metrics as keyword arguments."""
        return "MetricReport(" + ", ".join(f"{k}={v!r}" for k, v in self.as_dict().items()) + ")"

    def as_dict(self) -> dict[str, float]:
        """Metrics by column name."""
        return {name: getattr(self, name) for name in METRIC_COLUMNS}

    def csv_row(self) -> str:
        """One CSV row ``psnr,rel_error,ssim,sed,sparsity``."""
        return ",".join(repr(float(v)) for v in self.as_dict().values())


def evaluate(X: np.ndarray, X_true: np.ndarray, mesh: MeshGraph) -> MetricReport:
    """All five metrics of ``X`` against ``X_true``."""
    return MetricReport(
        psnr=psnr(X, X_true),
        rel_error=rel_error(X, X_true),
        ssim=ssim(X, X_true),
        sed=sed(X, X_true, mesh),
        sparsity=sparsity_ratio(X, mesh),
    )
