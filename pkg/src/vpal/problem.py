"""vpal problem module.

The graph-regularized generalized elastic-net problem::

    min_X  1/2 ||L X - B||_F^2 + lam^2/2 ||X D1||_F^2 + mu ||D2 X||_1,1

and its split form with ``Y = D2 X`` and scaled multipliers ``C``, whose augmented Lagrangian is::

    1/2 ||L X - B||^2 + lam^2/2 ||X D1||^2 + mu ||Y||_1 + eta^2/2 ||D2 X - Y + C||^2 - eta^2/2 ||C||^2

Every method that applies an operator accepts an optional ``counts`` counter, so solvers can
instrument how often they apply L, L^T and D2 while the problem itself stays immutable.

This module provides:
- Problem
- Iterate
- objective
- aug_lagrangian
- shrink
- grad_x
- f_proj
"""

from __future__ import annotations

from collections import Counter
from typing import TYPE_CHECKING, Union

import numpy as np
import scipy.sparse

from .linalg import kron_left_apply, kron_right_adjoint, kron_right_apply

if TYPE_CHECKING:
    from .graph import MeshGraph

LeadfieldT = Union[np.ndarray, scipy.sparse.spmatrix]
OpCountsT = Counter  # keys: forward, adjoint, graphtv, linear_solve, factorization


def _tick(counts: OpCountsT | None, key: str, n: int = 1) -> None:
    if counts is not None:
        counts[key] += n


def _sq(A: np.ndarray) -> float:
    return float(np.vdot(A, A))


class Problem:
    """Immutable bundle of lead field, data, mesh and hyperparameters.

    Attributes:
        leadfield (ndarray or sparse matrix): Lead field L, p x n.
        data (ndarray): Observations B, p x T (read-only).
        mesh (MeshGraph): Spatial graph with n nodes.
        lam (float): Time regularization weight, >= 0.
        mu (float): Sparsity weight, >= 0.
        eta (float): Augmented Lagrangian penalty parameter, > 0.

    Examples: ::

        >>> g = MeshGraph(np.zeros((2, 3)), [(0, 1)])
        >>> prob = Problem(np.eye(2), np.ones((2, 3)), g, lam=0.1, mu=0.01)
        >>> prob.objective(np.ones((2, 3)))
        0.0
    """

    def __init__(
        self,
        leadfield: LeadfieldT,
        data: np.ndarray,
        mesh: MeshGraph,
        lam: float = 0.0,
        mu: float = 0.0,
        eta: float = 10.0,
    ) -> None:
        """Constructor.

        Arguments:
            leadfield (ndarray or sparse matrix): Lead field L, p x n.
            data (ndarray): Observations B, p x T; a 1-D array is one time point.
            mesh (MeshGraph): Spatial graph; its node count must equal the column count of L.
            lam (float, optional): Time regularization weight.
            mu (float, optional): Sparsity weight.
            eta (float, optional): Penalty parameter.

        Raises:
            ValueError: Dimensions disagree, values are not finite, or a weight is out of range.
        """
        if scipy.sparse.issparse(leadfield):
            L = scipy.sparse.csr_matrix(leadfield, dtype=np.float64)
            finite = np.all(np.isfinite(L.data))
        elif isinstance(leadfield, np.ndarray) and leadfield.dtype == np.float64 and leadfield.ndim == 2 and not leadfield.flags.writeable:  # noqa: PLR2004
            L = leadfield  # shared with the problem it was taken from
            finite = True
        else:
            L = np.array(leadfield, dtype=np.float64, order="C", ndmin=2)
            finite = np.all(np.isfinite(L))
            L.setflags(write=False)
        if not finite:
            msg = "Lead field must be finite"
            raise ValueError(msg)

        B = np.array(data, dtype=np.float64, order="C")
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.ndim != 2:  # noqa: PLR2004
            msg = "Data must be a p x T matrix"
            raise ValueError(msg)
        if not np.all(np.isfinite(B)):
            msg = "Data must be finite"
            raise ValueError(msg)
        B.setflags(write=False)

        if L.shape[1] != mesh.num_nodes:
            msg = f"Lead field has {L.shape[1]} columns but the mesh has {mesh.num_nodes} nodes"
            raise ValueError(msg)
        if B.shape[0] != L.shape[0]:
            msg = f"Data has {B.shape[0]} rows but the lead field has {L.shape[0]}"
            raise ValueError(msg)

        if not (np.isfinite(lam) and lam >= 0):
            msg = "lam must be finite and non-negative"
            raise ValueError(msg)
        if not (np.isfinite(mu) and mu >= 0):
            msg = "mu must be finite and non-negative"
            raise ValueError(msg)
        if not (np.isfinite(eta) and eta > 0):
            msg = "eta must be finite and positive"
            raise ValueError(msg)

        self.leadfield = L
        self.data = B
        self.mesh = mesh
        self.lam = float(lam)
        self.mu = float(mu)
        self.eta = float(eta)

    def __repr__(self) -> str:
        """Returns a short description."""
        p, n, T = self.num_sensors, self.num_nodes, self.num_times
        return f"Problem(p={p}, n={n}, T={T}, lam={self.lam:g}, mu={self.mu:g}, eta={self.eta:g})"

    @property
    def num_sensors(self) -> int:
        """Number of sensors p."""
        return self.leadfield.shape[0]

    @property
    def num_nodes(self) -> int:
        """Number of mesh nodes n."""
        return self.mesh.num_nodes

    @property
    def num_edges(self) -> int:
        """Number of mesh edges m."""
        return self.mesh.num_edges

    @property
    def num_times(self) -> int:
        """Number of time points T."""
        return self.data.shape[1]

    @property
    def has_time_term(self) -> bool:
        """True if the time regularization term is present (``lam > 0`` and at least two time points)."""
        return self.lam > 0 and self.num_times >= 2  # noqa: PLR2004

    def replace(self, **changes) -> Problem:
        """Return a copy with some of ``leadfield``, ``data``, ``mesh``, ``lam``, ``mu``, ``eta`` replaced.

        Raises:
            ValueError: Unknown field name.
        """
        fields = {
            "leadfield": self.leadfield,
            "data": self.data,
            "mesh": self.mesh,
            "lam": self.lam,
            "mu": self.mu,
            "eta": self.eta,
        }
        unknown = set(changes) - set(fields)
        if unknown:
            msg = f"Unknown problem fields: {', '.join(sorted(unknown))}"
            raise ValueError(msg)
        fields.update(changes)
        return Problem(**fields)

    def window(self, start: int, stop: int) -> Problem:
        """Return the same problem restricted to data columns ``[start, stop)``.

        Raises:
            ValueError: Empty or out-of-range window.
        """
        if not 0 <= start < stop <= self.num_times:
            msg = f"Window [{start}, {stop}) is not inside [0, {self.num_times})"
            raise ValueError(msg)
        return self.replace(data=self.data[:, start:stop])

    def zeros(self) -> np.ndarray:
        """Zero source field, n x T."""
        return np.zeros((self.num_nodes, self.num_times))

    def check_field(self, X: np.ndarray, rows: int | None = None, name: str = "X") -> None:
        """Validate the shape of a field.

        Raises:
            ValueError: ``X`` is not ``rows x T``.
        """
        rows = self.num_nodes if rows is None else rows
        if X.shape != (rows, self.num_times):
            msg = f"{name} has shape {X.shape}, expected {(rows, self.num_times)}"
            raise ValueError(msg)

    # Operators

    def forward(self, X: np.ndarray, counts: OpCountsT | None = None) -> np.ndarray:
        """``L X``."""
        _tick(counts, "forward")
        return kron_left_apply(self.leadfield, X)

    def adjoint(self, R: np.ndarray, counts: OpCountsT | None = None) -> np.ndarray:
        """``L^T R``."""
        _tick(counts, "adjoint")
        return np.asarray(self.leadfield.T @ R)

    def graphtv(self, X: np.ndarray, counts: OpCountsT | None = None) -> np.ndarray:
        """``D2 X``."""
        _tick(counts, "graphtv")
        return self.mesh.graphtv(X)

    def graphtv_adjoint(self, Y: np.ndarray, counts: OpCountsT | None = None) -> np.ndarray:
        """``D2^T Y``."""
        _tick(counts, "graphtv")
        return self.mesh.graphtv_adjoint(Y)

    def residual(self, X: np.ndarray, counts: OpCountsT | None = None) -> np.ndarray:
        """``L X - B``."""
        return self.forward(X, counts) - self.data

    def time_penalty(self, X: np.ndarray) -> float:
        """``||X D1||_F^2``, zero for a single time point."""
        if self.num_times < 2:  # noqa: PLR2004
            return 0.0
        return _sq(kron_right_apply(X))

    def time_gram_apply(self, X: np.ndarray) -> np.ndarray:
        """``lam^2 X D1 D1^T``, zero without a time term."""
        if not self.has_time_term:
            return np.zeros_like(X)
        return self.lam**2 * kron_right_adjoint(kron_right_apply(X))

    # Objectives

    def objective(self, X: np.ndarray, counts: OpCountsT | None = None) -> float:
        """The generalized elastic-net objective at ``X``.

        Returns:
            float: ``1/2 ||LX-B||^2 + lam^2/2 ||X D1||^2 + mu ||D2 X||_1,1``.
        """
        self.check_field(X)
        value = 0.5 * _sq(self.residual(X, counts))
        if self.has_time_term:
            value += 0.5 * self.lam**2 * self.time_penalty(X)
        if self.mu > 0:
            value += self.mu * float(np.abs(self.graphtv(X, counts)).sum())
        return value

    def smooth(self, X: np.ndarray, Y: np.ndarray, C: np.ndarray, counts: OpCountsT | None = None) -> float:
        """The smooth part of the augmented Lagrangian (everything except ``mu ||Y||_1``)."""
        self.check_field(X)
        eta2 = self.eta**2
        value = 0.5 * _sq(self.residual(X, counts))
        if self.has_time_term:
            value += 0.5 * self.lam**2 * self.time_penalty(X)
        value += 0.5 * eta2 * _sq(self.graphtv(X, counts) - Y + C)
        value -= 0.5 * eta2 * _sq(C)
        return value

    def h(self, X: np.ndarray, Y: np.ndarray, C: np.ndarray, counts: OpCountsT | None = None) -> float:
        """The augmented Lagrangian at ``(X, Y, C)``, the level-set function monitored by backtracking."""
        return self.smooth(X, Y, C, counts) + self.mu * float(np.abs(Y).sum())

    def aug_lagrangian(self, it: Iterate, counts: OpCountsT | None = None) -> float:
        """The augmented Lagrangian at an iterate."""
        return self.h(it.X, it.Y, it.C, counts)

    def shrink(self, X: np.ndarray, C: np.ndarray, counts: OpCountsT | None = None) -> np.ndarray:
        """The optimal ``Y`` for fixed ``X`` and ``C``: soft thresholding of ``D2 X + C`` at ``mu / eta^2``.

        Entries whose magnitude equals the threshold map to zero.
        """
        V = self.graphtv(X, counts) + C
        return soft_threshold(V, self.mu / self.eta**2)

    def f_proj(self, X: np.ndarray, C: np.ndarray, counts: OpCountsT | None = None) -> float:
        """Projected objective: the augmented Lagrangian at ``Y = shrink(X, C)`` without its ``-eta^2/2 ||C||^2`` term."""
        Y = self.shrink(X, C, counts)
        return self.h(X, Y, C, counts) + 0.5 * self.eta**2 * _sq(C)

    # Derivatives

    def grad_smooth(self, X: np.ndarray, counts: OpCountsT | None = None) -> np.ndarray:
        """Gradient of ``1/2 ||LX-B||^2 + lam^2/2 ||X D1||^2``."""
        return self.adjoint(self.residual(X, counts), counts) + self.time_gram_apply(X)

    def grad_x(self, X: np.ndarray, Y: np.ndarray, C: np.ndarray, counts: OpCountsT | None = None) -> np.ndarray:
        """Gradient of the augmented Lagrangian with respect to ``X`` for fixed ``Y`` and ``C``.

        Returns:
            ndarray: ``L^T (LX - B) + lam^2 X D1 D1^T + eta^2 D2^T (D2 X - Y + C)``.
        """
        self.check_field(X)
        G = self.grad_smooth(X, counts)
        G += self.eta**2 * self.graphtv_adjoint(self.graphtv(X, counts) - Y + C, counts)
        return G

    def hessian_apply(self, S: np.ndarray, counts: OpCountsT | None = None) -> np.ndarray:
        """Hessian of the smooth part applied to ``S``: ``L^T L S + eta^2 D2^T D2 S + lam^2 S D1 D1^T``."""
        HS = self.adjoint(self.forward(S, counts), counts) + self.time_gram_apply(S)
        HS += self.eta**2 * self.graphtv_adjoint(self.graphtv(S, counts), counts)
        return HS


def soft_threshold(V: np.ndarray, kappa: float) -> np.ndarray:
    """Elementwise ``sign(v) max(|v| - kappa, 0)``; returns ``V`` itself when ``kappa`` is zero."""
    if kappa == 0:
        return V
    return np.sign(V) * np.maximum(np.abs(V) - kappa, 0.0)


class Iterate:
    """Primal, auxiliary and scaled multiplier fields ``(X, Y, C)``."""

    def __init__(self, X: np.ndarray, Y: np.ndarray, C: np.ndarray) -> None:
        """Constructor.

        Arguments:
            X (ndarray): Sources, n x T.
            Y (ndarray): Auxiliary edge field, m x T.
            C (ndarray): Scaled multipliers, m x T.
        """
        self.X = X
        self.Y = Y
        self.C = C

    @classmethod
    def initial(cls, problem: Problem, X0: np.ndarray | None = None, counts: OpCountsT | None = None) -> Iterate:
        """Starting iterate: ``X0`` (default zeros), ``C = 0`` and ``Y = shrink(X0, 0)``.

        Raises:
            ValueError: ``X0`` has the wrong shape or is not finite.
        """
        if X0 is None:
            X = problem.zeros()
        else:
            X = np.array(X0, dtype=np.float64)
            problem.check_field(X, name="X0")
            if not np.all(np.isfinite(X)):
                msg = "X0 must be finite"
                raise ValueError(msg)
        C = np.zeros((problem.num_edges, problem.num_times))
        return cls(X, problem.shrink(X, C, counts), C)

    def copy(self) -> Iterate:
        """Deep copy."""
        return Iterate(self.X.copy(), self.Y.copy(), self.C.copy())

    def is_finite(self) -> bool:
        """True if every field is finite."""
        return bool(np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y)) and np.all(np.isfinite(self.C)))


def objective(prob: Problem, X: np.ndarray) -> float:
    """See :py:meth:`Problem.objective`."""
    return prob.objective(X)


def aug_lagrangian(prob: Problem, it: Iterate) -> float:
    """See :py:meth:`Problem.aug_lagrangian`."""
    return prob.aug_lagrangian(it)


def shrink(prob: Problem, X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """See :py:meth:`Problem.shrink`."""
    return prob.shrink(X, C)


def grad_x(prob: Problem, it: Iterate) -> np.ndarray:
    """See :py:meth:`Problem.grad_x`."""
    return prob.grad_x(it.X, it.Y, it.C)


def f_proj(prob: Problem, X: np.ndarray, C: np.ndarray) -> float:
    """See :py:meth:`Problem.f_proj`."""
    return prob.f_proj(X, C)
