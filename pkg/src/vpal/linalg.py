"""vpal linalg module.

Matrix-form applications of the Kronecker-structured operators of the vectorized problem,
the symmetric Sylvester solver used by ADMM and ``scipy`` linear operator wrappers.

Vectorization is column-major throughout: ``vec(X) = X.ravel(order="F")``, so that
``(I_T kron L) vec(X) = vec(L X)`` and ``(D1^T kron I_n) vec(X) = vec(X D1)``.

This module provides:
- kron_left_apply
- kron_right_apply
- kron_right_adjoint
- timediff_matrix
- timediff_gram
- SylvesterSolver
- solve_sylvester
- leadfield_operator
- timediff_operator
- graphtv_operator
- stacked_operator
- adjoint_mismatch
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Literal, Union

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.linalg import LinearOperator

if TYPE_CHECKING:
    from .graph import MeshGraph
    from .problem import Problem

MatrixT = Union[np.ndarray, scipy.sparse.spmatrix]
SylvesterMethodT = Literal["auto", "cholesky", "eigh"]

# Cholesky factors of every shifted system are kept while they fit in this many bytes
_CHOLESKY_BUDGET = 512 * 1024 * 1024


def kron_left_apply(L: MatrixT, X: np.ndarray) -> np.ndarray:
    """Apply ``I_T kron L`` to ``vec(X)`` in matrix form.

    Arguments:
        L (ndarray or sparse matrix): Left factor, p x n.
        X (ndarray): Field, n x T.

    Returns:
        ndarray: ``L @ X``, p x T.

    Raises:
        ValueError: Inner dimensions disagree.

    Examples: ::

        >>> kron_left_apply(np.array([[1.0, 1.0]]), np.array([[1.0, 2.0], [3.0, 4.0]]))
        array([[4., 6.]])
    """
    if L.shape[1] != X.shape[0]:
        msg = f"Operator has {L.shape[1]} columns but field has {X.shape[0]} rows"
        raise ValueError(msg)
    return np.asarray(L @ X)


def kron_right_apply(X: np.ndarray) -> np.ndarray:
    """Apply the time-difference operator ``D1^T kron I_n`` in matrix form.

    Column ``i`` of the result is ``x_i - x_{i+1}``.

    Arguments:
        X (ndarray): Field, n x T with T >= 2.

    Returns:
        ndarray: ``X @ D1``, n x (T-1).

    Raises:
        ValueError: Fewer than two time points.

    Examples: ::

        >>> kron_right_apply(np.array([[1.0, 3.0, 6.0]]))
        array([[-2., -3.]])
    """
    if X.ndim != 2 or X.shape[1] < 2:  # noqa: PLR2004
        msg = "Time differences need a 2-D field with at least two time points"
        raise ValueError(msg)
    return X[:, :-1] - X[:, 1:]


def kron_right_adjoint(Z: np.ndarray) -> np.ndarray:
    """Apply the adjoint of :py:func:`kron_right_apply`.

    Arguments:
        Z (ndarray): Differences, n x (T-1) with T >= 2.

    Returns:
        ndarray: ``Z @ D1^T``, n x T.
    """
    if Z.ndim != 2 or Z.shape[1] < 1:
        msg = "Time-difference adjoint needs a 2-D field with at least one column"
        raise ValueError(msg)
    out = np.zeros((Z.shape[0], Z.shape[1] + 1))
    out[:, :-1] += Z
    out[:, 1:] -= Z
    return out


def timediff_matrix(T: int) -> np.ndarray:
    """Dense time-difference matrix ``D1``, T x (T-1), with ``(X D1)[:, i] = x_i - x_{i+1}``."""
    if T < 2:  # noqa: PLR2004
        msg = "Time differences need at least two time points"
        raise ValueError(msg)
    D1 = np.zeros((T, T - 1))
    idx = np.arange(T - 1)
    D1[idx, idx] = 1.0
    D1[idx + 1, idx] = -1.0
    return D1


def timediff_gram(T: int) -> np.ndarray:
    """Dense ``D1 @ D1^T``, the T x T path-graph Laplacian induced by the time differences."""
    D1 = timediff_matrix(T)
    return D1 @ D1.T


class SylvesterSolver:
    """Solver for the symmetric Sylvester equation ``HtH X + lambda2 X M = RHS``.

    ``M = Q diag(ev) Q^T`` is diagonalized once; in the rotated basis ``X Q`` the equation
    splits into T independent shifted systems ``(HtH + lambda2 ev_i I) x_i = (RHS Q)_i``.
    With the default ``method='auto'`` each shifted system keeps its own Cholesky factor
    while they fit in memory; larger problems diagonalize ``HtH`` once instead.

    The factorization happens in the constructor, so one solver serves every ADMM iteration.

    Examples: ::

        >>> s = SylvesterSolver(np.eye(2), np.eye(2), 1.0)
        >>> s.solve(np.ones((2, 2)))
        array([[0.5, 0.5],
               [0.5, 0.5]])
    """

    def __init__(self, hth: np.ndarray, gram: np.ndarray, lambda2: float, method: SylvesterMethodT = "auto") -> None:
        """Constructor.

        Arguments:
            hth (ndarray): Symmetric positive definite n x n matrix.
            gram (ndarray): Symmetric positive semidefinite T x T matrix.
            lambda2 (float): Non-negative coupling weight.
            method (string, optional): 'cholesky', 'eigh' or 'auto'.

        Raises:
            ValueError: Shapes are not square or ``lambda2`` is negative.
            numpy.linalg.LinAlgError: ``hth`` (plus shift) is not positive definite to working precision.
        """
        hth = np.asarray(hth, dtype=np.float64)
        gram = np.asarray(gram, dtype=np.float64)

        if hth.ndim != 2 or hth.shape[0] != hth.shape[1]:  # noqa: PLR2004
            msg = "HtH must be a square matrix"
            raise ValueError(msg)
        if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:  # noqa: PLR2004
            msg = "M must be a square matrix"
            raise ValueError(msg)
        if lambda2 < 0:
            msg = "lambda2 must be non-negative"
            raise ValueError(msg)

        n = hth.shape[0]
        T = gram.shape[0]

        self.shape = (n, T)
        self.lambda2 = float(lambda2)
        self.num_factorizations = 0

        if method == "auto":
            method = "cholesky" if n * n * T * 8 <= _CHOLESKY_BUDGET else "eigh"
        self.method = method

        if self.lambda2 == 0.0 or not np.any(gram):
            # Decoupled columns share one factor
            self._basis = None
            self._shifts = np.zeros(T)
        else:
            shifts, self._basis = scipy.linalg.eigh(gram)
            self._shifts = self.lambda2 * np.clip(shifts, 0.0, None)

        if method == "cholesky":
            self._factors = [self._cho_factor(hth, shift) for shift in (self._shifts if self._basis is not None else self._shifts[:1])]
        elif method == "eigh":
            self._hth_evals, self._hth_evecs = scipy.linalg.eigh(hth)
            self.num_factorizations += 1
            if self._hth_evals[0] <= np.finfo(np.float64).eps * max(abs(self._hth_evals[-1]), 1.0) * n:
                msg = "HtH is singular to working precision"
                raise np.linalg.LinAlgError(msg)
        else:
            msg = f"Unknown Sylvester method '{method}'"
            raise ValueError(msg)

    def _cho_factor(self, hth: np.ndarray, shift: float) -> tuple[np.ndarray, bool]:
        shifted = hth if shift == 0.0 else hth + shift * np.eye(hth.shape[0])
        try:
            factor = scipy.linalg.cho_factor(shifted, lower=True, check_finite=True)
        except np.linalg.LinAlgError as e:
            msg = f"HtH is singular to working precision (Cholesky failed: {e})"
            raise np.linalg.LinAlgError(msg) from e
        self.num_factorizations += 1
        return factor

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for X given the right-hand side.

        Arguments:
            rhs (ndarray): Right-hand side, n x T.

        Returns:
            ndarray: Solution X, n x T.
        """
        rhs = np.asarray(rhs, dtype=np.float64)
        if rhs.shape != self.shape:
            msg = f"Right-hand side has shape {rhs.shape}, expected {self.shape}"
            raise ValueError(msg)

        rotated = rhs if self._basis is None else rhs @ self._basis

        if self.method == "eigh":
            V = self._hth_evecs
            core = (V.T @ rotated) / (self._hth_evals[:, None] + self._shifts[None, :])
            solved = V @ core
        elif self._basis is None:
            solved = scipy.linalg.cho_solve(self._factors[0], rotated)
        else:
            solved = np.empty_like(rotated)
            for i, factor in enumerate(self._factors):
                solved[:, i] = scipy.linalg.cho_solve(factor, rotated[:, i])

        return solved if self._basis is None else solved @ self._basis.T


def solve_sylvester(hth: np.ndarray, gram: np.ndarray, lambda2: float, rhs: np.ndarray) -> np.ndarray:
    """Solve ``HtH X + lambda2 X M = RHS`` once.

    Arguments:
        hth (ndarray): Symmetric positive definite n x n matrix.
        gram (ndarray): Symmetric positive semidefinite T x T matrix, typically ``D1 D1^T``.
        lambda2 (float): Non-negative coupling weight.
        rhs (ndarray): Right-hand side, n x T.

    Returns:
        ndarray: Solution X, n x T.

    Raises:
        numpy.linalg.LinAlgError: ``hth`` is singular to working precision.

    See Also:
        :py:class:`SylvesterSolver` to reuse the factorization.
    """
    return SylvesterSolver(hth, gram, lambda2).solve(rhs)


def _vec_operator(shape: tuple[int, int], in_shape: tuple[int, int], out_shape: tuple[int, int], fwd, adj) -> LinearOperator:  # noqa: ANN001
    def matvec(v: np.ndarray) -> np.ndarray:
        return fwd(np.reshape(v, in_shape, order="F")).ravel(order="F")

    def rmatvec(u: np.ndarray) -> np.ndarray:
        return adj(np.reshape(u, out_shape, order="F")).ravel(order="F")

    return LinearOperator(shape, matvec=matvec, rmatvec=rmatvec, dtype=np.float64)


def leadfield_operator(L: MatrixT, T: int) -> LinearOperator:
    """``I_T kron L`` acting on ``vec(X)``."""
    p, n = L.shape
    return _vec_operator((p * T, n * T), (n, T), (p, T), lambda X: kron_left_apply(L, X), lambda R: np.asarray(L.T @ R))


def timediff_operator(n: int, T: int) -> LinearOperator:
    """``D1^T kron I_n`` acting on ``vec(X)``."""
    return _vec_operator((n * (T - 1), n * T), (n, T), (n, T - 1), kron_right_apply, kron_right_adjoint)


def graphtv_operator(graph: MeshGraph, T: int) -> LinearOperator:
    """``I_T kron D2`` acting on ``vec(X)``."""
    n, m = graph.num_nodes, graph.num_edges
    return _vec_operator((m * T, n * T), (n, T), (m, T), graph.graphtv, graph.graphtv_adjoint)


def stacked_operator(problem: Problem) -> LinearOperator:
    """The stacked least-squares operator ``A = [I_T kron L; lambda (D1^T kron I_n)]``."""
    p, n, T = problem.num_sensors, problem.num_nodes, problem.num_times
    lam = problem.lam
    rows = p * T + n * (T - 1)

    def matvec(v: np.ndarray) -> np.ndarray:
        X = np.reshape(v, (n, T), order="F")
        top = problem.forward(X).ravel(order="F")
        if T < 2:  # noqa: PLR2004
            return top
        return np.concatenate([top, lam * kron_right_apply(X).ravel(order="F")])

    def rmatvec(u: np.ndarray) -> np.ndarray:
        R = np.reshape(u[: p * T], (p, T), order="F")
        out = problem.adjoint(R)
        if T >= 2:  # noqa: PLR2004
            Z = np.reshape(u[p * T :], (n, T - 1), order="F")
            out = out + lam * kron_right_adjoint(Z)
        return out.ravel(order="F")

    return LinearOperator((rows, n * T), matvec=matvec, rmatvec=rmatvec, dtype=np.float64)


def adjoint_mismatch(op: LinearOperator, rng: np.random.Generator, probes: int = 100) -> float:
    """Worst relative violation of ``<A v, u> = <v, A^T u>`` over random Gaussian probes.

    Arguments:
        op (LinearOperator): Operator with both ``matvec`` and ``rmatvec``.
        rng (numpy.random.Generator): Source of probes.
        probes (int, optional): Number of (v, u) pairs.

    Returns:
        float: ``max |<Av,u> - <v,A^T u>| / (||Av|| ||u||)``, zero for exact adjoints.
    """
    rows, cols = op.shape
    worst = 0.0
    for _ in range(probes):
        v = rng.standard_normal(cols)
        u = rng.standard_normal(rows)
        av = op.matvec(v)
        atu = op.rmatvec(u)
        scale = np.linalg.norm(av) * np.linalg.norm(u) + np.linalg.norm(v) * np.linalg.norm(atu)
        if scale == 0.0:
            continue
        worst = max(worst, abs(float(av @ u) - float(v @ atu)) / scale)
    return worst
