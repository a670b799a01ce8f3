"""vpal graph module.

The spatial mesh graph and the graph total variation operator ``D2``.

``D2`` is never materialized by the solvers: edges are kept as a flat list of tail indices,
head indices and weights, and ``D2 X`` is a gather-subtract over that list. Row ``k`` of
``D2 X`` is ``w_k (X[u_k] - X[v_k])`` with the canonical orientation ``u_k < v_k``.

This module provides:
- MeshGraph
- graphtv_apply
- graphtv_adjoint
- build_dense_d2
- timediff_gram_apply
- save_mesh
- load_mesh
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import TYPE_CHECKING, Union

import numpy as np
import scipy.sparse
from scipy.sparse import csgraph

from .linalg import kron_right_adjoint, kron_right_apply

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = logging.getLogger(__name__)

PathT = Union[str, Path]


class MeshGraph:
    """Undirected weighted graph on mesh nodes.

    Instances are immutable: the coordinate, edge and weight arrays are read-only.

    Attributes:
        coords (ndarray): Node coordinates, n x 3.
        tails (ndarray): Edge tail indices ``u``, length m.
        heads (ndarray): Edge head indices ``v``, length m, with ``u < v``.
        weights (ndarray): Positive edge weights, length m.

    Examples: ::

        >>> g = MeshGraph(np.zeros((3, 3)), [(0, 1), (1, 2)])
        >>> g.graphtv(np.array([[1.0], [2.0], [4.0]]))
        array([[-1.],
               [-2.]])
    """

    def __init__(
        self,
        coords: np.ndarray | Sequence[Sequence[float]],
        edges: np.ndarray | Sequence[tuple[int, int]],
        weights: np.ndarray | Sequence[float] | None = None,
    ) -> None:
        """Constructor.

        Arguments:
            coords (array-like): Node coordinates, n x 3.
            edges (array-like): Edge endpoints, m x 2. Each edge is stored with its smaller index first.
            weights (array-like, optional): Edge weights; default is 1 for every edge.

        Raises:
            ValueError: Indices out of range, self loops, duplicate edges or non-positive weights.
        """
        coords = np.array(coords, dtype=np.float64, ndmin=2)
        if coords.ndim != 2 or coords.shape[1] != 3:  # noqa: PLR2004
            msg = "Node coordinates must be an n x 3 array"
            raise ValueError(msg)
        if not np.all(np.isfinite(coords)):
            msg = "Node coordinates must be finite"
            raise ValueError(msg)

        edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        n = coords.shape[0]

        if edges.size and (edges.min() < 0 or edges.max() >= n):
            msg = f"Edge indices must be in [0, {n})"
            raise ValueError(msg)
        if np.any(edges[:, 0] == edges[:, 1]):
            msg = "Self loops are not allowed"
            raise ValueError(msg)

        tails = np.minimum(edges[:, 0], edges[:, 1])
        heads = np.maximum(edges[:, 0], edges[:, 1])

        keys = tails * n + heads
        if np.unique(keys).size != keys.size:
            msg = "Duplicate edges are not allowed"
            raise ValueError(msg)

        if weights is None:
            weights = np.ones(edges.shape[0])
        weights = np.array(weights, dtype=np.float64).reshape(-1)
        if weights.shape[0] != edges.shape[0]:
            msg = f"Expected {edges.shape[0]} edge weights, got {weights.shape[0]}"
            raise ValueError(msg)
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            msg = "Edge weights must be finite and positive"
            raise ValueError(msg)

        for arr in (coords, tails, heads, weights):
            arr.setflags(write=False)

        self.coords = coords
        self.tails = tails
        self.heads = heads
        self.weights = weights

    def __repr__(self) -> str:
        """Returns a short description."""
        return f"MeshGraph(n={self.num_nodes}, m={self.num_edges})"

    @property
    def num_nodes(self) -> int:
        """Number of nodes n."""
        return self.coords.shape[0]

    @property
    def num_edges(self) -> int:
        """Number of edges m."""
        return self.tails.shape[0]

    @property
    def edges(self) -> np.ndarray:
        """Edge list, m x 2, in storage order."""
        return np.column_stack([self.tails, self.heads])

    @property
    def is_unweighted(self) -> bool:
        """True if every edge weight is 1."""
        return bool(np.all(self.weights == 1.0))

    def graphtv(self, X: np.ndarray) -> np.ndarray:
        """Apply ``D2``: row k is ``w_k (X[u_k] - X[v_k])``.

        Arguments:
            X (ndarray): Node field, n x T.

        Returns:
            ndarray: Edge field, m x T.

        Raises:
            ValueError: Row count differs from the node count.
        """
        if X.ndim != 2 or X.shape[0] != self.num_nodes:  # noqa: PLR2004
            msg = f"Expected a field with {self.num_nodes} rows, got shape {X.shape}"
            raise ValueError(msg)
        diff = X[self.tails] - X[self.heads]
        if self.is_unweighted:
            return diff
        return self.weights[:, None] * diff

    def graphtv_adjoint(self, Y: np.ndarray) -> np.ndarray:
        """Apply ``D2^T`` by scatter-add over the edge list.

        Arguments:
            Y (ndarray): Edge field, m x T.

        Returns:
            ndarray: Node field, n x T.

        Raises:
            ValueError: Row count differs from the edge count.
        """
        if Y.ndim != 2 or Y.shape[0] != self.num_edges:  # noqa: PLR2004
            msg = f"Expected a field with {self.num_edges} rows, got shape {Y.shape}"
            raise ValueError(msg)

        n = self.num_nodes
        T = Y.shape[1]
        WY = Y if self.is_unweighted else self.weights[:, None] * Y
        cols = np.arange(T)

        out = np.bincount((self.tails[:, None] * T + cols).ravel(), weights=WY.ravel(), minlength=n * T)
        out -= np.bincount((self.heads[:, None] * T + cols).ravel(), weights=WY.ravel(), minlength=n * T)
        return out.reshape(n, T)

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        """Materialize ``D2`` as a sparse m x n matrix (oracle and ADMM setup use only)."""
        m = self.num_edges
        rows = np.concatenate([np.arange(m), np.arange(m)])
        cols = np.concatenate([self.tails, self.heads])
        vals = np.concatenate([self.weights, -self.weights])
        return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(m, self.num_nodes))

    def adjacency(self) -> scipy.sparse.csr_matrix:
        """Symmetric 0/1 adjacency matrix, n x n."""
        n = self.num_nodes
        ones = np.ones(self.num_edges)
        A = scipy.sparse.coo_matrix((ones, (self.tails, self.heads)), shape=(n, n))
        return (A + A.T).tocsr()

    def components(self) -> tuple[int, np.ndarray]:
        """Connected components.

        Returns:
            tuple: (number of components, component label per node)
        """
        count, labels = csgraph.connected_components(self.adjacency(), directed=False)
        return int(count), labels

    @property
    def is_connected(self) -> bool:
        """True if the graph has a single connected component."""
        return self.components()[0] == 1

    def hop_distances(self, source: int) -> np.ndarray:
        """Breadth-first hop distance from ``source`` to every node; unreachable nodes are ``inf``."""
        return csgraph.shortest_path(self.adjacency(), directed=False, unweighted=True, indices=source)


def graphtv_apply(graph: MeshGraph, X: np.ndarray) -> np.ndarray:
    """Apply the graph total variation operator ``D2`` to ``X``.

    See Also:
        :py:meth:`MeshGraph.graphtv`
    """
    return graph.graphtv(X)


def graphtv_adjoint(graph: MeshGraph, Y: np.ndarray) -> np.ndarray:
    """Apply ``D2^T`` to ``Y``.

    See Also:
        :py:meth:`MeshGraph.graphtv_adjoint`
    """
    return graph.graphtv_adjoint(Y)


def build_dense_d2(graph: MeshGraph) -> scipy.sparse.csr_matrix:
    """Materialize ``D2 = W (P1 - P2)`` as a sparse matrix.

    Row k holds ``+w_k`` at column ``u_k`` and ``-w_k`` at column ``v_k``.

    Examples: ::

        >>> build_dense_d2(MeshGraph(np.zeros((2, 3)), [(0, 1)])).toarray()
        array([[ 1., -1.]])
    """
    return graph.to_sparse()


def timediff_gram_apply(X: np.ndarray) -> np.ndarray:
    """Return ``X @ D1 @ D1^T`` without forming the T x T matrix.

    Examples: ::

        >>> timediff_gram_apply(np.array([[1.0, 2.0, 4.0]]))
        array([[-1., -1.,  2.]])
    """
    return kron_right_adjoint(kron_right_apply(X))


def save_mesh(graph: MeshGraph, path: PathT) -> None:
    """Write a mesh file.

    The format is UTF-8 text: ``mesh <n> <m>``, then n lines ``x y z``, then m lines ``u v w``
    with 0-based node indices. Values are written with ``repr`` so that reading back is exact.
    """
    lines = [f"mesh {graph.num_nodes} {graph.num_edges}"]
    lines.extend(" ".join(repr(float(c)) for c in xyz) for xyz in graph.coords)
    lines.extend(f"{u} {v} {float(w)!r}" for u, v, w in zip(graph.tails, graph.heads, graph.weights))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_mesh(path: PathT) -> MeshGraph:
    """Read a mesh file written by :py:func:`save_mesh`.

    Edges given as ``u > v`` are swapped; duplicate edges are dropped with a warning.

    Raises:
        ValueError: Malformed file; the message names the line number.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()

    header = lines[0].split() if lines else []
    if len(header) != 3 or header[0] != "mesh":  # noqa: PLR2004
        msg = f"{path}:1: expected header 'mesh <n> <m>'"
        raise ValueError(msg)
    try:
        n, m = int(header[1]), int(header[2])
    except ValueError as e:
        msg = f"{path}:1: expected integer counts in header, got {lines[0]!r}"
        raise ValueError(msg) from e
    if n < 0 or m < 0:
        msg = f"{path}:1: counts must be non-negative"
        raise ValueError(msg)

    if len(lines) < 1 + n + m:
        msg = f"{path}: expected {n} node lines and {m} edge lines, file has {len(lines) - 1} lines after the header"
        raise ValueError(msg)

    coords = np.empty((n, 3))
    for i in range(n):
        parts = lines[1 + i].split()
        if len(parts) != 3:  # noqa: PLR2004
            msg = f"{path}:{2 + i}: expected 'x y z'"
            raise ValueError(msg)
        try:
            coords[i] = [float(v) for v in parts]
        except ValueError as e:
            msg = f"{path}:{2 + i}: expected numeric coordinates, got {lines[1 + i]!r}"
            raise ValueError(msg) from e

    seen: set[tuple[int, int]] = set()
    edges: list[tuple[int, int]] = []
    weights: list[float] = []
    for k in range(m):
        lineno = 2 + n + k
        parts = lines[lineno - 1].split()
        if len(parts) != 3:  # noqa: PLR2004
            msg = f"{path}:{lineno}: expected 'u v w'"
            raise ValueError(msg)
        try:
            u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as e:
            msg = f"{path}:{lineno}: expected integer endpoints and a numeric weight, got {lines[lineno - 1]!r}"
            raise ValueError(msg) from e
        if u > v:
            u, v = v, u
        if (u, v) in seen:
            logger.warning("%s:%d: dropping duplicate edge (%d, %d)", path, lineno, u, v)
            continue
        seen.add((u, v))
        edges.append((u, v))
        weights.append(w)

    return MeshGraph(coords, edges, weights)
