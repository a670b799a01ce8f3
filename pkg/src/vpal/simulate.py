"""vpal simulate module.

Synthetic source localization datasets: spatial meshes, smooth lead fields, sources that
spread over the mesh in time, relative Gaussian noise, and dataset directories.

A dataset directory holds ``mesh.txt``, ``L.dmat``, ``Xtrue.dmat``, ``B.dmat`` and
``meta.txt`` (``key=value`` lines with ``seed``, ``noise_level``, ``generator`` and
``format_version``).

This module provides:
- SourceSpec
- Dataset
- make_mesh
- make_leadfield
- simulate_sources
- add_noise
- make_dataset
- save_dataset
- load_dataset
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Literal, Union

import numpy as np
import trimesh
from scipy.spatial import cKDTree

from .graph import MeshGraph, load_mesh, save_mesh
from .matrix_io import load_dmat, load_matrix, save_dmat
from .problem import Problem

logger = logging.getLogger(__name__)

PathT = Union[str, Path]
SeedT = Union[int, np.random.SeedSequence, None]
MeshKindT = Literal["grid2d", "icosphere", "random_geometric"]

MESH_KINDS = ("grid2d", "icosphere", "random_geometric")
FORMAT_VERSION = 1

_KNN = 6
_KNN_MAX = 12
_SENSOR_RADIUS = 1.2
_KERNEL_SOFTENING = 0.01


class SourceSpec:
    """Shape of the simulated activity.

    Attributes:
        num_sources (int): Number of active seed nodes, >= 1.
        amplitude (float): Peak value, > 0.
        speed (float): Spread in node hops per time step, >= 0.
        decay (float): Falloff per hop beyond the plateau, in (0, 1].
    """

    def __init__(self, num_sources: int = 1, amplitude: float = 1.0, speed: float = 1.0, decay: float = 0.5) -> None:
        """Constructor.

        Raises:
            ValueError: A field is out of range.
        """
        if num_sources < 1:
            msg = "num_sources must be at least 1"
            raise ValueError(msg)
        if not amplitude > 0:
            msg = "amplitude must be positive"
            raise ValueError(msg)
        if not speed >= 0:
            msg = "speed must be non-negative"
            raise ValueError(msg)
        if not 0 < decay <= 1:
            msg = "decay must be in (0, 1]"
            raise ValueError(msg)
        self.num_sources = num_sources
        self.amplitude = amplitude
        self.speed = speed
        self.decay = decay

    def __repr__(self) -> str:
        """Returns the fields as keyword arguments."""
        return f"SourceSpec(num_sources={self.num_sources}, amplitude={self.amplitude}, speed={self.speed}, decay={self.decay})"


def _grid2d(n_target: int) -> MeshGraph:
    rows = max(2, round(math.sqrt(n_target)))
    cols = max(2, round(n_target / rows))
    ys, xs = np.meshgrid(np.linspace(0.0, 1.0, rows), np.linspace(0.0, 1.0, cols), indexing="ij")
    coords = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(rows * cols)])

    index = np.arange(rows * cols).reshape(rows, cols)
    horizontal = np.column_stack([index[:, :-1].ravel(), index[:, 1:].ravel()])
    vertical = np.column_stack([index[:-1, :].ravel(), index[1:, :].ravel()])
    return MeshGraph(coords, np.vstack([horizontal, vertical]))


def _icosphere(n_target: int) -> MeshGraph:
    # subdivision s has 10 * 4^s + 2 vertices
    counts = [10 * 4**s + 2 for s in range(8)]
    subdivisions = int(np.argmin([abs(c - n_target) for c in counts]))
    sphere = trimesh.creation.icosphere(subdivisions=subdivisions, radius=1.0)
    return MeshGraph(np.asarray(sphere.vertices), np.asarray(sphere.edges_unique))


def _random_geometric(n_target: int, rng: np.random.Generator) -> MeshGraph:
    directions = rng.standard_normal((n_target, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    coords = directions * rng.random(n_target)[:, None] ** (1.0 / 3.0)
    tree = cKDTree(coords)

    k = _KNN
    while k <= _KNN_MAX and k < n_target:
        _, neighbors = tree.query(coords, k=k + 1)
        pairs = np.column_stack([np.repeat(np.arange(n_target), k), neighbors[:, 1:].ravel()])
        pairs = np.unique(np.sort(pairs, axis=1), axis=0)
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        graph = MeshGraph(coords, pairs)
        if graph.is_connected:
            return graph
        logger.debug("random_geometric: %d-nearest-neighbor graph is disconnected", k)
        k += 2

    msg = f"Random geometric graph with {n_target} nodes is disconnected up to k = {min(k - 2, _KNN_MAX)}"
    raise ValueError(msg)


def make_mesh(kind: MeshKindT, n_target: int, seed: SeedT = None) -> MeshGraph:
    """Generate a connected mesh graph.

    Arguments:
        kind (string): 'grid2d' (unit square, 4-neighbor grid), 'icosphere' (unit sphere, node
            count quantized to 12, 42, 162, 642, ...) or 'random_geometric' (unit ball, 6-nearest-neighbor edges).
        n_target (int): Desired node count, >= 4.
        seed (int, optional): Random seed (random_geometric only).

    Returns:
        MeshGraph: Connected graph.

    Raises:
        ValueError: Unknown kind, ``n_target < 4``, or no connected random geometric graph was found.

    Examples: ::

        >>> make_mesh('grid2d', 9).num_edges
        12
    """
    if n_target < 4:  # noqa: PLR2004
        msg = "n_target must be at least 4"
        raise ValueError(msg)
    if kind == "grid2d":
        return _grid2d(n_target)
    if kind == "icosphere":
        return _icosphere(n_target)
    if kind == "random_geometric":
        return _random_geometric(n_target, np.random.default_rng(seed))
    msg = f"Unknown mesh kind '{kind}'; expected one of {', '.join(MESH_KINDS)}"
    raise ValueError(msg)


def _kernel_leadfield(mesh: MeshGraph, p: int, rng: np.random.Generator) -> np.ndarray:
    centroid = mesh.coords.mean(axis=0)
    extent = float(np.linalg.norm(mesh.coords - centroid, axis=1).max())
    radius = _SENSOR_RADIUS * max(1.0, extent)

    directions = rng.standard_normal((p, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    sensors = centroid + radius * directions

    d2 = ((sensors[:, None, :] - mesh.coords[None, :, :]) ** 2).sum(axis=2)
    L = 1.0 / (d2 + _KERNEL_SOFTENING)
    return L / np.linalg.norm(L, axis=1, keepdims=True)


def make_leadfield(mesh: MeshGraph, p: int, seed: SeedT = None) -> np.ndarray:
    """Synthetic lead field from ``p`` virtual sensors around the mesh.

    Sensors are placed at random on a sphere of radius 1.2 (times the mesh extent, if larger
    than 1) around the mesh centroid; ``L[i, j] = 1 / (||s_i - v_j||^2 + 0.01)`` with unit-norm rows.

    Arguments:
        mesh (MeshGraph): Source space.
        p (int): Number of sensors, ``1 <= p < n``.
        seed (int, optional): Random seed.

    Returns:
        ndarray: Lead field, p x n, of full row rank.

    Raises:
        ValueError: ``p`` out of range, or rank deficient after one reseed.
    """
    n = mesh.num_nodes
    if not 1 <= p < n:
        msg = f"p must be in [1, {n})"
        raise ValueError(msg)

    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    for attempt, child in enumerate(seq.spawn(2)):
        L = _kernel_leadfield(mesh, p, np.random.default_rng(child))
        if np.linalg.matrix_rank(L) == p:
            return L
        logger.warning("make_leadfield: rank deficient lead field on attempt %d, reseeding", attempt + 1)

    msg = f"Could not generate a lead field of full row rank {p}"
    raise ValueError(msg)


def simulate_sources(mesh: MeshGraph, spec: SourceSpec, T: int, seed: SeedT = None) -> np.ndarray:
    """Sources that start at random seed nodes and spread over the mesh.

    At time ``t = 0, ..., T-1`` a node at hop distance ``d`` from a seed carries
    ``amplitude * decay^max(0, d - speed * t)`` if ``d <= ceil(speed * t) + 2`` and zero otherwise;
    contributions of several seeds add up.

    Arguments:
        mesh (MeshGraph): Source space.
        spec (SourceSpec): Activity shape.
        T (int): Number of time points, >= 1.
        seed (int, optional): Random seed.

    Returns:
        ndarray: Ground truth sources, n x T.
    """
    if T < 1:
        msg = "T must be at least 1"
        raise ValueError(msg)

    rng = np.random.default_rng(seed)
    n = mesh.num_nodes
    seeds = rng.choice(n, size=spec.num_sources, replace=spec.num_sources > n)

    X = np.zeros((n, T))
    t = np.arange(T, dtype=np.float64)
    radius = spec.speed * t
    for s in seeds:
        d = mesh.hop_distances(int(s))[:, None]
        active = d <= np.ceil(radius)[None, :] + 2
        with np.errstate(invalid="ignore"):
            values = spec.amplitude * spec.decay ** np.maximum(0.0, d - radius[None, :])
        X += np.where(active, values, 0.0)
    return X


def add_noise(clean_B: np.ndarray, level: float, seed: SeedT = None) -> np.ndarray:
    """Add white Gaussian noise of relative Frobenius norm ``level``.

    Arguments:
        clean_B (ndarray): Noise-free data.
        level (float): ``||E|| / ||clean_B||``, >= 0.
        seed (int, optional): Random seed.

    Returns:
        ndarray: ``clean_B + E``.

    Raises:
        ValueError: ``level`` is negative, or ``clean_B`` is zero and ``level`` positive.
    """
    if not level >= 0:
        msg = "Noise level must be non-negative"
        raise ValueError(msg)
    clean_B = np.asarray(clean_B, dtype=np.float64)
    if level == 0:
        return clean_B.copy()

    norm = float(np.linalg.norm(clean_B))
    if norm == 0:
        msg = "Relative noise is undefined for zero data"
        raise ValueError(msg)

    E = np.random.default_rng(seed).standard_normal(clean_B.shape)
    E *= level * norm / np.linalg.norm(E)
    return clean_B + E


class Dataset:
    """Synthetic source localization instance.

    Attributes:
        mesh (MeshGraph): Source space.
        leadfield (ndarray): Lead field, p x n.
        X_true (ndarray): Ground truth sources, n x T.
        B (ndarray): Observations, p x T.
        noise_level (float): Relative noise level used for ``B``.
        seed (int): Random seed the dataset was generated from.
        generator (string): Mesh kind or other generator name.
    """

    def __init__(  # noqa: PLR0913
        self,
        mesh: MeshGraph,
        leadfield: np.ndarray,
        X_true: np.ndarray,
        B: np.ndarray,
        noise_level: float,
        seed: int,
        generator: str = "",
    ) -> None:
        """Constructor.

        Raises:
            ValueError: Dimensions disagree.
        """
        p, n = leadfield.shape
        if n != mesh.num_nodes or X_true.shape[0] != n or B.shape[0] != p or B.shape[1] != X_true.shape[1]:
            msg = f"Inconsistent dataset: mesh {mesh.num_nodes} nodes, L {leadfield.shape}, X_true {X_true.shape}, B {B.shape}"
            raise ValueError(msg)
        self.mesh = mesh
        self.leadfield = leadfield
        self.X_true = X_true
        self.B = B
        self.noise_level = float(noise_level)
        self.seed = int(seed)
        self.generator = generator

    def __repr__(self) -> str:
        """Returns a short description."""
        p, n = self.leadfield.shape
        return f"Dataset(generator={self.generator!r}, p={p}, n={n}, T={self.B.shape[1]}, noise={self.noise_level}, seed={self.seed})"

    def problem(self, lam: float = 0.0, mu: float = 0.0, eta: float = 10.0) -> Problem:
        """The inverse problem for this dataset."""
        return Problem(self.leadfield, self.B, self.mesh, lam=lam, mu=mu, eta=eta)

    def save(self, path: PathT) -> None:
        """See :py:func:`save_dataset`."""
        save_dataset(self, path)


def make_dataset(  # noqa: PLR0913
    kind: MeshKindT,
    n: int,
    T: int,
    p: int,
    spec: SourceSpec | None = None,
    noise: float = 0.1,
    seed: int = 0,
    leadfield: np.ndarray | None = None,
) -> Dataset:
    """Generate a complete dataset from one seed.

    Arguments:
        kind (string): Mesh kind, see :py:func:`make_mesh`.
        n (int): Target node count.
        T (int): Number of time points.
        p (int): Number of sensors; ignored when ``leadfield`` is given.
        spec (SourceSpec, optional): Activity shape; default one source.
        noise (float, optional): Relative noise level; default 10 %.
        seed (int, optional): Random seed.
        leadfield (ndarray, optional): Externally supplied lead field replacing the generated one.

    Returns:
        Dataset: The dataset.
    """
    spec = SourceSpec() if spec is None else spec
    mesh_seq, lead_seq, source_seq, noise_seq = np.random.SeedSequence(seed).spawn(4)

    mesh = make_mesh(kind, n, mesh_seq)
    if leadfield is None:
        L = make_leadfield(mesh, p, lead_seq)
    else:
        L = np.asarray(leadfield, dtype=np.float64)
        if L.ndim != 2 or L.shape[1] != mesh.num_nodes:  # noqa: PLR2004
            msg = f"Supplied lead field has shape {L.shape}, mesh has {mesh.num_nodes} nodes"
            raise ValueError(msg)

    X_true = simulate_sources(mesh, spec, T, source_seq)
    B = add_noise(L @ X_true, noise, noise_seq)
    logger.info("simulate: %s mesh n=%d m=%d, p=%d, T=%d, noise=%g", kind, mesh.num_nodes, mesh.num_edges, L.shape[0], T, noise)
    return Dataset(mesh, L, X_true, B, noise, seed, kind)


def save_dataset(ds: Dataset, path: PathT) -> None:
    """Write a dataset directory, creating it if needed."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    save_mesh(ds.mesh, root / "mesh.txt")
    save_dmat(root / "L.dmat", ds.leadfield)
    save_dmat(root / "Xtrue.dmat", ds.X_true)
    save_dmat(root / "B.dmat", ds.B)
    meta = {
        "format_version": FORMAT_VERSION,
        "generator": ds.generator,
        "noise_level": repr(ds.noise_level),
        "seed": ds.seed,
    }
    (root / "meta.txt").write_text("".join(f"{k}={v}\n" for k, v in meta.items()), encoding="utf-8")


def read_meta(path: PathT) -> dict[str, str]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are skipped.

    Raises:
        ValueError: A line has no ``=``; the message names the line number.
    """
    meta = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            msg = f"{path}:{lineno}: expected 'key=value'"
            raise ValueError(msg)
        meta[key.strip()] = value.strip()
    return meta


def load_dataset(path: PathT, leadfield: PathT | None = None) -> Dataset:
    """Read a dataset directory written by :py:func:`save_dataset`.

    Arguments:
        path (string or Path): Dataset directory.
        leadfield (string or Path, optional): Matrix file (``.dmat`` or ``.csv``) replacing ``L.dmat``.

    Raises:
        ValueError: Missing keys, unsupported format version, or malformed files.
    """
    root = Path(path)
    meta = read_meta(root / "meta.txt")
    for key in ("format_version", "noise_level", "seed"):
        if key not in meta:
            msg = f"{root / 'meta.txt'}: missing key '{key}'"
            raise ValueError(msg)
    if meta["format_version"] != str(FORMAT_VERSION):
        msg = f"{root / 'meta.txt'}: unsupported format_version {meta['format_version']}"
        raise ValueError(msg)

    return Dataset(
        load_mesh(root / "mesh.txt"),
        load_matrix(leadfield) if leadfield is not None else load_dmat(root / "L.dmat"),
        load_dmat(root / "Xtrue.dmat"),
        load_dmat(root / "B.dmat"),
        float(meta["noise_level"]),
        int(meta["seed"]),
        meta.get("generator", ""),
    )
