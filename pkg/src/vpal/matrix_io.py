"""vpal matrix_io module.

Dense matrix files.

The binary format is the magic bytes ``DMAT``, then rows and cols as unsigned 64-bit
little-endian integers, then ``rows * cols`` little-endian float64 values in row-major order.
The CSV format has a header line ``rows,cols`` followed by one matrix row per line.

This module provides:
- save_dmat
- load_dmat
- save_matrix_csv
- load_matrix_csv
- load_matrix
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

PathT = Union[str, Path]

DMAT_MAGIC = b"DMAT"
_HEADER = struct.Struct("<4sQQ")


def save_dmat(path: PathT, matrix: np.ndarray) -> None:
    """Write a dense matrix in the DMAT binary format.

    Arguments:
        path (string or Path): Destination file.
        matrix (ndarray): 2-D array; values are stored as float64.

    Raises:
        ValueError: ``matrix`` is not 2-D or holds non-finite values.
    """
    matrix = np.asarray(matrix, dtype="<f8")
    if matrix.ndim != 2:  # noqa: PLR2004
        msg = "DMAT files hold 2-D matrices"
        raise ValueError(msg)
    if not np.all(np.isfinite(matrix)):
        msg = "DMAT matrices must be finite"
        raise ValueError(msg)

    rows, cols = matrix.shape
    with Path(path).open("wb") as f:
        f.write(_HEADER.pack(DMAT_MAGIC, rows, cols))
        f.write(np.ascontiguousarray(matrix).tobytes(order="C"))


def load_dmat(path: PathT) -> np.ndarray:
    """Read a dense matrix in the DMAT binary format.

    Arguments:
        path (string or Path): Source file.

    Returns:
        ndarray: float64 matrix, rows x cols.

    Raises:
        ValueError: Bad magic bytes or the file is truncated; the message names the byte offset.
    """
    data = Path(path).read_bytes()

    if len(data) < _HEADER.size:
        msg = f"{path}: truncated DMAT header at offset {len(data)} (expected {_HEADER.size} bytes)"
        raise ValueError(msg)

    magic, rows, cols = _HEADER.unpack_from(data, 0)
    if magic != DMAT_MAGIC:
        msg = f"{path}: bad magic bytes {magic!r} at offset 0"
        raise ValueError(msg)

    expected = _HEADER.size + rows * cols * 8
    if len(data) != expected:
        msg = f"{path}: matrix payload ends at offset {len(data)}, expected {expected} for {rows}x{cols}"
        raise ValueError(msg)

    matrix = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=_HEADER.size)
    return matrix.reshape(rows, cols).astype(np.float64)


def save_matrix_csv(path: PathT, matrix: np.ndarray) -> None:
    """Write a dense matrix as CSV with a ``rows,cols`` header.

    Values are written with ``repr`` so that reading them back is exact.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:  # noqa: PLR2004
        msg = "CSV matrix files hold 2-D matrices"
        raise ValueError(msg)

    lines = [f"{matrix.shape[0]},{matrix.shape[1]}"]
    lines.extend(",".join(repr(float(v)) for v in row) for row in matrix)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_matrix_csv(path: PathT) -> np.ndarray:
    """Read a dense matrix written by :py:func:`save_matrix_csv`.

    Raises:
        ValueError: Malformed header or row; the message names the line number.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        msg = f"{path}: empty matrix file"
        raise ValueError(msg)

    try:
        rows, cols = (int(v) for v in lines[0].split(","))
    except ValueError as e:
        msg = f"{path}:1: expected header 'rows,cols'"
        raise ValueError(msg) from e

    body = [line for line in lines[1:] if line.strip()]
    if len(body) != rows:
        msg = f"{path}: expected {rows} rows, found {len(body)}"
        raise ValueError(msg)

    matrix = np.empty((rows, cols))
    for i, line in enumerate(body):
        values = line.split(",")
        if len(values) != cols:
            msg = f"{path}:{i + 2}: expected {cols} values, found {len(values)}"
            raise ValueError(msg)
        matrix[i] = [float(v) for v in values]
    return matrix


def load_matrix(path: PathT) -> np.ndarray:
    """Read a matrix from a ``.csv`` file or, for any other suffix, a DMAT file."""
    if Path(path).suffix.lower() == ".csv":
        return load_matrix_csv(path)
    return load_dmat(path)
