"""Matrices over GF(p): block partitioning, schoolbook products and the PMM1 file format.

Matrices are numpy ``object`` arrays of Python ints in ``[0, p)`` so that
products of 61-bit entries never overflow.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, IndivisibleDimensions, MalformedFrame, ModulusMismatch
from .ff import lagrange_basis

MAGIC = b"PMM1"
_HEADER = struct.Struct("<4sQQQ")


def as_field_matrix(data, p: int) -> np.ndarray:
    """Copy ``data`` into a 2-D object array reduced mod p."""
    arr = np.array(data, dtype=object)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {arr.shape}")
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = int(v) % p
    return out


def zeros(rows: int, cols: int) -> np.ndarray:
    out = np.empty((rows, cols), dtype=object)
    out.fill(0)
    return out


def identity(n: int) -> np.ndarray:
    out = zeros(n, n)
    for i in range(n):
        out[i, i] = 1
    return out


def random_matrix(rows: int, cols: int, seed, p: int) -> np.ndarray:
    """Uniform matrix over GF(p), reproducible from ``seed`` (int or numpy Generator)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    # Generator.integers draws by bounded rejection, so entries are exactly uniform.
    raw = rng.integers(0, p, size=(rows, cols), dtype=np.uint64)
    return raw.astype(object)


def mat_mul(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    if a.shape[1] == 0:
        return zeros(a.shape[0], b.shape[1])
    return (a.dot(b)) % p


def mat_add(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot add {a.shape} and {b.shape}")
    return (a + b) % p


def scale(a: np.ndarray, c: int, p: int) -> np.ndarray:
    return (a * (c % p)) % p


def linear_combination(terms, shape, p: int) -> np.ndarray:
    """Sum of ``coef * block`` over ``terms`` (pairs), reduced once at the end."""
    acc = zeros(*shape)
    for coef, block in terms:
        if coef:
            acc = acc + block * coef
    return acc % p


@dataclass(frozen=True)
class BlockMatrix:
    """A matrix viewed as a ``grid[0] x grid[1]`` array of equal contiguous blocks."""

    data: np.ndarray
    grid: tuple

    @property
    def dims(self) -> tuple:
        return self.data.shape

    @property
    def block_shape(self) -> tuple:
        return (self.data.shape[0] // self.grid[0], self.data.shape[1] // self.grid[1])

    def block(self, i: int, j: int) -> np.ndarray:
        """Block at 1-indexed grid position (i, j)."""
        br, bc = self.block_shape
        return self.data[(i - 1) * br : i * br, (j - 1) * bc : j * bc]

    def blocks(self) -> list:
        return [[self.block(i, j) for j in range(1, self.grid[1] + 1)] for i in range(1, self.grid[0] + 1)]


def partition(m: np.ndarray, block_rows: int, block_cols: int) -> BlockMatrix:
    rows, cols = m.shape
    if block_rows < 1 or block_cols < 1 or rows % block_rows or cols % block_cols:
        raise IndivisibleDimensions(f"{rows}x{cols} matrix cannot be split into a {block_rows}x{block_cols} grid")
    return BlockMatrix(m, (block_rows, block_cols))


def assemble(blocks: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    """Inverse of :func:`partition`: glue a nested list of blocks back together."""
    return np.vstack([np.hstack(list(row)) for row in blocks])


def eval_block_poly(terms, x: int, shape, p: int) -> np.ndarray:
    """Evaluate ``sum(block * x**e)`` for ``terms`` given as (exponent, block) pairs."""
    return linear_combination(((pow(x, e, p), blk) for e, blk in terms), shape, p)


def interpolate_blocks(xs: Sequence[int], ys: Sequence[np.ndarray], p: int) -> list:
    """Entrywise interpolation of a matrix polynomial from ``len(xs)`` evaluations.

    Returns the coefficient blocks for exponents ``0 .. len(xs)-1``.
    """
    basis = np.array(lagrange_basis(xs, p), dtype=object)
    shape = ys[0].shape
    stacked = np.array([y.reshape(-1) for y in ys], dtype=object)
    coeffs = basis.T.dot(stacked) % p
    return [coeffs[r].reshape(shape) for r in range(len(xs))]


def equal(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and bool(np.all(a == b))


# -- PMM1 container ---------------------------------------------------------

def matrix_to_bytes(m: np.ndarray, p: int) -> bytes:
    rows, cols = m.shape
    body = np.asarray(m.reshape(-1), dtype=object).astype(np.uint64).astype("<u8").tobytes()
    return _HEADER.pack(MAGIC, p, rows, cols) + body


def matrix_from_bytes(buf: bytes, modulus: int | None = None) -> tuple:
    """Parse one PMM1 matrix; returns ``(matrix, modulus, bytes_consumed)``."""
    if len(buf) < _HEADER.size:
        raise MalformedFrame("truncated PMM1 header")
    magic, p, rows, cols = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise MalformedFrame(f"bad magic {magic!r}")
    if modulus is not None and p != modulus:
        raise ModulusMismatch(f"matrix modulus {p} != expected {modulus}")
    end = _HEADER.size + 8 * rows * cols
    if len(buf) < end:
        raise MalformedFrame("truncated PMM1 body")
    flat = np.frombuffer(buf, dtype="<u8", count=rows * cols, offset=_HEADER.size)
    m = flat.astype(object).reshape(rows, cols)
    if rows * cols and int(flat.max()) >= p:
        raise MalformedFrame("matrix entry not reduced modulo p")
    return m, p, end


def write_matrix(target, m: np.ndarray, p: int) -> None:
    data = matrix_to_bytes(m, p)
    if isinstance(target, (str, Path)):
        Path(target).write_bytes(data)
    else:
        target.write(data)


def read_matrix(source, modulus: int | None = None) -> tuple:
    """Read a PMM1 file (path or binary stream); returns ``(matrix, modulus)``."""
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    else:
        data = source.read()
    m, p, used = matrix_from_bytes(data, modulus)
    if used != len(data):
        raise MalformedFrame("trailing bytes after PMM1 matrix")
    return m, p
