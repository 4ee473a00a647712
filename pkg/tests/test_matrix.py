import io

import numpy as np
import pytest
from scipy.stats import chisquare

from oracles import as_lists, naive_matmul
from pmmkit.errors import DimensionMismatch, IndivisibleDimensions, MalformedFrame, ModulusMismatch
from pmmkit.ff import MERSENNE61
from pmmkit.matrix import (
    as_field_matrix,
    assemble,
    identity,
    mat_mul,
    matrix_from_bytes,
    matrix_to_bytes,
    partition,
    random_matrix,
    read_matrix,
    write_matrix,
    zeros,
)

P = MERSENNE61


def test_quadrants():
    m = as_field_matrix(np.arange(16).reshape(4, 4), 97)
    grid = partition(m, 2, 2)
    assert as_lists(grid.block(1, 1)) == [[0, 1], [4, 5]]
    assert as_lists(grid.block(1, 2)) == [[2, 3], [6, 7]]
    assert as_lists(grid.block(2, 1)) == [[8, 9], [12, 13]]
    assert as_lists(grid.block(2, 2)) == [[10, 11], [14, 15]]


def test_single_block_grid():
    m = random_matrix(3, 5, 1, 97)
    assert np.array_equal(partition(m, 1, 1).block(1, 1), m)


@pytest.mark.parametrize("shape,grid", [((6, 4), (3, 2)), ((8, 9), (4, 3)), ((5, 5), (5, 1))])
def test_partition_assemble_roundtrip(shape, grid):
    m = random_matrix(*shape, 7, P)
    assert np.array_equal(assemble(partition(m, *grid).blocks()), m)


def test_indivisible_is_error():
    with pytest.raises(IndivisibleDimensions):
        partition(zeros(5, 4), 2, 2)


def test_identity_and_zero_products():
    b = random_matrix(4, 3, 2, P)
    assert np.array_equal(mat_mul(identity(4), b, P), b)
    assert np.array_equal(mat_mul(b, zeros(3, 2), P), zeros(4, 2))


def test_mat_mul_against_integer_oracle():
    a = random_matrix(3, 3, 10, 97)
    b = random_matrix(3, 3, 11, 97)
    assert as_lists(mat_mul(a, b, 97)) == naive_matmul(as_lists(a), as_lists(b), 97)
    a = random_matrix(5, 7, 12, P)
    b = random_matrix(7, 2, 13, P)
    assert as_lists(mat_mul(a, b, P)) == naive_matmul(as_lists(a), as_lists(b), P)


def test_mat_mul_shape_check():
    with pytest.raises(DimensionMismatch):
        mat_mul(zeros(2, 3), zeros(2, 3), 97)


def test_random_matrix_determinism():
    assert np.array_equal(random_matrix(4, 4, 5, P), random_matrix(4, 4, 5, P))
    assert not np.array_equal(random_matrix(4, 4, 5, P), random_matrix(4, 4, 6, P))
    assert all(0 <= int(x) < 97 for x in random_matrix(20, 20, 1, 97).reshape(-1))


def test_random_matrix_uniform_gf5():
    m = random_matrix(1000, 100, 0, 5)
    counts = np.bincount(m.reshape(-1).astype(np.int64), minlength=5)
    assert chisquare(counts).pvalue > 0.001


def test_pmm1_roundtrip(tmp_path):
    m = random_matrix(3, 4, 9, P)
    buf = matrix_to_bytes(m, P)
    assert len(buf) == 4 + 24 + 8 * 12
    out, p, used = matrix_from_bytes(buf)
    assert p == P and used == len(buf) and np.array_equal(out, m)
    write_matrix(tmp_path / "m.pmm", m, P)
    back, p2 = read_matrix(tmp_path / "m.pmm", modulus=P)
    assert np.array_equal(back, m) and p2 == P
    stream = io.BytesIO()
    write_matrix(stream, m, P)
    stream.seek(0)
    assert np.array_equal(read_matrix(stream)[0], m)


def test_pmm1_errors():
    buf = matrix_to_bytes(random_matrix(2, 2, 1, 97), 97)
    with pytest.raises(MalformedFrame):
        matrix_from_bytes(buf[:-1])
    with pytest.raises(MalformedFrame):
        matrix_from_bytes(b"XXXX" + buf[4:])
    with pytest.raises(ModulusMismatch):
        matrix_from_bytes(buf, modulus=101)
    unreduced = bytearray(buf)
    unreduced[28:36] = (500).to_bytes(8, "little")
    with pytest.raises(MalformedFrame):
        matrix_from_bytes(bytes(unreduced))
    with pytest.raises(MalformedFrame):
        read_matrix(io.BytesIO(buf + b"\x00"))
