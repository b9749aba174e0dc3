import numpy as np
import pytest
from pydantic import ValidationError

from daecanon.blockstruct import (
    characteristics,
    characteristics_from_nilpotent,
    elementary_nilpotent,
    is_but,
    is_sut,
    is_sut_column,
    is_sut_row,
    numeric_rank,
    rc_factor,
    rc_inverse,
)
from daecanon.expr import MatrixFn
from daecanon.models.structure import BlockSpec, Ordering
from daecanon.utils.exceptions import (
    NeedsSmoothFactorizationError,
    NotNilpotentError,
    NotSUTColumnError,
    NotSUTRowError,
)

COLUMN = BlockSpec(sizes=[2, 1], ordering=Ordering.DECREASING)
ROW = BlockSpec(sizes=[1, 2], ordering=Ordering.INCREASING)


def test_block_spec_validation():
    assert COLUMN.mu == 2 and COLUMN.a == 3
    assert COLUMN.offsets == [0, 2, 3]
    assert COLUMN.theta == [1]
    assert ROW.theta == [1]
    with pytest.raises(ValidationError):
        BlockSpec(sizes=[1, 2], ordering=Ordering.DECREASING)
    with pytest.raises(ValidationError):
        BlockSpec(sizes=[2, 0])


def test_elementary_nilpotent_column_and_row():
    np.testing.assert_array_equal(elementary_nilpotent(COLUMN)(0.0), [[0, 0, 1], [0, 0, 0], [0, 0, 0]])
    np.testing.assert_array_equal(elementary_nilpotent(ROW)(0.0), [[0, 1, 0], [0, 0, 0], [0, 0, 0]])


def test_but_and_sut(ts):
    upper = MatrixFn.from_rows([["1", "t", "2"], ["0", "3", "t"], ["0", "0", "1 + t"]])
    assert is_but(upper, COLUMN, ts)
    assert not is_sut(upper, COLUMN, ts)

    # Only the (1, 0) entry sits inside a diagonal block for sizes [2, 1]
    assert is_but(MatrixFn.from_rows([["1", "0", "0"], ["t", "1", "0"], ["0", "0", "1"]]), COLUMN, ts)

    below = MatrixFn.from_rows([["1", "0", "0"], ["0", "1", "0"], ["t", "0", "1"]])
    check = is_but(below, COLUMN, ts)
    assert not check
    assert check.block == (1, 0)


def test_sut_rank_conditions(ts):
    full = MatrixFn.from_rows([["0", "0", "1"], ["0", "0", "t"], ["0", "0", "0"]])
    assert is_sut_column(full, COLUMN, ts)
    # The superdiagonal block [0; 0] has no column rank
    empty = MatrixFn.zeros(3, 3)
    check = is_sut_column(empty, COLUMN, ts)
    assert not check and check.block == (0, 1)

    row = MatrixFn.from_rows([["0", "1", "t"], ["0", "0", "0"], ["0", "0", "0"]])
    assert is_sut_row(row, ROW, ts)


def test_rc_factor_column_case(ts):
    N = MatrixFn.from_rows([["0", "0", "2 + t"], ["0", "0", "0"], ["0", "0", "0"]])
    R = rc_factor(N, COLUMN, ts)
    NE = elementary_nilpotent(COLUMN)
    for t in ts:
        np.testing.assert_allclose(R(t), np.diag([2 + t, 1, 1]))
        np.testing.assert_allclose(np.linalg.solve(R(t), N(t)), NE(t), atol=1e-14)
    R_inv = rc_inverse(N, COLUMN, ts)
    for t in ts:
        np.testing.assert_allclose(R_inv(t) @ N(t), NE(t), atol=1e-14)


def test_rc_factor_row_case(ts):
    N = MatrixFn.from_rows([["0", "1 + t", "0"], ["0", "0", "0"], ["0", "0", "0"]])
    R = rc_factor(N, ROW, ts)
    NE = elementary_nilpotent(ROW)
    for t in ts:
        np.testing.assert_allclose(N(t) @ np.linalg.inv(R(t)), NE(t), atol=1e-14)


def test_rc_factor_needs_pattern(ts):
    # Full column rank but [x; y] is not of the form [S; 0]
    N = MatrixFn.from_rows([["0", "0", "2 + t"], ["0", "0", "t"], ["0", "0", "0"]])
    with pytest.raises(NeedsSmoothFactorizationError):
        rc_factor(N, COLUMN, ts)


def test_rc_factor_rejects_non_sut(ts):
    N = MatrixFn.from_rows([["0", "0", "1"], ["0", "0", "0"], ["t", "0", "0"]])
    with pytest.raises(NotSUTColumnError):
        rc_factor(N, COLUMN, ts)
    with pytest.raises(NotSUTRowError):
        rc_factor(MatrixFn.zeros(3, 3), ROW, ts)


def test_numeric_rank():
    assert numeric_rank(np.zeros((2, 2))) == 0
    assert numeric_rank(np.array([[1.0, 2.0], [2.0, 4.0]])) == 1
    assert numeric_rank(np.zeros((0, 3))) == 0


def test_characteristics_from_nilpotent():
    spec = BlockSpec(sizes=[2, 2, 1])
    structure = characteristics_from_nilpotent(elementary_nilpotent(spec)(0.0))
    assert structure.mu == 3
    assert structure.theta == spec.theta == [2, 1]
    assert structure.rank == 3
    assert characteristics_from_nilpotent(np.zeros((2, 2))).mu == 1
    with pytest.raises(NotNilpotentError):
        characteristics_from_nilpotent(np.eye(2))


def test_characteristics_from_spec():
    c = characteristics(COLUMN, 1)
    assert (c.mu, c.r, c.theta, c.d, c.a, c.m) == (2, 2, [1], 1, 3, 4)
