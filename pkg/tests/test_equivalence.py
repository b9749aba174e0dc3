import numpy as np
import pytest

from daecanon.equivalence import (
    NONZERO,
    ZERO_SAMPLED,
    ZERO_SYMBOLIC,
    DaePair,
    Transform,
    apply,
    compose,
    elementary_lower,
    elementary_upper,
    verify_equivalent,
    zero_status,
)
from daecanon.expr import MatrixFn
from daecanon.models.structure import BlockSpec
from daecanon.utils.exceptions import PartitionMissingError, ShapeMismatchError

INTERVAL = (0.0, 1.0)


def rows(*entries):
    return MatrixFn.from_rows(entries)


@pytest.fixture
def pair():
    """d = 1 and a nilpotent part with blocks [1, 1]."""
    E = rows(["1", "0", "0"], ["0", "0", "1"], ["0", "0", "0"])
    F = rows(["t", "1", "sin(t)"], ["2", "1 + t", "t"], ["t^2", "0", "2"])
    return DaePair(E, F, INTERVAL, d=1, spec=BlockSpec(sizes=[1, 1]))


@pytest.fixture
def transform():
    L = rows(["1", "t", "0"], ["0", "1", "0"], ["cos(t)", "0", "2"])
    K = rows(["1", "0", "t^2"], ["t", "1", "0"], ["0", "0", "1"])
    return Transform(L, K, label="test")


def test_pair_validation():
    square = MatrixFn.identity(2)
    with pytest.raises(ShapeMismatchError):
        DaePair(MatrixFn.zeros(2, 3), MatrixFn.zeros(2, 3), INTERVAL)
    with pytest.raises(ShapeMismatchError):
        DaePair(square, MatrixFn.identity(3), INTERVAL)
    with pytest.raises(ShapeMismatchError):
        DaePair(square, square, INTERVAL, d=3)
    with pytest.raises(PartitionMissingError):
        DaePair(square, square, INTERVAL, spec=BlockSpec(sizes=[1]))
    with pytest.raises(PartitionMissingError):
        DaePair(square, square, INTERVAL).a


def test_apply_is_verified(pair, transform, ts):
    Q = apply(transform, pair)
    report = verify_equivalent(pair, Q, transform, ts)
    assert report.passed
    assert report.grid_size == len(ts)
    assert report.interval == INTERVAL
    assert Q.d is None


def test_verify_reports_worst_sample(pair, transform, ts):
    Q = apply(transform, pair)
    bump = rows(["0", "0", "0"], ["0", "t", "0"], ["0", "0", "0"])
    report = verify_equivalent(pair, Q.with_matrices(F=Q.F + bump), transform, ts)
    assert not report
    assert report.max_dev_E == pytest.approx(0.0, abs=1e-12)
    assert report.max_dev_F == pytest.approx(max(ts))
    assert report.worst_t_F == pytest.approx(max(ts))


def test_compose_applies_in_order(pair, transform, ts):
    second = Transform(
        rows(["1", "0", "0"], ["t", "1", "0"], ["0", "0", "1"]),
        rows(["2", "0", "0"], ["0", "1", "t"], ["0", "0", "1"]),
        label="second",
    )
    stepwise = apply(second, apply(transform, pair))
    total = compose(transform, second)
    assert total.label == "test -> second"
    assert verify_equivalent(pair, stepwise, total, ts).passed


def test_compose_carries_known_inverses(ts):
    upper = Transform(
        rows(["1", "t"], ["0", "1"]),
        rows(["1", "0"], ["t", "1"]),
        L_inv=rows(["1", "-t"], ["0", "1"]),
        K_inv=rows(["1", "0"], ["-t", "1"]),
    )
    total = compose(upper, upper)
    assert total._L_inv is not None and total._K_inv is not None
    for t in ts:
        np.testing.assert_allclose(total.L(t) @ total.L_inv(t), np.eye(2), atol=1e-12)
        np.testing.assert_allclose(total.K(t) @ total.K_inv(t), np.eye(2), atol=1e-12)
    inverse = total.inverse()
    np.testing.assert_allclose(inverse.L(0.5), total.L_inv(0.5))


def test_identity_transform():
    assert Transform.identity(3).is_identity()
    with pytest.raises(ShapeMismatchError):
        compose(Transform.identity(2), Transform.identity(3))


def test_elementary_upper(pair, ts):
    M12 = rows(["t", "1"])
    T, Q = elementary_upper(pair, M12)
    assert (Q.E - pair.E).is_zero_expr()
    assert Q.d == 1 and Q.spec == pair.spec
    assert verify_equivalent(pair, Q, T, ts).passed
    for t in ts:
        np.testing.assert_allclose(T.L(t) @ T.L_inv(t), np.eye(3), atol=1e-12)
        np.testing.assert_allclose(T.K(t) @ T.K_inv(t), np.eye(3), atol=1e-12)


def test_elementary_lower(pair, ts):
    M21 = rows(["cos(t)"], ["t"])
    T, Q = elementary_lower(pair, M21)
    assert (Q.E - pair.E).is_zero_expr()
    assert verify_equivalent(pair, Q, T, ts).passed


def test_elementary_shape_and_partition_checks(pair):
    with pytest.raises(ShapeMismatchError):
        elementary_upper(pair, rows(["t"]))
    with pytest.raises(ShapeMismatchError):
        elementary_lower(pair, rows(["t", "1"]))
    coupled = pair.with_matrices(E=pair.E + rows(["0", "t", "0"], ["0", "0", "0"], ["0", "0", "0"]))
    with pytest.raises(PartitionMissingError):
        elementary_upper(coupled, rows(["t", "1"]))


def test_zero_status(ts):
    assert zero_status(MatrixFn.zeros(2, 2), ts, 1e-12) == ZERO_SYMBOLIC
    assert zero_status(rows(["sin(t)^2 + cos(t)^2 - 1"]), ts, 1e-12) == ZERO_SAMPLED
    assert zero_status(rows(["t"]), ts, 1e-12) == NONZERO
