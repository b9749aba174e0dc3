import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daecanon.expr import MatrixFn, check_nonsingular, mat_inverse, parse
from daecanon.utils.exceptions import (
    BindingConflictError,
    DerivativeOrderError,
    EvaluationDomainError,
    ExpressionSyntaxError,
    ShapeMismatchError,
    SingularAtSampleError,
    UnboundIdentifierError,
)


def test_parse_and_evaluate():
    assert parse("2*t + 1")(0.5) == pytest.approx(2.0)
    assert parse("sin(pi*t)")(0.5) == pytest.approx(1.0)
    assert parse("sqrt(t^2 + 1)")(0.0) == pytest.approx(1.0)
    assert parse("exp(log(t))")(2.5) == pytest.approx(2.5)
    assert parse("3")(7.0) == 3.0


def test_unary_minus_binds_looser_than_power():
    assert parse("-t^2")(2.0) == pytest.approx(-4.0)
    assert parse("(-t)^2")(2.0) == pytest.approx(4.0)
    assert parse("2^-1")(0.0) == pytest.approx(0.5)
    assert parse("t^-2")(2.0) == pytest.approx(0.25)


def test_parameters_stay_symbolic_until_evaluation():
    f = parse("a*t", {"a": 3})
    assert f(2.0) == pytest.approx(6.0)
    # a - a cancels exactly
    g = parse("a*t", {"a": 3}) - parse("t*a", {"a": 3})
    assert g.is_zero()


def test_conflicting_bindings():
    with pytest.raises(BindingConflictError):
        parse("a", {"a": 1}) + parse("a", {"a": 2})


def test_unbound_identifier():
    with pytest.raises(UnboundIdentifierError) as exc_info:
        parse("b*t + 1")
    assert exc_info.value.name == "b"
    assert exc_info.value.code == "unbound"


@pytest.mark.parametrize(
    "source,position",
    [
        ("t + * 2", 4),
        ("t $ 2", 2),
        ("", 0),
        ("sin t", 4),
        ("(t + 1", 6),
    ],
)
def test_syntax_error_position(source, position):
    with pytest.raises(ExpressionSyntaxError) as exc_info:
        parse(source)
    assert exc_info.value.position == position


def test_non_integer_exponent_rejected():
    with pytest.raises(ExpressionSyntaxError):
        parse("t^2.5")
    with pytest.raises(ExpressionSyntaxError):
        parse("t^t")


def test_exact_derivatives():
    f = parse("t^3 + sin(t)")
    assert f.derivative()(0.0) == pytest.approx(1.0)
    assert f.derivative(2)(1.0) == pytest.approx(6.0 - math.sin(1.0))
    assert f.derivative(0) is f


def test_derivative_order_limit():
    with pytest.raises(DerivativeOrderError):
        parse("t").derivative(3, max_order=2)
    M = MatrixFn.from_rows([["t^2"]])
    with pytest.raises(DerivativeOrderError):
        M.derivative(4, max_order=3)


def test_evaluation_outside_domain():
    with pytest.raises(EvaluationDomainError):
        parse("1/(t - 1)")(1.0)
    with pytest.raises(EvaluationDomainError):
        parse("log(t)")(-1.0)
    with pytest.raises(EvaluationDomainError):
        MatrixFn.from_rows([["1", "sqrt(t)"]])(-4.0)


def test_vectorized_scalar_evaluation():
    values = parse("t^2")(np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(values, [1.0, 4.0, 9.0])


class TestMatrixFn:
    def test_from_rows_and_call(self):
        M = MatrixFn.from_rows([["1", "t"], ["t^2", "k"]], {"k": 5})
        np.testing.assert_allclose(M(2.0), [[1.0, 2.0], [4.0, 5.0]])
        assert M.shape == (2, 2)
        assert M.bindings == {"k": 5.0}

    def test_ragged_rows(self):
        with pytest.raises(ShapeMismatchError):
            MatrixFn.from_rows([["1", "2"], ["3"]])

    def test_product_and_shape_checks(self):
        A = MatrixFn.from_rows([["1", "t"]])
        B = MatrixFn.from_rows([["t"], ["1"]])
        np.testing.assert_allclose((A @ B)(3.0), [[6.0]])
        with pytest.raises(ShapeMismatchError):
            A @ A
        with pytest.raises(ShapeMismatchError):
            A + B

    def test_block_assembly(self):
        I = MatrixFn.identity(2)
        Z = MatrixFn.zeros(2, 1)
        c = MatrixFn.from_rows([["t"]])
        M = MatrixFn.block([[I, Z], [Z.T, c]])
        np.testing.assert_allclose(M(4.0), np.diag([1.0, 1.0, 4.0]))
        np.testing.assert_allclose(MatrixFn.block_diag(I, c)(4.0), M(4.0))
        with pytest.raises(ShapeMismatchError):
            MatrixFn.block([[I, Z], [c, c]])

    def test_zero_sized_blocks(self):
        empty = MatrixFn.zeros(0, 3)
        assert empty(1.0).shape == (0, 3)
        assert (empty.T @ empty).shape == (3, 3)

    def test_derivative_and_constant(self):
        M = MatrixFn.from_rows([["sin(t)", "2"]])
        np.testing.assert_allclose(M.derivative()(0.0), [[1.0, 0.0]])
        assert not M.is_constant()
        assert MatrixFn.constant([[1.5, 0], [0, 2]]).is_constant()

    def test_to_strings_uses_caret(self):
        assert MatrixFn.from_rows([["t^2"]]).to_strings() == [["t^2"]]

    def test_deviation_reports_worst_sample(self):
        A = MatrixFn.from_rows([["t"]])
        B = MatrixFn.zeros(1, 1)
        deviation, worst_t = A.deviation(B, [0.1, 0.7, 0.3])
        assert deviation == pytest.approx(0.7)
        assert worst_t == 0.7

    def test_normalized_cancels(self):
        M = MatrixFn.from_rows([["(t^2 - 1)/(t - 1)"]])
        assert M.normalized(1000).to_strings() == [["t + 1"]]


class TestInverse:
    def test_inverse_checked_at_samples(self, ts):
        A = MatrixFn.from_rows([["1 + t^2", "t"], ["0", "2"]])
        inverse = mat_inverse(A, ts=ts)
        for t in ts:
            np.testing.assert_allclose(A(t) @ inverse(t), np.eye(2), atol=1e-12)

    def test_block_back_substitution(self, ts):
        A = MatrixFn.from_rows([["2", "t", "sin(t)"], ["0", "1", "t"], ["0", "0", "3 + t"]])
        inverse = mat_inverse(A, sizes=[1, 2], ts=ts)
        for t in ts:
            np.testing.assert_allclose(inverse(t), np.linalg.inv(A(t)), atol=1e-12)

    def test_singular_sample(self):
        A = MatrixFn.from_rows([["t - 0.5"]])
        with pytest.raises(SingularAtSampleError) as exc_info:
            check_nonsingular(A, [0.25, 0.5, 0.75])
        assert exc_info.value.t == 0.5

    def test_non_square(self):
        with pytest.raises(ShapeMismatchError):
            mat_inverse(MatrixFn.zeros(2, 3))


# Random entries built from bounded pieces, so every value stays finite on [0, 1]
leaves = st.sampled_from(["t", "1", "2", "0.5", "pi", "t^2"])


def combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda x: f"({x[0]}) {x[1]} ({x[2]})"),
        st.tuples(children, children).map(lambda x: f"({x[0]}) / (2 + ({x[1]})^2)"),
        st.tuples(st.sampled_from(["sin", "cos"]), children).map(lambda x: f"{x[0]}({x[1]})"),
        children.map(lambda e: f"exp(sin({e}))"),
        children.map(lambda e: f"sqrt(1 + ({e})^2)"),
        children.map(lambda e: f"log(2 + ({e})^2)"),
    )


expressions = st.recursive(leaves, combine, max_leaves=6)
samples = st.floats(min_value=0.1, max_value=0.9)


def central_difference(f, t, h=1e-6):
    return (f(t + h) - f(t - h)) / (2 * h)


class TestExpressionProperties:
    @settings(max_examples=200)
    @given(source=expressions, t=samples)
    def test_derivative_matches_central_difference(self, source, t):
        f = parse(source)
        exact = f.derivative()(t)
        scale = max(1.0, abs(f(t)), abs(exact))
        assert abs(exact - central_difference(f, t)) <= 1e-6 * scale, source

    @given(left=expressions, right=expressions, t=samples)
    def test_leibniz_rule(self, left, right, t):
        f, g = parse(left), parse(right)
        product = (f * g).derivative()(t)
        first, second = f.derivative()(t) * g(t), f(t) * g.derivative()(t)
        scale = max(1.0, abs(first), abs(second))
        assert abs(product - (first + second)) <= 1e-9 * scale

    @given(left=expressions, right=expressions, t=samples)
    def test_normalization_keeps_values(self, left, right, t):
        M = MatrixFn.from_rows([[left, f"({left}) * ({right})"], [f"({left}) / (2 + ({right})^2)", right]])
        values, normalized = M(t), M.normalized(20000)(t)
        scale = max(1.0, float(np.max(np.abs(values))))
        np.testing.assert_allclose(normalized, values, rtol=1e-10, atol=1e-10 * scale)

    @given(source=expressions)
    def test_identical_terms_fold_to_zero(self, source):
        assert (parse(source) - parse(source)).is_zero()
        assert MatrixFn.from_rows([[f"({source}) - ({source}) + 2*3"]]).is_constant()
        assert parse(f"0*({source})").is_zero()
