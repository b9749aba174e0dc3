"""
Matrix-entry expressions in the time variable t.

Entries are parsed into sympy expression trees. Parameters stay symbolic and
are substituted only at evaluation time, so identities between parametrized
entries cancel exactly. Derivatives are exact (sympy.diff); numeric evaluation
goes through sympy.lambdify with numpy.
"""

import logging
import re
from functools import cached_property
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from .utils.exceptions import (
    BindingConflictError,
    DerivativeOrderError,
    EvaluationDomainError,
    ExpressionSyntaxError,
    ShapeMismatchError,
    SingularAtSampleError,
    UnboundIdentifierError,
)

logger = logging.getLogger(__name__)

T = sympy.Symbol("t", real=True)

FUNCTIONS = {
    "sin": sympy.sin,
    "cos": sympy.cos,
    "tan": sympy.tan,
    "exp": sympy.exp,
    "log": sympy.log,
    "sqrt": sympy.sqrt,
}

# Identifiers with a meaning of their own unless a problem binds them
CONSTANTS = {"pi": sympy.pi}

Number = Union[int, float]


def param_symbol(name: str) -> sympy.Symbol:
    return sympy.Symbol(name, real=True)


def _merge_bindings(*maps: Mapping[str, float]) -> Dict[str, float]:
    merged: Dict[str, float] = {}
    for m in maps:
        for name, value in m.items():
            if name in merged and merged[name] != value:
                raise BindingConflictError(name, merged[name], value)
            merged[name] = value
    return merged


def node_count(expression: sympy.Basic) -> int:
    return sum(1 for _ in sympy.preorder_traversal(expression))


def to_source(expression: sympy.Basic) -> str:
    """Render an expression in the entry grammar's operator spelling."""
    return sympy.sstr(expression).replace("**", "^")


# ---------------------------------------------------------------------------
# Parser

_TOKEN = re.compile(
    r"\s*(?:(?P<number>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


class _Token:
    def __init__(self, kind: str, text: str, position: int):
        self.kind = kind
        self.text = text
        self.position = position

    def __repr__(self):
        return f"({self.kind}, {self.text!r}, {self.position})"


def _tokenize(source: str) -> List[_Token]:
    tokens = []
    position = 0
    while position < len(source):
        if source[position:].strip() == "":
            break
        match = _TOKEN.match(source, position)
        if not match or match.end() == position:
            start = position + len(source[position:]) - len(source[position:].lstrip())
            raise ExpressionSyntaxError(source, start, f"unexpected character {source[start]!r}")
        kind = match.lastgroup
        text = match.group(kind)
        tokens.append(_Token(kind, text, match.start(kind)))
        position = match.end()
    tokens.append(_Token("eof", "", len(source)))
    return tokens


class _Parser:
    """
    Recursive descent over

        expr  := term (("+"|"-") term)*
        term  := unary (("*"|"/") unary)*
        unary := ("-"|"+") unary | power
        power := atom ("^" ["-"] integer)?
        atom  := number | "t" | identifier | function "(" expr ")" | "(" expr ")"
    """

    def __init__(self, source: str, params: Mapping[str, Number]):
        self.source = source
        self.params = params
        self.tokens = _tokenize(source)
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, text: str) -> _Token:
        if self.current.text != text:
            self.fail(f"expected {text!r}")
        return self.advance()

    def fail(self, message: str):
        token = self.current
        found = "end of input" if token.kind == "eof" else repr(token.text)
        raise ExpressionSyntaxError(self.source, token.position, f"{message}, found {found}")

    def parse(self) -> sympy.Expr:
        if self.current.kind == "eof":
            self.fail("empty expression")
        result = self.expr()
        if self.current.kind != "eof":
            self.fail("unexpected token")
        return result

    def expr(self) -> sympy.Expr:
        result = self.term()
        while self.current.text in ("+", "-"):
            op = self.advance().text
            right = self.term()
            result = result + right if op == "+" else result - right
        return result

    def term(self) -> sympy.Expr:
        result = self.unary()
        while self.current.text in ("*", "/"):
            op = self.advance().text
            right = self.unary()
            result = result * right if op == "*" else result / right
        return result

    def unary(self) -> sympy.Expr:
        if self.current.text == "-":
            self.advance()
            return -self.unary()
        if self.current.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> sympy.Expr:
        base = self.atom()
        if self.current.text != "^":
            return base
        self.advance()
        sign = 1
        if self.current.text == "-":
            self.advance()
            sign = -1
        token = self.current
        if token.kind != "number" or not token.text.isdigit():
            self.fail("integer exponent required")
        self.advance()
        return base ** (sign * int(token.text))

    def atom(self) -> sympy.Expr:
        token = self.current
        if token.kind == "number":
            self.advance()
            return sympy.Rational(token.text)
        if token.text == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        if token.kind == "name":
            self.advance()
            name = token.text
            if name in FUNCTIONS:
                if self.current.text != "(":
                    self.fail(f"function {name} needs an argument")
                self.advance()
                argument = self.expr()
                self.expect(")")
                return FUNCTIONS[name](argument)
            if name == "t":
                return T
            if name in self.params:
                return param_symbol(name)
            if name in CONSTANTS:
                return CONSTANTS[name]
            raise UnboundIdentifierError(name, self.source)
        self.fail("expected a number, t, a parameter, a function or '('")


# ---------------------------------------------------------------------------
# Scalar functions


class ScalarFn:
    """A scalar function of t given by an expression and parameter values."""

    def __init__(
        self,
        expression: Union[sympy.Expr, Number],
        bindings: Optional[Mapping[str, Number]] = None,
    ):
        self.expression = sympy.sympify(expression)
        used = {s.name for s in self.expression.free_symbols if s != T}
        bindings = dict(bindings or {})
        self.bindings = {name: float(bindings[name]) for name in used if name in bindings}
        missing = used - set(self.bindings)
        if missing:
            raise UnboundIdentifierError(sorted(missing)[0], str(self.expression))

    def __repr__(self):
        return f"ScalarFn({to_source(self.expression)})"

    @cached_property
    def _numeric(self):
        names = sorted(self.bindings)
        func = sympy.lambdify((T, *[param_symbol(n) for n in names]), self.expression, modules="numpy")
        values = [self.bindings[n] for n in names]
        return lambda t: func(t, *values)

    def __call__(self, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        with np.errstate(all="ignore"):
            value = np.broadcast_to(np.asarray(self._numeric(np.asarray(t, dtype=float)), dtype=float), np.shape(t))
        finite = np.isfinite(value)
        if not np.all(finite):
            times = np.atleast_1d(np.broadcast_to(np.asarray(t, dtype=float), value.shape))
            bad = float(times[~np.atleast_1d(finite)][0])
            raise EvaluationDomainError(bad, f"{self!r} is not finite")
        return float(value) if value.ndim == 0 else np.array(value)

    def derivative(self, k: int = 1, max_order: Optional[int] = None) -> "ScalarFn":
        if max_order is not None and k > max_order:
            raise DerivativeOrderError(k, max_order)
        if k == 0:
            return self
        return ScalarFn(sympy.diff(self.expression, T, k), self.bindings)

    def is_zero(self) -> bool:
        return self.expression == 0

    def node_count(self) -> int:
        return node_count(self.expression)

    def _lift(self, other) -> "ScalarFn":
        return other if isinstance(other, ScalarFn) else ScalarFn(other)

    def _combine(self, other, op) -> "ScalarFn":
        other = self._lift(other)
        return ScalarFn(op(self.expression, other.expression), _merge_bindings(self.bindings, other.bindings))

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._combine(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._combine(other, lambda a, b: a / b)

    def __rtruediv__(self, other):
        return self._combine(other, lambda a, b: b / a)

    def __neg__(self):
        return ScalarFn(-self.expression, self.bindings)

    def __pow__(self, k: int):
        return ScalarFn(self.expression ** k, self.bindings)


def parse(source: str, params: Optional[Mapping[str, Number]] = None) -> ScalarFn:
    """Parse an entry expression; every identifier other than t must be bound in params."""
    params = dict(params or {})
    if isinstance(source, (int, float)):
        return ScalarFn(sympy.nsimplify(source, rational=True))
    expression = _Parser(str(source), params).parse()
    return ScalarFn(expression, params)


def derivative(f: ScalarFn, k: int = 1, max_order: Optional[int] = None) -> ScalarFn:
    return f.derivative(k, max_order)


# ---------------------------------------------------------------------------
# Matrix functions


class MatrixFn:
    """
    An immutable rows x cols matrix of scalar functions of t.

    Zero-sized dimensions are allowed; they arise as empty blocks when d = 0
    or when a kernel basis has no columns.
    """

    def __init__(self, data: Any, bindings: Optional[Mapping[str, Number]] = None):
        if isinstance(data, MatrixFn):
            bindings = _merge_bindings(data.bindings, bindings or {})
            data = data.data
        self.data = sympy.ImmutableMatrix(data)
        used = {s.name for s in self.data.free_symbols if s != T}
        bindings = dict(bindings or {})
        missing = used - set(bindings)
        if missing:
            raise UnboundIdentifierError(sorted(missing)[0])
        self.bindings = {name: float(bindings[name]) for name in used}

    # -- construction -------------------------------------------------------

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Union[str, Number]]], params: Optional[Mapping[str, Number]] = None) -> "MatrixFn":
        """Build from nested lists of entry strings or numbers."""
        params = dict(params or {})
        width = {len(r) for r in rows}
        if len(width) > 1:
            raise ShapeMismatchError("from_rows", (len(rows), min(width)), (len(rows), max(width)))
        entries = [[parse(e, params).expression for e in row] for row in rows]
        if not entries:
            return cls.zeros(0, 0)
        return cls(entries, params)

    @classmethod
    def identity(cls, n: int) -> "MatrixFn":
        return cls(sympy.eye(n))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "MatrixFn":
        return cls(sympy.zeros(rows, cols))

    @classmethod
    def constant(cls, values: Any) -> "MatrixFn":
        array = np.atleast_2d(np.asarray(values, dtype=float))
        if np.asarray(values).ndim == 1:
            array = array.reshape(-1, 1)
        return cls(sympy.Matrix(array.shape[0], array.shape[1], lambda i, j: sympy.nsimplify(array[i, j], rational=True)))

    @classmethod
    def from_scalars(cls, entries: Sequence[Sequence[ScalarFn]]) -> "MatrixFn":
        bindings = _merge_bindings(*[e.bindings for row in entries for e in row])
        return cls([[e.expression for e in row] for row in entries], bindings)

    @classmethod
    def column(cls, entries: Sequence[ScalarFn]) -> "MatrixFn":
        if not entries:
            return cls.zeros(0, 1)
        return cls.from_scalars([[e] for e in entries])

    @classmethod
    def block_diag(cls, *blocks: "MatrixFn") -> "MatrixFn":
        rows = sum(b.rows for b in blocks)
        cols = sum(b.cols for b in blocks)
        out = sympy.zeros(rows, cols)
        r = c = 0
        for b in blocks:
            out[r:r + b.rows, c:c + b.cols] = b.data
            r += b.rows
            c += b.cols
        return cls(out, _merge_bindings(*[b.bindings for b in blocks]))

    @classmethod
    def block(cls, layout: Sequence[Sequence["MatrixFn"]]) -> "MatrixFn":
        """Assemble a block matrix from a row-major grid of conforming blocks."""
        row_heights = [row[0].rows for row in layout]
        col_widths = [b.cols for b in layout[0]]
        for i, row in enumerate(layout):
            if len(row) != len(col_widths):
                raise ShapeMismatchError("block", (i, len(row)), (i, len(col_widths)))
            for j, b in enumerate(row):
                if b.shape != (row_heights[i], col_widths[j]):
                    raise ShapeMismatchError("block", b.shape, (row_heights[i], col_widths[j]))
        out = sympy.zeros(sum(row_heights), sum(col_widths))
        r = 0
        for i, row in enumerate(layout):
            c = 0
            for j, b in enumerate(row):
                out[r:r + row_heights[i], c:c + col_widths[j]] = b.data
                c += col_widths[j]
            r += row_heights[i]
        return cls(out, _merge_bindings(*[b.bindings for row in layout for b in row]))

    @classmethod
    def hstack(cls, *blocks: "MatrixFn") -> "MatrixFn":
        return cls.block([list(blocks)])

    @classmethod
    def vstack(cls, *blocks: "MatrixFn") -> "MatrixFn":
        return cls.block([[b] for b in blocks])

    # -- shape and access ---------------------------------------------------

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    def __repr__(self):
        return f"MatrixFn({self.rows}x{self.cols})"

    def __getitem__(self, key) -> "MatrixFn":
        rows, cols = key
        sub = self.data[rows, cols]
        if not isinstance(sub, sympy.MatrixBase):
            sub = sympy.Matrix([[sub]])
        return MatrixFn(sub, self.bindings)

    def entry(self, i: int, j: int) -> ScalarFn:
        return ScalarFn(self.data[i, j], self.bindings)

    def entries(self) -> List[List[ScalarFn]]:
        return [[self.entry(i, j) for j in range(self.cols)] for i in range(self.rows)]

    def sub(self, r0: int, r1: int, c0: int, c1: int) -> "MatrixFn":
        return MatrixFn(self.data[r0:r1, c0:c1], self.bindings)

    def replace_block(self, r0: int, c0: int, block: "MatrixFn") -> "MatrixFn":
        out = sympy.Matrix(self.data)
        out[r0:r0 + block.rows, c0:c0 + block.cols] = block.data
        return MatrixFn(out, _merge_bindings(self.bindings, block.bindings))

    # -- algebra ------------------------------------------------------------

    def _check(self, other: "MatrixFn", operation: str, same: bool):
        if same and self.shape != other.shape:
            raise ShapeMismatchError(operation, self.shape, other.shape)
        if not same and self.cols != other.rows:
            raise ShapeMismatchError(operation, self.shape, other.shape)

    def __matmul__(self, other: "MatrixFn") -> "MatrixFn":
        self._check(other, "mat_mul", same=False)
        return MatrixFn(self.data * other.data, _merge_bindings(self.bindings, other.bindings))

    def __add__(self, other: "MatrixFn") -> "MatrixFn":
        self._check(other, "mat_add", same=True)
        return MatrixFn(self.data + other.data, _merge_bindings(self.bindings, other.bindings))

    def __sub__(self, other: "MatrixFn") -> "MatrixFn":
        self._check(other, "mat_sub", same=True)
        return MatrixFn(self.data - other.data, _merge_bindings(self.bindings, other.bindings))

    def __neg__(self) -> "MatrixFn":
        return MatrixFn(-self.data, self.bindings)

    def scale(self, factor: Union[Number, ScalarFn]) -> "MatrixFn":
        if isinstance(factor, ScalarFn):
            return MatrixFn(self.data * factor.expression, _merge_bindings(self.bindings, factor.bindings))
        return MatrixFn(self.data * sympy.nsimplify(factor, rational=True), self.bindings)

    @property
    def T(self) -> "MatrixFn":
        return MatrixFn(self.data.T, self.bindings)

    def derivative(self, k: int = 1, max_order: Optional[int] = None) -> "MatrixFn":
        if max_order is not None and k > max_order:
            raise DerivativeOrderError(k, max_order)
        data = self.data
        for _ in range(k):
            data = data.diff(T)
        return MatrixFn(data, self.bindings)

    def applyfunc(self, func) -> "MatrixFn":
        return MatrixFn(self.data.applyfunc(func), self.bindings)

    # -- symbolic queries ---------------------------------------------------

    def is_zero_expr(self) -> bool:
        return all(e == 0 for e in self.data)

    def is_constant(self) -> bool:
        return T not in self.data.free_symbols

    def node_count(self) -> int:
        return sum(node_count(e) for e in self.data)

    def normalized(self, budget: int) -> "MatrixFn":
        """Pass every entry below the node budget through sympy.cancel."""

        def _cancel(e):
            if e.is_number or node_count(e) > budget:
                return e
            return sympy.cancel(e)

        return self.applyfunc(_cancel)

    def to_strings(self) -> List[List[str]]:
        return [[to_source(self.data[i, j]) for j in range(self.cols)] for i in range(self.rows)]

    # -- numerics -----------------------------------------------------------

    @cached_property
    def _numeric(self):
        names = sorted(self.bindings)
        func = sympy.lambdify((T, *[param_symbol(n) for n in names]), self.data, modules="numpy")
        values = [self.bindings[n] for n in names]
        return lambda t: func(t, *values)

    def __call__(self, t: float) -> np.ndarray:
        if self.rows == 0 or self.cols == 0:
            return np.zeros(self.shape)
        with np.errstate(all="ignore"):
            value = np.array(self._numeric(np.float64(t)), dtype=float).reshape(self.shape)
        if not np.all(np.isfinite(value)):
            raise EvaluationDomainError(float(t), f"non-finite entry in {self!r}")
        return value

    def eval_grid(self, ts: Iterable[float]) -> List[np.ndarray]:
        return [self(t) for t in ts]

    def max_abs(self, ts: Iterable[float]) -> float:
        values = [np.max(np.abs(v)) if v.size else 0.0 for v in self.eval_grid(ts)]
        return float(max(values)) if values else 0.0

    def deviation(self, other: "MatrixFn", ts: Iterable[float]) -> Tuple[float, Optional[float]]:
        """Max entrywise |self - other| over ts and the sample where it occurs."""
        self._check(other, "deviation", same=True)
        worst, worst_t = 0.0, None
        for t in ts:
            diff = self(t) - other(t)
            dev = float(np.max(np.abs(diff))) if diff.size else 0.0
            if worst_t is None or dev > worst:
                worst, worst_t = dev, t
        return worst, worst_t

    def vanishes_on(self, ts: Iterable[float], tol: float) -> bool:
        return self.max_abs(ts) <= tol


# ---------------------------------------------------------------------------
# Module-level operations


def mat_mul(A: MatrixFn, B: MatrixFn) -> MatrixFn:
    return A @ B


def mat_add(A: MatrixFn, B: MatrixFn) -> MatrixFn:
    return A + B


def mat_scale(A: MatrixFn, factor: Union[Number, ScalarFn]) -> MatrixFn:
    return A.scale(factor)


def mat_transpose(A: MatrixFn) -> MatrixFn:
    return A.T


def eval_grid(A: MatrixFn, ts: Iterable[float]) -> List[np.ndarray]:
    return A.eval_grid(ts)


def check_nonsingular(A: MatrixFn, ts: Iterable[float], rank_tol: float = 1e-9, what: str = "matrix"):
    """Raise SingularAtSampleError at the first sample where A(t) loses rank."""
    if A.rows != A.cols:
        raise ShapeMismatchError("nonsingularity check", A.shape, (A.rows, A.rows))
    if A.rows == 0:
        return
    for t in ts:
        s = np.linalg.svd(A(t), compute_uv=False)
        if s[0] == 0.0 or s[-1] <= rank_tol * s[0]:
            raise SingularAtSampleError(t, what)


def _small_inverse(M: sympy.MatrixBase) -> sympy.Matrix:
    n = M.shape[0]
    if n == 0:
        return sympy.zeros(0, 0)
    if n == 1:
        return sympy.Matrix([[1 / M[0, 0]]])
    if M.is_upper or M.is_lower:
        # Triangular: back substitution keeps entries as plain quotients
        return M.inv(method="LU")
    if n <= 3:
        return M.inv(method="ADJ")
    return M.inv(method="LU")


def _block_back_substitution(M: sympy.MatrixBase, sizes: Sequence[int]) -> sympy.Matrix:
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int).tolist()
    k = len(sizes)

    def blk(A, i, j):
        return A[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]]

    X = sympy.zeros(M.shape[0], M.shape[1])
    diag_inv = [_small_inverse(blk(M, i, i)) for i in range(k)]
    for i in range(k):
        X[offsets[i]:offsets[i + 1], offsets[i]:offsets[i + 1]] = diag_inv[i]
    for j in range(k):
        for i in range(j - 1, -1, -1):
            acc = sympy.zeros(sizes[i], sizes[j])
            for m in range(i + 1, j + 1):
                acc += blk(M, i, m) * blk(X, m, j)
            X[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]] = -diag_inv[i] * acc
    return X


def mat_inverse(
    A: MatrixFn,
    sizes: Optional[Sequence[int]] = None,
    ts: Optional[Iterable[float]] = None,
    rank_tol: float = 1e-9,
    check_tol: float = 1e-8,
) -> MatrixFn:
    """
    Symbolic inverse of a square matrix function.

    With `sizes` given and A block upper triangular for that partition, the
    inverse is formed by block back substitution. With `ts` given, A is first
    certified nonsingular at those samples and the result is checked against
    A @ A^-1 = I there.
    """
    if A.rows != A.cols:
        raise ShapeMismatchError("mat_inverse", A.shape, (A.rows, A.rows))
    ts = list(ts) if ts is not None else None
    if ts:
        check_nonsingular(A, ts, rank_tol)

    if sizes and sum(sizes) == A.rows and _is_block_upper(A.data, sizes):
        inv = _block_back_substitution(A.data, sizes)
    else:
        inv = _small_inverse(A.data)
    result = MatrixFn(inv, A.bindings)

    if ts:
        identity = np.eye(A.rows)
        for t in ts:
            if np.max(np.abs(A(t) @ result(t) - identity), initial=0.0) > check_tol:
                raise SingularAtSampleError(t, "inverse check")
    return result


def _is_block_upper(M: sympy.MatrixBase, sizes: Sequence[int]) -> bool:
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int).tolist()
    for i in range(len(sizes)):
        below = M[offsets[i + 1]:, offsets[i]:offsets[i + 1]]
        if any(e != 0 for e in below):
            return False
    return True
