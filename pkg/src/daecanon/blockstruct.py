"""
Block-partition algebra for the nilpotent part of a DAE pair.

Membership in the block upper triangular (BUT) and strictly block upper
triangular (SUT) classes is certified at sample points only.
"""

import logging
from typing import Iterable, List, Sequence

import numpy as np
import sympy

from .expr import MatrixFn, mat_inverse
from .models.structure import (
    BlockSpec,
    Characteristics,
    NilpotentStructure,
    Ordering,
    StructureCheck,
)
from .utils.exceptions import (
    NeedsSmoothFactorizationError,
    NotNilpotentError,
    NotSUTColumnError,
    NotSUTRowError,
    ShapeMismatchError,
)

logger = logging.getLogger(__name__)


def numeric_rank(A: np.ndarray, rank_tol: float = 1e-9) -> int:
    """Rank with singular values below rank_tol * largest counted as zero."""
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def block(M: MatrixFn, spec: BlockSpec, i: int, j: int) -> MatrixFn:
    r0, r1 = spec.block_range(i)
    c0, c1 = spec.block_range(j)
    return M.sub(r0, r1, c0, c1)


def _numeric_block(value: np.ndarray, spec: BlockSpec, i: int, j: int) -> np.ndarray:
    r0, r1 = spec.block_range(i)
    c0, c1 = spec.block_range(j)
    return value[r0:r1, c0:c1]


def _check_square(M: MatrixFn, spec: BlockSpec, operation: str):
    if M.shape != (spec.a, spec.a):
        raise ShapeMismatchError(operation, M.shape, (spec.a, spec.a))


def elementary_nilpotent(spec: BlockSpec) -> MatrixFn:
    """
    The constant elementary nilpotent N^E of a block partition.

    Column case: block (i, i+1) is [I; 0]. Row case: block (i, i+1) is [I, 0].
    Either way the ones sit at the first min(l_i, l_{i+1}) diagonal positions.
    """
    out = sympy.zeros(spec.a, spec.a)
    offsets = spec.offsets
    for i in range(spec.mu - 1):
        for k in range(min(spec.sizes[i], spec.sizes[i + 1])):
            out[offsets[i] + k, offsets[i + 1] + k] = 1
    return MatrixFn(out)


def _below_blocks(M: MatrixFn, spec: BlockSpec, ts: Sequence[float], tol: float, strict: bool) -> StructureCheck:
    # Symbolic zeros are settled without sampling
    candidates = []
    for i in range(spec.mu):
        for j in range(i + 1 if strict else i):
            if not block(M, spec, i, j).is_zero_expr():
                candidates.append((i, j))
    if not candidates:
        return StructureCheck(passed=True)
    for t in ts:
        value = M(t)
        for i, j in candidates:
            piece = _numeric_block(value, spec, i, j)
            if piece.size and np.max(np.abs(piece)) > tol:
                kind = "diagonal" if i == j else "below-diagonal"
                return StructureCheck(passed=False, block=(i, j), t=float(t), reason=f"{kind} block ({i}, {j}) is nonzero")
    return StructureCheck(passed=True)


def is_but(M: MatrixFn, spec: BlockSpec, ts: Iterable[float], tol: float = 1e-9) -> StructureCheck:
    _check_square(M, spec, "is_but")
    return _below_blocks(M, spec, list(ts), tol, strict=False)


def is_sut(M: MatrixFn, spec: BlockSpec, ts: Iterable[float], tol: float = 1e-9) -> StructureCheck:
    _check_square(M, spec, "is_sut")
    return _below_blocks(M, spec, list(ts), tol, strict=True)


def _superdiagonal_rank(
    M: MatrixFn, spec: BlockSpec, ts: Sequence[float], rank_tol: float, column: bool
) -> StructureCheck:
    for t in ts:
        value = M(t)
        for i in range(spec.mu - 1):
            piece = _numeric_block(value, spec, i, i + 1)
            wanted = spec.sizes[i + 1] if column else spec.sizes[i]
            if numeric_rank(piece, rank_tol) != wanted:
                side = "column" if column else "row"
                return StructureCheck(
                    passed=False,
                    block=(i, i + 1),
                    t=float(t),
                    reason=f"superdiagonal block ({i}, {i + 1}) lacks full {side} rank {wanted}",
                )
    return StructureCheck(passed=True)


def is_sut_column(
    M: MatrixFn, spec: BlockSpec, ts: Iterable[float], tol: float = 1e-9, rank_tol: float = 1e-9
) -> StructureCheck:
    ts = list(ts)
    check = is_sut(M, spec, ts, tol)
    if not check:
        return check
    return _superdiagonal_rank(M, spec, ts, rank_tol, column=True)


def is_sut_row(
    M: MatrixFn, spec: BlockSpec, ts: Iterable[float], tol: float = 1e-9, rank_tol: float = 1e-9
) -> StructureCheck:
    ts = list(ts)
    check = is_sut(M, spec, ts, tol)
    if not check:
        return check
    return _superdiagonal_rank(M, spec, ts, rank_tol, column=False)


def has_secondary_pattern(
    N: MatrixFn, spec: BlockSpec, ts: Iterable[float], tol: float = 1e-9, rank_tol: float = 1e-9
) -> StructureCheck:
    """
    Test the secondary-diagonal pattern needed by rc_factor.

    Column case: N_{i,i+1} = [S; 0] with S square nonsingular.
    Row case: N_{i,i+1} = [S, 0] with S square nonsingular.
    """
    ts = list(ts)
    column = spec.ordering == Ordering.DECREASING
    for i in range(spec.mu - 1):
        piece = block(N, spec, i, i + 1)
        k = min(spec.sizes[i], spec.sizes[i + 1])
        if column:
            square, rest = piece.sub(0, k, 0, piece.cols), piece.sub(k, piece.rows, 0, piece.cols)
        else:
            square, rest = piece.sub(0, piece.rows, 0, k), piece.sub(0, piece.rows, k, piece.cols)
        if rest.rows and rest.cols and not rest.is_zero_expr():
            for t in ts:
                if np.max(np.abs(rest(t))) > tol:
                    return StructureCheck(
                        passed=False, block=(i, i + 1), t=float(t), reason="secondary block has a nonzero tail"
                    )
        for t in ts:
            if numeric_rank(square(t), rank_tol) < k:
                return StructureCheck(
                    passed=False, block=(i, i + 1), t=float(t), reason="leading square of secondary block is singular"
                )
    return StructureCheck(passed=True)


def rc_factor(
    N: MatrixFn, spec: BlockSpec, ts: Iterable[float], tol: float = 1e-9, rank_tol: float = 1e-9
) -> MatrixFn:
    """
    Factor N through the elementary nilpotent.

    Column case returns R = N N_E^T + I - N_E N_E^T with R^-1 N = N_E.
    Row case returns R = N_E^T N + I - N_E^T N_E with N R^-1 = N_E.

    Raises:
        NotSUTColumnError / NotSUTRowError: N is not SUT with full-rank secondary blocks
        NeedsSmoothFactorizationError: secondary blocks lack the [S; 0] / [S, 0] pattern
    """
    _check_square(N, spec, "rc_factor")
    ts = list(ts)
    column = spec.ordering == Ordering.DECREASING
    check = (is_sut_column if column else is_sut_row)(N, spec, ts, tol, rank_tol)
    if not check:
        error = NotSUTColumnError if column else NotSUTRowError
        raise error(check.reason or "matrix is not strictly block upper triangular", check.block)

    pattern = has_secondary_pattern(N, spec, ts, tol, rank_tol)
    if not pattern:
        raise NeedsSmoothFactorizationError(
            f"{pattern.reason} at t={pattern.t:.12g}; a smooth factorization would be required",
            pattern.block,
        )

    NE = elementary_nilpotent(spec)
    identity = MatrixFn.identity(spec.a)
    if column:
        R = N @ NE.T + identity - NE @ NE.T
    else:
        R = NE.T @ N + identity - NE.T @ NE
    logger.debug(f"rc_factor: {spec.ordering.value} case, {R.node_count()} nodes")
    return R


def rc_inverse(N: MatrixFn, spec: BlockSpec, ts: Iterable[float], tol: float = 1e-9, rank_tol: float = 1e-9) -> MatrixFn:
    """R^-1 for rc_factor(N), formed by block back substitution."""
    ts = list(ts)
    R = rc_factor(N, spec, ts, tol, rank_tol)
    return mat_inverse(R, sizes=spec.sizes, ts=ts, rank_tol=rank_tol)


def characteristics_from_nilpotent(N: np.ndarray, rank_tol: float = 1e-9) -> NilpotentStructure:
    """
    Index and theta of a constant nilpotent matrix from the rank sequence of its powers.

    theta_i = rank N^(i+1) - rank N^(i+2). Singular values of N^k below
    rank_tol * max(1, |N|)^k count as zero.

    Raises:
        NotNilpotentError: N^a does not vanish
    """
    N = np.asarray(N, dtype=float)
    size = N.shape[0]
    if size == 0:
        return NilpotentStructure(mu=0, theta=[], rank=0, size=0)
    scale = max(1.0, float(np.linalg.norm(N, 2)))
    ranks: List[int] = [size]
    power = np.eye(size)
    for k in range(1, size + 1):
        power = power @ N
        s = np.linalg.svd(power, compute_uv=False)
        ranks.append(int(np.sum(s > rank_tol * scale ** k)))
        if ranks[-1] == 0:
            break
    if ranks[-1] != 0:
        raise NotNilpotentError(f"rank sequence {ranks} does not reach zero")
    mu = len(ranks) - 1
    theta = [ranks[i + 1] - ranks[i + 2] for i in range(mu - 1)]
    return NilpotentStructure(mu=mu, theta=theta, rank=ranks[1], size=size)


def characteristics(spec: BlockSpec, d: int) -> Characteristics:
    return Characteristics.from_spec(spec, d)


def diagonal_blocks(M: MatrixFn, spec: BlockSpec) -> List[MatrixFn]:
    return [block(M, spec, i, i) for i in range(spec.mu)]
