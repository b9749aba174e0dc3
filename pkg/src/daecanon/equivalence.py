"""
Equivalence transformations of DAE pairs.

A transform (L, K) maps {E, F} to {LEK, LFK + LEK'}, which corresponds to
premultiplying the DAE by L and substituting x = K x_bar.
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from .expr import MatrixFn, check_nonsingular, mat_inverse
from .models.reports import EquivalenceReport
from .models.structure import BlockSpec
from .utils.exceptions import PartitionMissingError, ShapeMismatchError

logger = logging.getLogger(__name__)

# Outcomes of zero_status
ZERO_SYMBOLIC = "symbolic"
ZERO_SAMPLED = "sampled"
NONZERO = "nonzero"


@dataclass(frozen=True)
class DaePair:
    """
    The pair {E, F} of E x' + F x = q on a working interval.

    When d is set, E is partitioned as diag(I_d, E22) with a = m - d; spec then
    describes the block partition of the a x a part.
    """

    E: MatrixFn
    F: MatrixFn
    interval: Tuple[float, float]
    d: Optional[int] = None
    spec: Optional[BlockSpec] = None
    avoid: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.E.rows != self.E.cols:
            raise ShapeMismatchError("DaePair", self.E.shape, (self.E.rows, self.E.rows))
        if self.F.shape != self.E.shape:
            raise ShapeMismatchError("DaePair", self.E.shape, self.F.shape)
        if self.d is not None and not 0 <= self.d <= self.m:
            raise ShapeMismatchError("DaePair partition", (self.d, self.m), (self.m, self.m))
        if self.spec is not None:
            if self.d is None:
                raise PartitionMissingError("a block spec needs the differential dimension d")
            if self.spec.a != self.m - self.d:
                raise ShapeMismatchError("DaePair block spec", (self.spec.a, self.spec.a), (self.a, self.a))

    @property
    def m(self) -> int:
        return self.E.rows

    @property
    def a(self) -> int:
        if self.d is None:
            raise PartitionMissingError()
        return self.m - self.d

    def tagged(self, d: int, spec: Optional[BlockSpec] = None) -> "DaePair":
        return dataclasses.replace(self, d=d, spec=spec)

    def with_matrices(self, E: MatrixFn = None, F: MatrixFn = None) -> "DaePair":
        return dataclasses.replace(self, E=E if E is not None else self.E, F=F if F is not None else self.F)

    def require_partition(self) -> int:
        if self.d is None:
            raise PartitionMissingError()
        return self.d

    def split(self, M: MatrixFn) -> Tuple[MatrixFn, MatrixFn, MatrixFn, MatrixFn]:
        """The (11, 12, 21, 22) blocks of M for the (d, a) partition."""
        d = self.require_partition()
        m = self.m
        return M.sub(0, d, 0, d), M.sub(0, d, d, m), M.sub(d, m, 0, d), M.sub(d, m, d, m)

    @property
    def E22(self) -> MatrixFn:
        return self.split(self.E)[3]

    @property
    def omega(self) -> MatrixFn:
        return self.split(self.F)[0]

    @property
    def R(self) -> MatrixFn:
        return self.split(self.F)[3]

    def normalized(self, budget: int) -> "DaePair":
        return self.with_matrices(self.E.normalized(budget), self.F.normalized(budget))

    def node_count(self) -> int:
        return max(self.E.node_count(), self.F.node_count())


class Transform:
    """
    An equivalence transform (L, K).

    Inverses are formed lazily unless known at construction; structured
    constructors pass their closed-form inverses in.
    """

    def __init__(
        self,
        L: MatrixFn,
        K: MatrixFn,
        L_inv: Optional[MatrixFn] = None,
        K_inv: Optional[MatrixFn] = None,
        label: str = "",
    ):
        if L.rows != L.cols or K.shape != L.shape:
            raise ShapeMismatchError("Transform", L.shape, K.shape)
        self.L = L
        self.K = K
        self._L_inv = L_inv
        self._K_inv = K_inv
        self.label = label

    def __repr__(self):
        return f"Transform({self.label or 'unnamed'}, m={self.size})"

    @classmethod
    def identity(cls, m: int, label: str = "identity") -> "Transform":
        eye = MatrixFn.identity(m)
        return cls(eye, eye, eye, eye, label=label)

    @property
    def size(self) -> int:
        return self.L.rows

    @property
    def L_inv(self) -> MatrixFn:
        if self._L_inv is None:
            self._L_inv = mat_inverse(self.L)
        return self._L_inv

    @property
    def K_inv(self) -> MatrixFn:
        if self._K_inv is None:
            self._K_inv = mat_inverse(self.K)
        return self._K_inv

    def inverse(self) -> "Transform":
        return Transform(self.L_inv, self.K_inv, self.L, self.K, label=f"inverse({self.label})")

    def then(self, other: "Transform") -> "Transform":
        return compose(self, other)

    def check_nonsingular(self, ts: Iterable[float], rank_tol: float = 1e-9):
        ts = list(ts)
        check_nonsingular(self.L, ts, rank_tol, what=f"L of {self.label or 'transform'}")
        check_nonsingular(self.K, ts, rank_tol, what=f"K of {self.label or 'transform'}")

    def normalized(self, budget: int) -> "Transform":
        return Transform(
            self.L.normalized(budget),
            self.K.normalized(budget),
            self._L_inv.normalized(budget) if self._L_inv is not None else None,
            self._K_inv.normalized(budget) if self._K_inv is not None else None,
            label=self.label,
        )

    def is_identity(self) -> bool:
        eye = MatrixFn.identity(self.size)
        return (self.L - eye).is_zero_expr() and (self.K - eye).is_zero_expr()


def apply(T: Transform, P: DaePair) -> DaePair:
    """{LEK, LFK + LEK'}; the result keeps the interval but drops the partition tags."""
    if T.size != P.m:
        raise ShapeMismatchError("apply", T.L.shape, P.E.shape)
    LE = T.L @ P.E
    E = LE @ T.K
    F = T.L @ P.F @ T.K + LE @ T.K.derivative()
    return DaePair(E, F, P.interval, avoid=P.avoid)


def compose(T1: Transform, T2: Transform) -> Transform:
    """The transform equal to applying T1 and then T2: L = L2 L1, K = K1 K2."""
    if T1.size != T2.size:
        raise ShapeMismatchError("compose", T1.L.shape, T2.L.shape)
    L_inv = T1._L_inv @ T2._L_inv if T1._L_inv is not None and T2._L_inv is not None else None
    K_inv = T2._K_inv @ T1._K_inv if T1._K_inv is not None and T2._K_inv is not None else None
    label = " -> ".join(x for x in (T1.label, T2.label) if x)
    return Transform(T2.L @ T1.L, T1.K @ T2.K, L_inv, K_inv, label=label)


def _require_block_diagonal_e(P: DaePair):
    E11, E12, E21, _ = P.split(P.E)
    d = P.d
    if not ((E11 - MatrixFn.identity(d)).is_zero_expr() and E12.is_zero_expr() and E21.is_zero_expr()):
        raise PartitionMissingError("E is not diag(I_d, E22) for the tagged partition")


def elementary_upper(P: DaePair, M12: MatrixFn) -> Tuple[Transform, DaePair]:
    """
    Transform with L = [[I, M12], [0, I]], K = [[I, -M12 E22], [0, I]].

    E is left unchanged. F becomes

        F11 + M12 F21,   F12 + M12 F22 - (F11 + M12 F21) M12 E22 - (M12 E22)'
        F21,             F22 - F21 M12 E22
    """
    d = P.require_partition()
    a = P.m - d
    if M12.shape != (d, a):
        raise ShapeMismatchError("elementary_upper", M12.shape, (d, a))
    _require_block_diagonal_e(P)
    F11, F12, F21, F22 = P.split(P.F)
    E22 = P.E22
    I_d, I_a = MatrixFn.identity(d), MatrixFn.identity(a)
    Z_ad = MatrixFn.zeros(a, d)

    ME = M12 @ E22
    top_left = F11 + M12 @ F21
    F_bar = MatrixFn.block([
        [top_left, F12 + M12 @ F22 - top_left @ ME - ME.derivative()],
        [F21, F22 - F21 @ ME],
    ])
    T = Transform(
        L=MatrixFn.block([[I_d, M12], [Z_ad, I_a]]),
        K=MatrixFn.block([[I_d, -ME], [Z_ad, I_a]]),
        L_inv=MatrixFn.block([[I_d, -M12], [Z_ad, I_a]]),
        K_inv=MatrixFn.block([[I_d, ME], [Z_ad, I_a]]),
        label="elementary_upper",
    )
    return T, P.with_matrices(F=F_bar)


def elementary_lower(P: DaePair, M21: MatrixFn) -> Tuple[Transform, DaePair]:
    """
    Transform with L = [[I, 0], [E22 M21, I]], K = [[I, 0], [-M21, I]].

    E is left unchanged. F becomes

        F11 - F12 M21,                                    F12
        F21 - F22 M21 + E22 M21 (F11 - F12 M21) - E22 M21',  F22 + E22 M21 F12
    """
    d = P.require_partition()
    a = P.m - d
    if M21.shape != (a, d):
        raise ShapeMismatchError("elementary_lower", M21.shape, (a, d))
    _require_block_diagonal_e(P)
    F11, F12, F21, F22 = P.split(P.F)
    E22 = P.E22
    I_d, I_a = MatrixFn.identity(d), MatrixFn.identity(a)
    Z_da = MatrixFn.zeros(d, a)

    EM = E22 @ M21
    top_left = F11 - F12 @ M21
    F_bar = MatrixFn.block([
        [top_left, F12],
        [F21 - F22 @ M21 + EM @ top_left - E22 @ M21.derivative(), F22 + EM @ F12],
    ])
    T = Transform(
        L=MatrixFn.block([[I_d, Z_da], [EM, I_a]]),
        K=MatrixFn.block([[I_d, Z_da], [-M21, I_a]]),
        L_inv=MatrixFn.block([[I_d, Z_da], [-EM, I_a]]),
        K_inv=MatrixFn.block([[I_d, Z_da], [M21, I_a]]),
        label="elementary_lower",
    )
    return T, P.with_matrices(F=F_bar)


def verify_equivalent(
    P: DaePair,
    Q: DaePair,
    T: Transform,
    ts: Iterable[float],
    tol: float = 1e-9,
    label: str = "",
) -> EquivalenceReport:
    """
    Sample L E_P K - E_Q and L F_P K + L E_P K' - F_Q.

    The derivative K' is symbolic; everything else is evaluated numerically,
    so the check stays cheap when the expressions are large.
    """
    ts = list(ts)
    K_prime = T.K.derivative()
    dev_E = dev_F = 0.0
    worst_E = worst_F = None
    for t in ts:
        L, K = T.L(t), T.K(t)
        LE = L @ P.E(t)
        err_E = LE @ K - Q.E(t)
        err_F = L @ P.F(t) @ K + LE @ K_prime(t) - Q.F(t)
        e = float(np.max(np.abs(err_E), initial=0.0))
        f = float(np.max(np.abs(err_F), initial=0.0))
        if worst_E is None or e > dev_E:
            dev_E, worst_E = e, float(t)
        if worst_F is None or f > dev_F:
            dev_F, worst_F = f, float(t)
    passed = dev_E <= tol and dev_F <= tol
    report = EquivalenceReport(
        label=label or T.label,
        max_dev_E=dev_E,
        max_dev_F=dev_F,
        worst_t_E=worst_E,
        worst_t_F=worst_F,
        tol=tol,
        grid_size=len(ts),
        interval=P.interval,
        passed=passed,
    )
    if passed:
        logger.debug(f"verify_equivalent {report.label}: E {dev_E:.3g}, F {dev_F:.3g}")
    else:
        logger.warning(f"verify_equivalent {report.label} failed: E {dev_E:.3g} at {worst_E}, F {dev_F:.3g} at {worst_F}")
    return report


def zero_status(M: MatrixFn, ts: Iterable[float], tol: float) -> str:
    """Decide whether M vanishes: symbolically, only at the samples, or not at all."""
    if M.is_zero_expr():
        return ZERO_SYMBOLIC
    return ZERO_SAMPLED if M.vanishes_on(ts, tol) else NONZERO
