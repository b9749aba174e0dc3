"""
Canonical objects read off a pipeline result.

The projector and its subspace bases come from the accumulated couplings of
steps 1 and 2; the pure ODE part and the characteristics from the final stage.

    Pi_can = K diag(I_d, 0) K^-1,  S_can = im Pi_can,  N_can = ker Pi_can
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg

from ..blockstruct import characteristics_from_nilpotent, numeric_rank
from ..equivalence import Transform
from ..expr import MatrixFn, check_nonsingular, mat_inverse
from ..models.params import StageName
from ..models.reports import CheckResult
from ..models.structure import Characteristics
from ..utils.exceptions import CharacteristicsMismatchError, StageMissingError
from ..utils.sampling import midpoint
from .pipeline import PipelineResult

logger = logging.getLogger(__name__)

# Principal angles below this count as equal subspaces
ANGLE_TOL = 1e-8


@dataclass
class CanonicalObjects:
    Pi_can: MatrixFn
    S_can_basis: MatrixFn
    N_can_basis: MatrixFn
    A: MatrixFn
    B: MatrixFn
    omega: MatrixFn

    @property
    def d(self) -> int:
        return self.S_can_basis.cols


@dataclass
class PureOde:
    """u' + omega u = q_mapper q, with u = u_extractor x"""

    omega: MatrixFn
    u_extractor: MatrixFn
    q_mapper: MatrixFn

    @property
    def d(self) -> int:
        return self.omega.rows


class Canonical:
    def __init__(self, session):
        self.session = session

    @property
    def settings(self):
        return self.session.settings

    def projector_from_prescf(self, result: PipelineResult, K0: Optional[Transform] = None) -> CanonicalObjects:
        """
        Canonical projector from the accumulated couplings A = sum A_i, B = sum B_j.

            Pi_can = K0 [[I + AB, -A - ABA], [B, -BA]] K0^-1

        S_can and N_can are spanned by the leading d and trailing a columns of
        K0 K1 K2; steps 3 and 4 only act on algebraic variables.

        Args:
            result: Pipeline result that completed step2
            K0: Step 0 transform, taken from the result when omitted

        Raises:
            StageMissingError: step2 has not been run
        """
        result.stage(StageName.STEP2)
        K0 = K0 or result.stage(StageName.STEP0).transform
        d, m = result.d, result.original.m
        A, B = result.A_total, result.B_total
        AB = A @ B
        inner = MatrixFn.block([
            [MatrixFn.identity(d) + AB, -A - AB @ A],
            [B, -(B @ A)],
        ])
        Pi = self.session.normalize(K0.K @ inner @ K0.K_inv)
        K = result.composite(StageName.STEP2).K
        objects = CanonicalObjects(
            Pi_can=Pi,
            S_can_basis=K.sub(0, m, 0, d),
            N_can_basis=K.sub(0, m, d, m),
            A=A,
            B=B,
            omega=result.omega,
        )
        logger.info(f"projector_from_prescf: d={d}, m={m}")
        return objects

    def projector_from_transform(self, K: MatrixFn, d: int, K_inv: Optional[MatrixFn] = None) -> MatrixFn:
        """K diag(I_d, 0) K^-1 for a transform whose leading d columns span S_can."""
        K_inv = K_inv if K_inv is not None else mat_inverse(K)
        m = K.rows
        selector = MatrixFn.block_diag(MatrixFn.identity(d), MatrixFn.zeros(m - d, m - d))
        return self.session.normalize(K @ selector @ K_inv)

    def pure_ode(self, result: PipelineResult, L0: Optional[Transform] = None, K0: Optional[Transform] = None) -> PureOde:
        """
        The pure ODE u' + Omega u = q1_bar after step1.

        u = [I_d 0] (K0 K1)^-1 x and q1_bar = [I_d 0] L1 L0 q.
        """
        stage1 = result.stage(StageName.STEP1)
        T0 = result.stage(StageName.STEP0).transform
        L0_matrix = (L0 or T0).L
        K0_inv = (K0 or T0).K_inv
        d, m = result.d, result.original.m
        u_extractor = (stage1.transform.K_inv @ K0_inv).sub(0, d, 0, m)
        q_mapper = (stage1.transform.L @ L0_matrix).sub(0, d, 0, m)
        return PureOde(
            omega=result.omega,
            u_extractor=self.session.normalize(u_extractor),
            q_mapper=self.session.normalize(q_mapper),
        )

    def omega_change_of_basis(self, omega: MatrixFn, K11: MatrixFn, ts: Optional[Sequence[float]] = None) -> MatrixFn:
        """
        Omega_hat = K11^-1 Omega K11 + K11^-1 K11' for the substitution u = K11 u_hat.
        """
        K11_inv = mat_inverse(K11, ts=ts, rank_tol=self.settings.rank_tol)
        return self.session.normalize(K11_inv @ omega @ K11 + K11_inv @ K11.derivative())

    def characteristics(self, result: PipelineResult) -> Characteristics:
        """
        (mu, r, theta, d, a, m) of the block spec, cross-checked against the
        rank sequence of the SSCF nilpotent part when step4 succeeded.

        Raises:
            CharacteristicsMismatchError: declared and computed structure differ
        """
        declared = result.characteristics
        if result.has_stage(StageName.STEP4):
            pair = result.stage(StageName.STEP4).pair
            N = pair.E22(midpoint(pair.interval))
            computed = characteristics_from_nilpotent(N, self.settings.rank_tol)
            if computed.mu != declared.mu or computed.theta != declared.theta:
                raise CharacteristicsMismatchError(
                    f"declared mu={declared.mu}, theta={declared.theta}; "
                    f"SSCF nilpotent part has mu={computed.mu}, theta={computed.theta}"
                )
        return declared

    def subspace_angles(self, S1: MatrixFn, S2: MatrixFn, ts: Sequence[float]) -> List[float]:
        """Largest principal angle between im S1(t) and im S2(t) at each sample."""
        angles = []
        for t in ts:
            a, b = S1(t), S2(t)
            if a.shape[1] == 0 and b.shape[1] == 0:
                angles.append(0.0)
                continue
            angles.append(float(np.max(scipy.linalg.subspace_angles(a, b))))
        return angles

    def same_subspace(self, S1: MatrixFn, S2: MatrixFn, ts: Sequence[float]) -> bool:
        return max(self.subspace_angles(S1, S2, ts), default=0.0) <= ANGLE_TOL

    def check_projector(self, objects: CanonicalObjects, ts: Sequence[float], tol: Optional[float] = None) -> List[CheckResult]:
        """
        Projector identities at samples: idempotence, rank and trace d,
        Pi S = S, Pi N = 0 and S (+) N = R^m.
        """
        tol = tol or self.settings.tol
        d = objects.d
        m = objects.Pi_can.rows
        dev = {"idempotent": 0.0, "trace": 0.0, "image": 0.0, "kernel": 0.0}
        rank_ok, split_ok = True, True
        for t in ts:
            Pi = objects.Pi_can(t)
            S, N = objects.S_can_basis(t), objects.N_can_basis(t)
            dev["idempotent"] = max(dev["idempotent"], float(np.max(np.abs(Pi @ Pi - Pi), initial=0.0)))
            dev["trace"] = max(dev["trace"], abs(float(np.trace(Pi)) - d))
            dev["image"] = max(dev["image"], float(np.max(np.abs(Pi @ S - S), initial=0.0)))
            dev["kernel"] = max(dev["kernel"], float(np.max(np.abs(Pi @ N), initial=0.0)))
            rank_ok &= numeric_rank(Pi, self.settings.rank_tol) == d
            split_ok &= numeric_rank(np.hstack([S, N]), self.settings.rank_tol) == m
        checks = [CheckResult(name=f"projector_{name}", deviation=value, tol=tol, passed=value <= tol) for name, value in dev.items()]
        checks.append(CheckResult(name="projector_rank", tol=tol, passed=bool(rank_ok), detail=f"expected rank {d}"))
        checks.append(CheckResult(name="subspace_split", tol=tol, passed=bool(split_ok), detail="S_can + N_can spans R^m"))
        failed = [c.name for c in checks if not c.passed]
        if failed:
            logger.warning(f"projector checks failed: {failed}")
        return checks

    def check_couplings(self, result: PipelineResult, ts: Sequence[float], tol: Optional[float] = None) -> List[CheckResult]:
        """Accumulated A and B against the (1, 2) block of K1 and the (2, 1) block of K2."""
        tol = tol or self.settings.tol
        d, m = result.d, result.original.m
        K1 = result.stage(StageName.STEP1).transform.K
        K2 = result.stage(StageName.STEP2).transform.K
        dev_A, _ = result.A_total.deviation(K1.sub(0, d, d, m), ts)
        dev_B, _ = result.B_total.deviation(K2.sub(d, m, 0, d), ts)
        return [
            CheckResult(name="coupling_A", deviation=dev_A, tol=tol, passed=dev_A <= tol),
            CheckResult(name="coupling_B", deviation=dev_B, tol=tol, passed=dev_B <= tol),
        ]

    def check_projector_agreement(self, result: PipelineResult, objects: CanonicalObjects, ts: Sequence[float]) -> CheckResult:
        """Pi_can from the couplings against K diag(I, 0) K^-1 of the full composed transform."""
        if not result.has_stage(StageName.STEP2):
            raise StageMissingError(StageName.STEP2.value)
        T = result.composite()
        check_nonsingular(T.K, self.session.check_grid(result.original), self.settings.rank_tol, what="composite K")
        other = self.projector_from_transform(T.K, objects.d, T.K_inv)
        deviation, _ = objects.Pi_can.deviation(other, ts)
        return CheckResult(name="projector_agreement", deviation=deviation, tol=self.settings.tol, passed=deviation <= self.settings.tol)
