"""
Steps 1 to 4: from PreSCF to SCF and, where the block recursion closes, SSCF.

    step0 -> {E0, F0} PreSCF
    step1 -> F12 = 0           (elementary_upper, at most mu iterations)
    step2 -> F21 = 0, QuasiSCF (elementary_lower, at most mu iterations)
    step3 -> SCF               (L = diag(I, R^-1))
    step4 -> SSCF              (L = diag(I, L_s), K = diag(I, K_s))
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from ..blockstruct import block, elementary_nilpotent, is_sut, numeric_rank
from ..equivalence import (
    NONZERO,
    ZERO_SAMPLED,
    ZERO_SYMBOLIC,
    DaePair,
    Transform,
    compose,
    elementary_lower,
    elementary_upper,
    verify_equivalent,
    zero_status,
)
from ..expr import MatrixFn, mat_inverse
from ..models.params import STAGE_ORDER, StageName
from ..models.problem import StructureTag
from ..models.reports import EquivalenceReport, PreSCFDiagnosis
from ..models.structure import BlockSpec, Characteristics, Ordering
from ..utils.exceptions import (
    CanonException,
    DiagonalBlockSingularError,
    NeedsSmoothFactorizationError,
    NotSUTError,
    PartitionMissingError,
    PreconditionError,
    RecursionFailedError,
    StageMissingError,
    VerificationError,
)

logger = logging.getLogger(__name__)

# Steps 1 and 2 must leave E unchanged to this accuracy
E_INVARIANCE_TOL = 1e-10


@dataclass
class Stage:
    """One pipeline stage: the transform from the previous stage's pair and its result."""

    label: str
    transform: Transform
    pair: DaePair
    report: Optional[EquivalenceReport] = None
    iterations: int = 0
    # Per-iteration transforms of steps 1 and 2
    steps: List[Transform] = field(default_factory=list)
    # A_i for step1, B_j for step2
    couplings: List[MatrixFn] = field(default_factory=list)
    caveats: List[str] = field(default_factory=list)


@dataclass
class PipelineResult:
    original: DaePair
    tag: Optional[StructureTag] = None
    stages: List[Stage] = field(default_factory=list)
    diagnosis: Optional[PreSCFDiagnosis] = None
    caveats: List[str] = field(default_factory=list)
    step4_error: Optional[CanonException] = None
    # Set once some matrix exceeded node_budget; later stages skip symbolic normalization
    over_budget: bool = False
    # Intermediate Step 0 forms (permuted, hessenberg)
    forms: Dict[str, DaePair] = field(default_factory=dict)

    def add(self, stage: Stage):
        self.stages.append(stage)
        self.caveats.extend(stage.caveats)

    def has_stage(self, label: Union[str, StageName]) -> bool:
        label = StageName(label).value
        return any(s.label == label for s in self.stages)

    def stage(self, label: Union[str, StageName]) -> Stage:
        label = StageName(label).value
        for s in self.stages:
            if s.label == label:
                return s
        raise StageMissingError(label)

    @property
    def final(self) -> Stage:
        if not self.stages:
            raise StageMissingError("step0")
        return self.stages[-1]

    @property
    def last_label(self) -> Optional[str]:
        return self.stages[-1].label if self.stages else None

    def composite(self, upto: Union[str, StageName, None] = None) -> Transform:
        """The transform from the original pair to the pair of stage `upto` (default: last stage)."""
        upto = StageName(upto).value if upto is not None else self.final.label
        self.stage(upto)
        total = Transform.identity(self.original.m)
        for s in self.stages:
            total = compose(total, s.transform)
            if s.label == upto:
                break
        total.label = f"original -> {upto}"
        return total

    @property
    def d(self) -> int:
        return self.stage(StageName.STEP0).pair.d

    @property
    def spec(self) -> BlockSpec:
        return self.stage(StageName.STEP0).pair.spec

    @property
    def omega(self) -> MatrixFn:
        return self.stage(StageName.STEP1).pair.omega

    @property
    def R(self) -> MatrixFn:
        return self.stage(StageName.STEP1).pair.R

    @property
    def A_total(self) -> MatrixFn:
        return _coupling_sum(self.stage(StageName.STEP1).couplings, self.d, self.original.m - self.d)

    @property
    def B_total(self) -> MatrixFn:
        return _coupling_sum(self.stage(StageName.STEP2).couplings, self.original.m - self.d, self.d)

    @property
    def characteristics(self) -> Characteristics:
        return Characteristics.from_spec(self.spec, self.d)

    @property
    def reports(self) -> List[EquivalenceReport]:
        return [s.report for s in self.stages if s.report is not None]


def _coupling_sum(couplings: List[MatrixFn], rows: int, cols: int) -> MatrixFn:
    total = MatrixFn.zeros(rows, cols)
    for c in couplings:
        total = total + c
    return total


class Pipeline:
    def __init__(self, session):
        self.session = session
        self._over_budget = False

    @property
    def settings(self):
        return self.session.settings

    # -- helpers ------------------------------------------------------------

    def _require_tagged(self, P: DaePair, stage: str):
        if P.d is None or P.spec is None:
            raise PartitionMissingError(f"{stage} needs a pair tagged with d and a block spec")

    def _snap_block(self, P: DaePair, r0: int, r1: int, c0: int, c1: int, name: str, caveats: List[str]) -> Tuple[DaePair, str]:
        """Zero status of the F block; sampled zeros are replaced by exact zeros."""
        piece = P.F.sub(r0, r1, c0, c1)
        if piece.rows == 0 or piece.cols == 0:
            return P, ZERO_SYMBOLIC
        status = zero_status(piece, self.session.zero_grid(P), self.settings.zero_tol)
        if status == ZERO_SAMPLED:
            P = P.with_matrices(F=P.F.replace_block(r0, c0, MatrixFn.zeros(r1 - r0, c1 - c0)))
            caveats.append(f"{name} set to zero by sampling")
            logger.warning(f"{name} vanishes only at samples; replaced by exact zeros")
        return P, status

    def _f22_inverse(self, P: DaePair, stage: str, caveats: List[str]) -> Tuple[DaePair, MatrixFn]:
        """
        Inverse of the block upper triangular F22 by block back substitution.

        Below-diagonal blocks vanishing at samples are snapped first.

        Raises:
            DiagonalBlockSingularError: a diagonal block is singular at a sample
        """
        d, spec = P.d, P.spec
        for i in range(spec.mu):
            for j in range(i):
                r0, r1 = spec.block_range(i)
                c0, c1 = spec.block_range(j)
                P, _ = self._snap_block(P, d + r0, d + r1, d + c0, d + c1, f"{stage}: F22 block ({i}, {j})", caveats)
        F22 = P.R
        for i in range(spec.mu):
            diagonal = block(F22, spec, i, i)
            for t in self.session.check_grid(P):
                if numeric_rank(diagonal(t), self.settings.rank_tol) < spec.sizes[i]:
                    raise DiagonalBlockSingularError(i, t, stage)
        return P, mat_inverse(F22, sizes=spec.sizes)

    def _normalize(self, M: MatrixFn) -> MatrixFn:
        return M if self._over_budget else self.session.normalize(M)

    def _tidy(self, where: str, T: Transform, P: DaePair, caveats: List[str]) -> Tuple[Transform, DaePair]:
        """Normalize a fresh transform and pair, then enforce the node limits."""
        if not self._over_budget:
            T = self.session.normalize_transform(T)
            P = self.session.normalize_pair(P)
        if self.session.guard_nodes(where, P.E, P.F, T.L, T.K) and not self._over_budget:
            self._over_budget = True
            caveats.append(f"{where}: node budget {self.settings.node_budget} exceeded, later stages skip symbolic normalization")
        return T, P

    # -- steps --------------------------------------------------------------

    def step1(self, P: DaePair) -> Stage:
        """
        Eliminate F12 by repeated elementary_upper transforms.

        Iteration i uses M12 = -F12 F22^-1, so K carries A_i = F12 F22^-1 N_E in
        its (1, 2) block. F12 picks up a factor N_E from the right per iteration,
        which bounds the count by mu.

        Raises:
            DiagonalBlockSingularError: F22 lost a nonsingular diagonal block
            PreconditionError: F12 does not vanish after mu iterations
        """
        self._require_tagged(P, "step1")
        d, spec = P.d, P.spec
        N_E = P.E22
        caveats: List[str] = []
        stage = Stage(label=StageName.STEP1.value, transform=Transform.identity(P.m), pair=P, caveats=caveats)

        for i in range(spec.mu + 1):
            P, status = self._snap_block(P, 0, d, d, P.m, f"step1: F12 after {i} iterations", caveats)
            if status in (ZERO_SYMBOLIC, ZERO_SAMPLED):
                break
            if i == spec.mu:
                raise PreconditionError("step1", f"F12 does not vanish after {spec.mu} iterations")
            P, F22_inv = self._f22_inverse(P, "step1", caveats)
            _, F12, _, _ = P.split(P.F)
            M12 = -(F12 @ F22_inv)
            T, P = elementary_upper(P, M12)
            T.label = f"step1.{i + 1}"
            T, P = self._tidy(T.label, T, P, caveats)
            stage.couplings.append(-(M12 @ N_E))
            stage.steps.append(T)
            stage.transform = compose(stage.transform, T)
            logger.debug(f"step1 iteration {i + 1}: F nodes {P.F.node_count()}")

        stage.transform.label = "step1"
        stage.pair = P
        stage.iterations = len(stage.steps)
        logger.info(f"step1 completed in {stage.iterations} iteration(s)")
        return stage

    def step2(self, P: DaePair) -> Stage:
        """
        Eliminate F21 by repeated elementary_lower transforms with M21 = F22^-1 F21.

        B_j = -F22^-1 F21 is the (2, 1) block of each iteration's K. Omega and R
        stay unchanged because F12 = 0.
        """
        self._require_tagged(P, "step2")
        d, spec = P.d, P.spec
        caveats: List[str] = []
        P, status = self._snap_block(P, 0, d, d, P.m, "step2: F12", caveats)
        if status not in (ZERO_SYMBOLIC, ZERO_SAMPLED):
            raise PreconditionError("step2", "F12 must vanish before F21 is eliminated")
        stage = Stage(label=StageName.STEP2.value, transform=Transform.identity(P.m), pair=P, caveats=caveats)

        for j in range(spec.mu + 1):
            P, status = self._snap_block(P, d, P.m, 0, d, f"step2: F21 after {j} iterations", caveats)
            if status in (ZERO_SYMBOLIC, ZERO_SAMPLED):
                break
            if j == spec.mu:
                raise PreconditionError("step2", f"F21 does not vanish after {spec.mu} iterations")
            P, F22_inv = self._f22_inverse(P, "step2", caveats)
            _, _, F21, _ = P.split(P.F)
            M21 = F22_inv @ F21
            T, P = elementary_lower(P, M21)
            T.label = f"step2.{j + 1}"
            T, P = self._tidy(T.label, T, P, caveats)
            stage.couplings.append(-M21)
            stage.steps.append(T)
            stage.transform = compose(stage.transform, T)
            logger.debug(f"step2 iteration {j + 1}: F nodes {P.F.node_count()}")

        stage.transform.label = "step2"
        stage.pair = P
        stage.iterations = len(stage.steps)
        logger.info(f"step2 completed in {stage.iterations} iteration(s)")
        return stage

    def step3(self, P: DaePair) -> Stage:
        """QuasiSCF to SCF: L = diag(I_d, R^-1), K = I, giving F = diag(Omega, I) exactly."""
        self._require_tagged(P, "step3")
        d = P.d
        caveats: List[str] = []
        P, status12 = self._snap_block(P, 0, d, d, P.m, "step3: F12", caveats)
        P, status21 = self._snap_block(P, d, P.m, 0, d, "step3: F21", caveats)
        if NONZERO in (status12, status21):
            raise PreconditionError("step3", "input is not in QuasiSCF (F12 and F21 must vanish)")
        P, R_inv = self._f22_inverse(P, "step3", caveats)
        R = P.R
        I_d, I_a = MatrixFn.identity(d), MatrixFn.identity(P.m - d)
        T = Transform(
            L=MatrixFn.block_diag(I_d, R_inv),
            K=MatrixFn.identity(P.m),
            L_inv=MatrixFn.block_diag(I_d, R),
            K_inv=MatrixFn.identity(P.m),
            label="step3",
        )
        E3 = MatrixFn.block_diag(I_d, self._normalize(R_inv @ P.E22))
        F3 = MatrixFn.block_diag(P.omega, I_a)
        Q = P.with_matrices(E=E3, F=F3)
        T, Q = self._tidy("step3", T, Q, caveats)
        logger.info("step3 completed")
        return Stage(label=StageName.STEP3.value, transform=T, pair=Q, caveats=caveats)

    def step4(self, P: DaePair) -> Stage:
        """
        SCF to SSCF with L = diag(I_d, L_s), K = diag(I_d, K_s).

        K_s solves N K = K N_E + N K' N_E for the SCF nilpotent part N, and
        L_s = (K_s + N K_s')^-1.

        Raises:
            NeedsSmoothFactorizationError: the block recursion has no smooth solution of this form
            RecursionFailedError: the constructed transform does not reproduce the SSCF
        """
        self._require_tagged(P, "step4")
        d, spec = P.d, P.spec
        N = P.E22
        N_E = elementary_nilpotent(spec)
        ts = self.session.verify_grid(P)
        I_d = MatrixFn.identity(d)

        if (N - N_E).is_zero_expr():
            logger.info("step4: nilpotent part is already elementary")
            return Stage(label=StageName.STEP4.value, transform=Transform.identity(P.m, label="step4"), pair=P)
        check = is_sut(N, spec, ts, self.settings.tol)
        if not check:
            raise NotSUTError(f"step4: SCF nilpotent part is not strictly block upper triangular ({check.reason})", check.block)

        K_s = self._recursion(N, spec, P)
        check_ts = self.session.check_grid(P)
        L_s = mat_inverse(K_s + N @ K_s.derivative(), sizes=spec.sizes, ts=check_ts, rank_tol=self.settings.rank_tol)
        T = Transform(MatrixFn.block_diag(I_d, L_s), MatrixFn.block_diag(I_d, K_s), label="step4")
        caveats: List[str] = []
        T, _ = self._tidy("step4", T, P, caveats)

        target = P.with_matrices(
            E=MatrixFn.block_diag(I_d, N_E),
            F=MatrixFn.block_diag(P.omega, MatrixFn.identity(P.m - d)),
        )
        report = verify_equivalent(P, target, T, ts, self.settings.tol, label="step4")
        if not report:
            raise RecursionFailedError(
                f"block recursion does not reproduce the SSCF (E dev {report.max_dev_E:.3g}, F dev {report.max_dev_F:.3g})"
            )
        logger.info("step4 completed")
        return Stage(label=StageName.STEP4.value, transform=T, pair=target, report=report, caveats=caveats)

    def _recursion(self, N: MatrixFn, spec: BlockSpec, P: DaePair) -> MatrixFn:
        """
        Block upper triangular K_s, superdiagonal by superdiagonal.

        With X = blocks of N and J_c the (c, c+1) block of N_E,

            K[i,c] J_c = sum_{k=i+1}^{c+1} X[i,k] K[k,c+1] - sum_{k=i+1}^{c} X[i,k] K'[k,c] J_c

        starting from K[mu-1,mu-1] = I. Level s = c - i only needs levels below s
        and the block one row down on level s, so each level runs bottom-up.
        """
        mu, sizes = spec.mu, spec.sizes
        column = spec.ordering == Ordering.DECREASING
        X = {(i, k): block(N, spec, i, k) for i in range(mu) for k in range(mu)}
        K: Dict[Tuple[int, int], MatrixFn] = {}
        for i in range(mu):
            for c in range(mu):
                K[(i, c)] = MatrixFn.zeros(sizes[i], sizes[c])
        K[(mu - 1, mu - 1)] = MatrixFn.identity(sizes[-1])
        ts = self.session.verify_grid(P)
        N_E = elementary_nilpotent(spec)

        for level in range(mu - 1):
            for i in range(mu - 2 - level, -1, -1):
                c = i + level
                rhs = MatrixFn.zeros(sizes[i], sizes[c + 1])
                for k in range(i + 1, c + 2):
                    rhs = rhs + X[(i, k)] @ K[(k, c + 1)]
                J_c = block(N_E, spec, c, c + 1)
                for k in range(i + 1, c + 1):
                    rhs = rhs - X[(i, k)] @ K[(k, c)].derivative() @ J_c
                rhs = self._normalize(rhs)
                K[(i, c)] = self._solve_block(rhs, sizes[i], sizes[c], sizes[c + 1], i == c, column, (i, c), ts)

        layout = [[K[(i, c)] for c in range(mu)] for i in range(mu)]
        K_s = MatrixFn.block(layout)
        for i in range(mu):
            for t in self.session.check_grid(P):
                if numeric_rank(K[(i, i)](t), self.settings.rank_tol) < sizes[i]:
                    raise NeedsSmoothFactorizationError(f"diagonal block {i} of K_s is singular at t={t:.12g}", (i, i))
        return K_s

    def _solve_block(self, rhs: MatrixFn, rows: int, width: int, next_width: int, diagonal: bool, column: bool, at, ts) -> MatrixFn:
        """Solve K J = rhs for one block, J the elementary (width x next_width) block."""
        if column:
            # J = [I; 0]: rhs gives the leading columns, the rest is completed
            if width == next_width:
                return rhs
            if diagonal:
                completion = MatrixFn.vstack(MatrixFn.zeros(next_width, width - next_width), MatrixFn.identity(width - next_width))
            else:
                completion = MatrixFn.zeros(rows, width - next_width)
            return MatrixFn.hstack(rhs, completion)
        # J = [I 0]: K is the leading columns of rhs, the trailing ones must vanish
        if width < next_width:
            rest = rhs.sub(0, rows, width, next_width)
            if not rest.is_zero_expr() and not rest.vanishes_on(ts, self.settings.tol):
                raise NeedsSmoothFactorizationError(f"block {at} of the recursion has no solution K J = rhs", at)
        return rhs.sub(0, rows, 0, width)

    # -- driver -------------------------------------------------------------

    def run_pipeline(
        self, P: DaePair, tag: StructureTag, upto: Union[str, StageName] = StageName.STEP4
    ) -> PipelineResult:
        """
        Step 0 by structure kind, then Steps 1 to 4 up to `upto`.

        Every stage is checked with verify_equivalent against its predecessor.
        A Step 4 failure leaves the SCF as final stage with `step4_error` set.
        Any other failure propagates with the completed stages in `exc.partial`.
        """
        upto = StageName(upto)
        result = PipelineResult(original=P, tag=tag)
        self._over_budget = False
        try:
            self._run(P, tag, upto, result)
        except CanonException as e:
            e.partial = result
            logger.error(f"pipeline stopped after {result.last_label or 'no stage'}: {e.message}")
            raise
        finally:
            result.over_budget = self._over_budget
        return result

    def _run(self, P: DaePair, tag: StructureTag, upto: StageName, result: PipelineResult):
        outcome = self.session.Frontends.step0(P, tag)
        result.diagnosis = outcome.diagnosis
        result.forms = outcome.forms
        stage0 = Stage(label=StageName.STEP0.value, transform=outcome.transform, pair=outcome.pair, caveats=outcome.caveats)
        self._record(result, P, stage0)
        if not outcome.diagnosis.passed:
            raise PreconditionError("step0", "; ".join(outcome.diagnosis.notes) or "output is not in PreSCF")

        steps = [
            (StageName.STEP1, self.step1),
            (StageName.STEP2, self.step2),
            (StageName.STEP3, self.step3),
            (StageName.STEP4, self.step4),
        ]
        for name, step in steps:
            if STAGE_ORDER.index(name) > STAGE_ORDER.index(upto):
                break
            previous = result.final.pair
            if name == StageName.STEP4:
                try:
                    stage = self.session._certify("step4", step, previous)
                except (NeedsSmoothFactorizationError, RecursionFailedError, NotSUTError) as e:
                    result.step4_error = e
                    result.caveats.append(f"step4: {e.message}; the result stays in SCF")
                    logger.warning(f"step4 not available, returning the SCF: {e.message}")
                    break
            else:
                stage = self.session._certify(name.value, step, previous)
            if name in (StageName.STEP1, StageName.STEP2):
                self._check_e_invariance(name.value, previous, stage.pair)
            self._record(result, previous, stage)

    def _record(self, result: PipelineResult, previous: DaePair, stage: Stage):
        if stage.report is None:
            ts = self.session.verify_grid(previous)
            stage.report = verify_equivalent(previous, stage.pair, stage.transform, ts, self.settings.tol, label=stage.label)
        if not stage.report:
            raise VerificationError(
                stage.label,
                f"max deviation E {stage.report.max_dev_E:.3g} at t={stage.report.worst_t_E}, "
                f"F {stage.report.max_dev_F:.3g} at t={stage.report.worst_t_F}",
            )
        result.add(stage)

    def _check_e_invariance(self, label: str, before: DaePair, after: DaePair):
        if (after.E - before.E).is_zero_expr():
            return
        deviation, worst_t = after.E.deviation(before.E, self.session.verify_grid(before))
        if deviation > E_INVARIANCE_TOL:
            raise VerificationError(label, f"E changed by {deviation:.3g} at t={worst_t:.6g}")

    def stage_matrices(self, result: PipelineResult, label: Union[str, StageName]) -> Dict[str, MatrixFn]:
        """E, F and the composite L, K of a stage, keyed by name."""
        stage = result.stage(label)
        T = result.composite(label)
        return {"E": stage.pair.E, "F": stage.pair.F, "L": T.L, "K": T.K}
