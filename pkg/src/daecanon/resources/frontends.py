"""
Step 0: bring structured input pairs into PreSCF.

PreSCF means E = diag(I_d, N_E) with the elementary nilpotent N_E, F22 block
upper triangular and nonsingular, and F21 F12 block upper triangular.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from ..blockstruct import block, elementary_nilpotent, numeric_rank, rc_factor
from ..equivalence import ZERO_SAMPLED, DaePair, Transform, apply, compose, zero_status
from ..expr import MatrixFn, check_nonsingular, mat_inverse
from ..models.problem import StructureKind, StructureTag
from ..models.reports import PreSCFDiagnosis
from ..models.structure import BlockSpec, Ordering
from ..utils.exceptions import (
    BasisUnavailableError,
    InvalidPermutationError,
    PartitionMissingError,
    PreconditionError,
    RankDropError,
    SingularAtSampleError,
    SingularMassError,
)
from ..utils.parsing import parse_bases, parse_matrix
from ..utils.sampling import midpoint

logger = logging.getLogger(__name__)


@dataclass
class Step0Outcome:
    transform: Transform
    pair: DaePair
    diagnosis: PreSCFDiagnosis
    caveats: List[str] = field(default_factory=list)
    # Intermediate forms (permuted, Hessenberg, ...) keyed by name
    forms: Dict[str, DaePair] = field(default_factory=dict)


@dataclass
class MultibodyForm:
    original: DaePair
    transform: Transform
    hessenberg: DaePair


@dataclass
class KernelBases:
    B_d: MatrixFn
    B_a: MatrixFn
    pivots: Optional[Tuple[int, ...]] = None


def permutation_matrix(permutation: Sequence[int]) -> MatrixFn:
    """K_P with x = K_P x_bar, x_bar[i] = x[permutation[i]]."""
    m = len(permutation)
    out = sympy.zeros(m, m)
    for i, j in enumerate(permutation):
        out[j, i] = 1
    return MatrixFn(out)


def _orthonormalize(columns: List[MatrixFn], t_mid: float) -> MatrixFn:
    """
    Gram-Schmidt on symbolic columns.

    Each result column is flipped so its first entry that is nonzero at t_mid
    is positive there.
    """
    done: List[MatrixFn] = []
    for v in columns:
        u = v
        for q in done:
            u = u - q.scale((q.T @ v).entry(0, 0))
        norm = sympy.sqrt((u.T @ u).data[0, 0])
        q = MatrixFn(u.data / norm, u.bindings)
        values = q(t_mid)[:, 0]
        nonzero = np.flatnonzero(np.abs(values) > 1e-12)
        if nonzero.size and values[nonzero[0]] < 0:
            q = -q
        done.append(q)
    return MatrixFn.hstack(*done)


def kernel_bases(H: MatrixFn, ts: Sequence[float], interval: Tuple[float, float], rank_tol: float = 1e-9) -> KernelBases:
    """
    Smooth orthonormal bases of ker H and of its complement im H^T.

    One fixed set of pivot columns must give a nonsingular square subblock at
    every sample; the set maximizing the smallest |det| is taken. Kernel
    vectors carry +1 in their free coordinate before orthonormalization.

    Raises:
        RankDropError: H loses full row rank at a sample
        BasisUnavailableError: no single pivot set works on the whole grid
    """
    r, n = H.shape
    values = H.eval_grid(ts)
    for t, value in zip(ts, values):
        if numeric_rank(value, rank_tol) < r:
            raise RankDropError(f"constraint block loses full row rank {r}", t)

    best, best_score = None, 0.0
    for cols in itertools.combinations(range(n), r):
        score = min(abs(np.linalg.det(v[:, cols])) / max(1.0, np.max(np.abs(v))) ** r for v in values) if r else 1.0
        if score > best_score:
            best, best_score = cols, score
    if best is None or best_score <= rank_tol:
        raise BasisUnavailableError("no pivot column set is nonsingular on the whole interval; supply bases")

    pivots = list(best)
    free = [j for j in range(n) if j not in pivots]
    H_p = MatrixFn.hstack(*[H[:, j] for j in pivots]) if pivots else MatrixFn.zeros(r, 0)
    H_p_inv = mat_inverse(H_p) if r else H_p
    kernel = []
    for f in free:
        solved = -(H_p_inv @ H[:, f]) if r else MatrixFn.zeros(0, 1)
        column = sympy.zeros(n, 1)
        column[f, 0] = 1
        for k, j in enumerate(pivots):
            column[j, 0] = solved.data[k, 0]
        kernel.append(MatrixFn(column, solved.bindings))

    t_mid = midpoint(interval)
    B_d = _orthonormalize(kernel, t_mid) if kernel else MatrixFn.zeros(n, 0)
    B_a = _orthonormalize([H.T[:, i] for i in range(r)], t_mid) if r else MatrixFn.zeros(n, 0)
    logger.debug(f"kernel_bases: pivots {pivots}, min |det| {best_score:.3g}")
    return KernelBases(B_d=B_d, B_a=B_a, pivots=tuple(pivots))


def _check_bases(bases: KernelBases, H: MatrixFn, ts: Sequence[float], tol: float):
    stacked = MatrixFn.hstack(bases.B_d, bases.B_a)
    if stacked.rows != stacked.cols:
        raise BasisUnavailableError(f"bases span {stacked.cols} columns in dimension {stacked.rows}")
    eye = np.eye(stacked.rows)
    for t in ts:
        Q = stacked(t)
        if np.max(np.abs(Q.T @ Q - eye), initial=0.0) > tol:
            raise BasisUnavailableError(f"bases are not orthonormal at t={t:.12g}")
        if bases.B_d.cols and np.max(np.abs(H(t) @ bases.B_d(t))) > tol:
            raise BasisUnavailableError(f"B_d does not lie in the kernel at t={t:.12g}")


class Frontends:
    def __init__(self, session):
        self.session = session

    @property
    def settings(self):
        return self.session.settings

    # -- PreSCF test --------------------------------------------------------

    def prescf_check(self, P: DaePair, spec: Optional[BlockSpec] = None, d: Optional[int] = None) -> PreSCFDiagnosis:
        """
        Test the PreSCF conditions at samples.

        Returns:
            PreSCFDiagnosis listing singular diagonal blocks of F22, nonzero
            below-diagonal blocks of F22 and of F21 F12
        """
        spec = spec or P.spec
        d = d if d is not None else P.d
        if spec is None or d is None:
            raise PartitionMissingError("prescf_check needs d and a block spec")
        P = P.tagged(d, spec)
        ts = self.session.verify_grid(P)
        check_ts = self.session.check_grid(P)
        tol = self.settings.tol
        diagnosis = PreSCFDiagnosis(passed=True)

        target = MatrixFn.block_diag(MatrixFn.identity(d), elementary_nilpotent(spec))
        deviation, worst_t = P.E.deviation(target, ts)
        if deviation > tol:
            diagnosis.e_structure_ok = False
            diagnosis.notes.append(f"E deviates from diag(I_d, N_E) by {deviation:.3g} at t={worst_t:.6g}")

        _, F12, F21, F22 = P.split(P.F)
        for i in range(spec.mu):
            diag_block = block(F22, spec, i, i)
            for t in check_ts:
                if numeric_rank(diag_block(t), self.settings.rank_tol) < spec.sizes[i]:
                    diagnosis.singular_diagonal_blocks.append(i)
                    diagnosis.notes.append(f"diagonal block {i} of F22 is singular at t={t:.6g}")
                    break
        diagnosis.f22_below_blocks = self._below_blocks(F22, spec, ts, tol)
        diagnosis.f21f12_below_blocks = self._below_blocks(F21 @ F12, spec, ts, tol)

        diagnosis.passed = (
            diagnosis.e_structure_ok
            and not diagnosis.singular_diagonal_blocks
            and not diagnosis.f22_below_blocks
            and not diagnosis.f21f12_below_blocks
        )
        logger.info(f"prescf_check: {'pass' if diagnosis.passed else 'fail'} (d={d}, blocks={spec.sizes})")
        return diagnosis

    @staticmethod
    def _below_blocks(M: MatrixFn, spec: BlockSpec, ts, tol) -> List[Tuple[int, int]]:
        out = []
        for i in range(spec.mu):
            for j in range(i):
                piece = block(M, spec, i, j)
                if not piece.is_zero_expr() and not piece.vanishes_on(ts, tol):
                    out.append((i, j))
        return out

    # -- shared finishing ---------------------------------------------------

    def _finish(
        self, P: DaePair, T: Transform, d: int, spec: BlockSpec, caveats: List[str], label: str
    ) -> Tuple[Transform, DaePair]:
        """Apply T, certify E = diag(I_d, N_E), snap zero blocks of F and tag the result."""
        T.label = label
        T = self.session.normalize_transform(T)
        T.check_nonsingular(self.session.check_grid(P), self.settings.rank_tol)
        Q = self.session.normalize_pair(apply(T, P))

        target = MatrixFn.block_diag(MatrixFn.identity(d), elementary_nilpotent(spec))
        deviation, worst_t = Q.E.deviation(target, self.session.verify_grid(P))
        if deviation > self.settings.tol:
            raise PreconditionError(label, f"transformed E deviates from diag(I_d, N_E) by {deviation:.3g} at t={worst_t:.6g}")
        if not (Q.E - target).is_zero_expr():
            caveats.append(f"{label}: E certified as diag(I_d, N_E) at samples")
        F = self.snap_zero_blocks(Q.F, [d] + list(spec.sizes), Q, caveats, label)
        return T, Q.with_matrices(E=target, F=F).tagged(d, spec)

    def snap_zero_blocks(self, M: MatrixFn, sizes: Sequence[int], P: DaePair, caveats: List[str], label: str) -> MatrixFn:
        """Replace every partition block of M that vanishes at the zero-detection samples by exact zeros."""
        ts = self.session.zero_grid(P)
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int).tolist()
        for i in range(len(sizes)):
            for j in range(len(sizes)):
                r0, r1, c0, c1 = offsets[i], offsets[i + 1], offsets[j], offsets[j + 1]
                if r0 == r1 or c0 == c1:
                    continue
                piece = M.sub(r0, r1, c0, c1)
                if zero_status(piece, ts, self.settings.zero_tol) == ZERO_SAMPLED:
                    M = M.replace_block(r0, c0, MatrixFn.zeros(r1 - r0, c1 - c0))
                    caveats.append(f"{label}: block ({i}, {j}) set to zero by sampling")
        return M

    # -- permutation --------------------------------------------------------

    def apply_permutation_frontend(self, P: DaePair, permutation: Sequence[int]) -> Tuple[Transform, DaePair]:
        """L = K_P^T, K = K_P; the pair's variables and equations are reordered alike."""
        permutation = list(permutation)
        if sorted(permutation) != list(range(P.m)):
            raise InvalidPermutationError(permutation, P.m)
        K_P = permutation_matrix(permutation)
        T = Transform(K_P.T, K_P, K_P, K_P.T, label="permutation")
        logger.debug(f"apply_permutation_frontend: {permutation}")
        return T, apply(T, P)

    # -- T- and S-canonical -------------------------------------------------

    def from_t_canonical(self, P: DaePair, caveats: Optional[List[str]] = None) -> Tuple[Transform, DaePair]:
        """
        T-canonical input E = diag(I_d, N), F = [[Omega, 0], [F21, F22]] with N in SUT_column.

        L = diag(I_d, R^-c), K = I; Steps 1 and 2 then leave Omega and R^-c unchanged.
        """
        d, spec = P.require_partition(), P.spec
        if spec is None or spec.ordering != Ordering.DECREASING:
            raise PartitionMissingError("T-canonical input needs a decreasing block spec")
        ts = self.session.verify_grid(P)
        E11, E12, E21, N = P.split(P.E)
        _, F12, _, _ = P.split(P.F)
        self._require_zero("t_canonical", {"E12": E12, "E21": E21, "F12": F12}, P)
        self._require_identity("t_canonical", E11, P)

        R = rc_factor(N, spec, ts, self.settings.tol, self.settings.rank_tol)
        R_inv = mat_inverse(R, sizes=spec.sizes, ts=self.session.check_grid(P), rank_tol=self.settings.rank_tol)
        T = Transform(
            L=MatrixFn.block_diag(MatrixFn.identity(d), R_inv),
            K=MatrixFn.identity(P.m),
            L_inv=MatrixFn.block_diag(MatrixFn.identity(d), R),
            K_inv=MatrixFn.identity(P.m),
        )
        return self._finish(P, T, d, spec, caveats if caveats is not None else [], "t_canonical")

    def from_s_canonical(self, P: DaePair, caveats: Optional[List[str]] = None) -> Tuple[Transform, DaePair]:
        """
        S-canonical input E = [[I_d, E12], [0, N]], F = [[Omega, F12], [0, F22]] with N in SUT_row.

        L = I, K = [[I, -E12 R^-r], [0, R^-r]]; Step 2 then performs no iteration.
        """
        d, spec = P.require_partition(), P.spec
        if spec is None or spec.ordering != Ordering.INCREASING:
            raise PartitionMissingError("S-canonical input needs an increasing block spec")
        ts = self.session.verify_grid(P)
        E11, E12, E21, N = P.split(P.E)
        _, _, F21, _ = P.split(P.F)
        self._require_zero("s_canonical", {"E21": E21, "F21": F21}, P)
        self._require_identity("s_canonical", E11, P)

        R = rc_factor(N, spec, ts, self.settings.tol, self.settings.rank_tol)
        R_inv = mat_inverse(R, sizes=spec.sizes, ts=self.session.check_grid(P), rank_tol=self.settings.rank_tol)
        I_d, Z_ad = MatrixFn.identity(d), MatrixFn.zeros(spec.a, d)
        T = Transform(
            L=MatrixFn.identity(P.m),
            K=MatrixFn.block([[I_d, -(E12 @ R_inv)], [Z_ad, R_inv]]),
            L_inv=MatrixFn.identity(P.m),
            K_inv=MatrixFn.block([[I_d, E12], [Z_ad, R]]),
        )
        return self._finish(P, T, d, spec, caveats if caveats is not None else [], "s_canonical")

    def _require_zero(self, label: str, blocks: Dict[str, MatrixFn], P: DaePair):
        ts = self.session.verify_grid(P)
        for name, piece in blocks.items():
            if piece.rows and piece.cols and not piece.is_zero_expr() and not piece.vanishes_on(ts, self.settings.tol):
                raise PreconditionError(label, f"{name} must vanish")

    def _require_identity(self, label: str, piece: MatrixFn, P: DaePair):
        deviation, _ = piece.deviation(MatrixFn.identity(piece.rows), self.session.verify_grid(P))
        if deviation > self.settings.tol:
            raise PreconditionError(label, "leading block of E must be the identity")

    # -- Hessenberg forms ---------------------------------------------------

    def _bases(self, name_d: str, name_a: str, H: MatrixFn, P: DaePair, bases: Optional[Dict[str, MatrixFn]]) -> KernelBases:
        if bases:
            found = KernelBases(B_d=bases[name_d], B_a=bases[name_a])
        else:
            found = kernel_bases(H, self.session.check_grid(P), P.interval, self.settings.rank_tol)
        _check_bases(found, H, self.session.verify_grid(P), 1e-8)
        return found

    def _check_chain(self, label: str, chain: MatrixFn, P: DaePair):
        try:
            check_nonsingular(chain, self.session.check_grid(P), self.settings.rank_tol, what=f"{label} chain product")
        except SingularAtSampleError as e:
            raise RankDropError(e.message, e.t)

    def hessenberg2_step0(
        self, P: DaePair, m_blocks: Sequence[int], bases: Optional[Dict[str, MatrixFn]] = None,
        caveats: Optional[List[str]] = None,
    ) -> Tuple[Transform, DaePair]:
        """
        Index-2 Hessenberg pair E = diag(I_m1, 0), F = [[H11, H12], [H21, 0]].

        L = [[B_d^T, 0], [B_a^T, 0], [0, I]] and K = [[B_d, 0, B_a], [0, I, 0]]
        with B_d an orthonormal basis of ker H21 and B_a one of its complement.
        """
        m1, m2 = m_blocks
        if m1 + m2 != P.m:
            raise PreconditionError("hessenberg2", f"block sizes {list(m_blocks)} do not sum to m={P.m}")
        E_target = MatrixFn.block_diag(MatrixFn.identity(m1), MatrixFn.zeros(m2, m2))
        self._require_close("hessenberg2", P.E, E_target, P)
        H12 = P.F.sub(0, m1, m1, P.m)
        H21 = P.F.sub(m1, P.m, 0, m1)
        self._require_zero("hessenberg2", {"H22": P.F.sub(m1, P.m, m1, P.m)}, P)
        self._check_chain("hessenberg2", H21 @ H12, P)

        found = self._bases("B_d", "B_a", H21, P, bases)
        B_d, B_a = found.B_d, found.B_a
        d = m1 - m2
        L = MatrixFn.block([
            [B_d.T, MatrixFn.zeros(d, m2)],
            [B_a.T, MatrixFn.zeros(m2, m2)],
            [MatrixFn.zeros(m2, m1), MatrixFn.identity(m2)],
        ])
        K = MatrixFn.block([
            [B_d, MatrixFn.zeros(m1, m2), B_a],
            [MatrixFn.zeros(m2, d), MatrixFn.identity(m2), MatrixFn.zeros(m2, m2)],
        ])
        spec = BlockSpec(sizes=[m2, m2], ordering=Ordering.DECREASING)
        T = Transform(L, K, L.T, K.T)
        return self._finish(P, T, d, spec, caveats if caveats is not None else [], "hessenberg2")

    def hessenberg3_step0(
        self, P: DaePair, m_blocks: Sequence[int], bases: Optional[Dict[str, MatrixFn]] = None,
        caveats: Optional[List[str]] = None,
    ) -> Tuple[Transform, DaePair]:
        """
        Index-3 Hessenberg pair E = diag(I_m1, I_m2, 0),
        F = [[H11, H12, H13], [[Z21 0], H22, 0], [0, H32, 0]].

        Z21 = +-I is used as is; otherwise diag(I, Z21^-1, I), diag(I, Z21, I)
        normalizes it to [I 0] first.
        """
        m1, m2, m3 = m_blocks
        if m1 + m2 + m3 != P.m:
            raise PreconditionError("hessenberg3", f"block sizes {list(m_blocks)} do not sum to m={P.m}")
        if m1 < m2:
            raise PreconditionError("hessenberg3", "m1 must not be smaller than m2")
        E_target = MatrixFn.block_diag(MatrixFn.identity(m1 + m2), MatrixFn.zeros(m3, m3))
        self._require_close("hessenberg3", P.E, E_target, P)
        F = P.F
        self._require_zero(
            "hessenberg3",
            {
                "H23": F.sub(m1, m1 + m2, m1 + m2, P.m),
                "H31": F.sub(m1 + m2, P.m, 0, m1),
                "H33": F.sub(m1 + m2, P.m, m1 + m2, P.m),
                "H21 tail": F.sub(m1, m1 + m2, m2, m1),
            },
            P,
        )
        Z21 = F.sub(m1, m1 + m2, 0, m2)
        caveats = caveats if caveats is not None else []
        T_Z = Transform.identity(P.m, label="z_normalization")
        sigma = self._signed_identity(Z21, P)
        if sigma is None:
            check_nonsingular(Z21, self.session.check_grid(P), self.settings.rank_tol, what="Z21")
            Z21_inv = mat_inverse(Z21)
            I1, I3 = MatrixFn.identity(m1), MatrixFn.identity(m3)
            T_Z = Transform(
                MatrixFn.block_diag(I1, Z21_inv, I3),
                MatrixFn.block_diag(I1, Z21, I3),
                MatrixFn.block_diag(I1, Z21, I3),
                MatrixFn.block_diag(I1, Z21_inv, I3),
                label="z_normalization",
            )
            P = apply(T_Z, P).with_matrices(E=E_target)
            F = P.F.replace_block(m1, 0, MatrixFn.identity(m2))
            P = P.with_matrices(F=F)
            sigma = 1
            caveats.append("hessenberg3: Z21 normalized to [I 0]")
        H13 = F.sub(0, m1, m1 + m2, P.m)
        H32 = F.sub(m1 + m2, P.m, m1, m1 + m2)
        lift = MatrixFn.hstack(MatrixFn.identity(m2), MatrixFn.zeros(m2, m1 - m2)).scale(sigma)
        self._check_chain("hessenberg3", H32 @ lift @ H13, P)

        found = self._bases("B_d3", "B_a3", H32, P, bases)
        B_d3, B_a3 = found.B_d, found.B_a
        theta = m3
        extra = m1 - m2
        B_d2 = MatrixFn.block_diag(B_d3, MatrixFn.identity(extra))
        B_a2 = MatrixFn.vstack(B_a3, MatrixFn.zeros(extra, theta))
        d2, d3 = B_d2.cols, B_d3.cols

        def zeros(r, c):
            return MatrixFn.zeros(r, c)

        L = MatrixFn.block([
            [B_d2.T, zeros(d2, m2), zeros(d2, m3)],
            [zeros(d3, m1), B_d3.T, zeros(d3, m3)],
            [B_a2.T, zeros(theta, m2), zeros(theta, m3)],
            [zeros(theta, m1), B_a3.T, zeros(theta, m3)],
            [zeros(m3, m1), zeros(m3, m2), MatrixFn.identity(m3)],
        ])
        K = MatrixFn.block([
            [B_d2, zeros(m1, d3), zeros(m1, m3), B_a2, zeros(m1, theta)],
            [zeros(m2, d2), B_d3, zeros(m2, m3), zeros(m2, theta), B_a3],
            [zeros(m3, d2), zeros(m3, d3), MatrixFn.identity(m3), zeros(m3, theta), zeros(m3, theta)],
        ])
        spec = BlockSpec(sizes=[theta] * 3, ordering=Ordering.DECREASING)
        T_B = Transform(L, K, L.T, K.T, label="hessenberg3")
        T, Q = self._finish(P, T_B, d2 + d3, spec, caveats, "hessenberg3")
        return compose(T_Z, T), Q

    def _signed_identity(self, Z21: MatrixFn, P: DaePair) -> Optional[int]:
        ts = self.session.verify_grid(P)
        eye = MatrixFn.identity(Z21.rows)
        for sigma in (1, -1):
            gap = Z21 - eye.scale(sigma)
            if gap.is_zero_expr() or gap.vanishes_on(ts, self.settings.tol):
                return sigma
        return None

    def _require_close(self, label: str, M: MatrixFn, target: MatrixFn, P: DaePair):
        deviation, worst_t = M.deviation(target, self.session.verify_grid(P))
        if deviation > self.settings.tol:
            raise PreconditionError(label, f"E deviates from the Hessenberg pattern by {deviation:.3g} at t={worst_t:.6g}")

    def multibody_frontend(
        self,
        M: MatrixFn,
        D: MatrixFn,
        Kstiff: MatrixFn,
        G: MatrixFn,
        Z: Optional[MatrixFn] = None,
        interval: Tuple[float, float] = (0.0, 1.0),
        avoid: Sequence[float] = (),
        caveats: Optional[List[str]] = None,
    ) -> MultibodyForm:
        """
        Linear multibody system p' = Z v, M v' + D v + K p + Z^T G^T lambda = q, G p = 0.

        L_H = [[0, M^-1, 0], [I, 0, 0], [0, 0, I]] and K_H = [[0, I, 0], [I, 0, 0], [0, 0, I]]
        reorder to x_bar = (v, p, lambda); with Z, diag(I, Z^-1, I), diag(I, Z, I) follow,
        leaving H21 = -I, H32 = G Z.
        """
        n_p, n_l = M.rows, G.rows
        Z_given = Z is not None
        Z = Z if Z_given else MatrixFn.identity(n_p)
        original = self.multibody_pair(M, D, Kstiff, G, Z, interval, avoid)

        check_ts = self.session.check_grid(original)
        try:
            check_nonsingular(M, check_ts, self.settings.rank_tol, what="mass matrix")
        except SingularAtSampleError as e:
            raise SingularMassError(e.t)
        for t in check_ts:
            if numeric_rank(G(t), self.settings.rank_tol) < n_l:
                raise RankDropError(f"constraint matrix G loses full row rank {n_l}", t)

        I_p, I_l = MatrixFn.identity(n_p), MatrixFn.identity(n_l)
        Z_pp, Z_pl, Z_lp = MatrixFn.zeros(n_p, n_p), MatrixFn.zeros(n_p, n_l), MatrixFn.zeros(n_l, n_p)
        M_inv = mat_inverse(M)
        L_H = MatrixFn.block([[Z_pp, M_inv, Z_pl], [I_p, Z_pp, Z_pl], [Z_lp, Z_lp, I_l]])
        L_H_inv = MatrixFn.block([[Z_pp, I_p, Z_pl], [M, Z_pp, Z_pl], [Z_lp, Z_lp, I_l]])
        K_H = MatrixFn.block([[Z_pp, I_p, Z_pl], [I_p, Z_pp, Z_pl], [Z_lp, Z_lp, I_l]])
        T = Transform(L_H, K_H, L_H_inv, K_H, label="multibody")
        if Z_given and not (Z - I_p).is_zero_expr():
            Z_inv = mat_inverse(Z, ts=check_ts, rank_tol=self.settings.rank_tol)
            T_Z = Transform(
                MatrixFn.block_diag(I_p, Z_inv, I_l),
                MatrixFn.block_diag(I_p, Z, I_l),
                MatrixFn.block_diag(I_p, Z, I_l),
                MatrixFn.block_diag(I_p, Z_inv, I_l),
                label="z_normalization",
            )
            T = compose(T, T_Z)

        H = self.session.normalize_pair(apply(T, original))
        E_H = MatrixFn.block_diag(MatrixFn.identity(2 * n_p), MatrixFn.zeros(n_l, n_l))
        F_H = H.F.replace_block(n_p, 0, -I_p)
        caveats = caveats if caveats is not None else []
        F_H = self.snap_zero_blocks(F_H, [n_p, n_p, n_l], H, caveats, "multibody")
        hessenberg = H.with_matrices(E=E_H, F=F_H)
        report_dev, _ = H.E.deviation(E_H, self.session.verify_grid(original))
        if report_dev > self.settings.tol:
            raise PreconditionError("multibody", f"Hessenberg E deviates by {report_dev:.3g}")
        logger.info(f"multibody_frontend: n_p={n_p}, n_lambda={n_l}")
        return MultibodyForm(original=original, transform=T, hessenberg=hessenberg)

    @staticmethod
    def multibody_pair(
        M: MatrixFn,
        D: MatrixFn,
        Kstiff: MatrixFn,
        G: MatrixFn,
        Z: Optional[MatrixFn] = None,
        interval: Tuple[float, float] = (0.0, 1.0),
        avoid: Sequence[float] = (),
    ) -> DaePair:
        """The pair of the multibody system in the variables x = (p, v, lambda)."""
        n_p, n_l = M.rows, G.rows
        Z = Z if Z is not None else MatrixFn.identity(n_p)
        I_p = MatrixFn.identity(n_p)
        Z_pp, Z_pl, Z_lp, Z_ll = (
            MatrixFn.zeros(n_p, n_p),
            MatrixFn.zeros(n_p, n_l),
            MatrixFn.zeros(n_l, n_p),
            MatrixFn.zeros(n_l, n_l),
        )
        E = MatrixFn.block_diag(I_p, M, Z_ll)
        F = MatrixFn.block([
            [Z_pp, -Z, Z_pl],
            [Kstiff, D, Z.T @ G.T],
            [G, Z_lp, Z_ll],
        ])
        return DaePair(E, F, tuple(interval), avoid=tuple(avoid))

    # -- custom transform and scaling ---------------------------------------

    def custom_transform(
        self, P: DaePair, L0: MatrixFn, K0: MatrixFn, d: int, spec: BlockSpec, caveats: Optional[List[str]] = None
    ) -> Tuple[Transform, DaePair]:
        """A user supplied Step 0 transform; its result must be in PreSCF form."""
        return self._finish(P, Transform(L0, K0), d, spec, caveats if caveats is not None else [], "custom_transform")

    def apply_scaling(
        self, P: DaePair, scaling: Sequence[MatrixFn], caveats: Optional[List[str]] = None
    ) -> Tuple[Transform, DaePair]:
        """
        Rescale the differential variables: L = diag(S^-1, I), K = diag(S, I), S = diag(s_i).
        """
        d = P.require_partition()
        if len(scaling) != d:
            raise PreconditionError("scaling", f"{len(scaling)} factors given for d={d}")
        S = MatrixFn.block_diag(*scaling) if scaling else MatrixFn.zeros(0, 0)
        S_inv = mat_inverse(S, ts=self.session.check_grid(P), rank_tol=self.settings.rank_tol)
        I_a = MatrixFn.identity(P.m - d)
        T = Transform(
            MatrixFn.block_diag(S_inv, I_a),
            MatrixFn.block_diag(S, I_a),
            MatrixFn.block_diag(S, I_a),
            MatrixFn.block_diag(S_inv, I_a),
            label="scaling",
        )
        Q = self.session.normalize_pair(apply(T, P))
        F = self.snap_zero_blocks(Q.F, [d] + list(P.spec.sizes), Q, caveats if caveats is not None else [], "scaling")
        return T, Q.with_matrices(E=P.E, F=F).tagged(d, P.spec)

    # -- dispatch -----------------------------------------------------------

    def step0(self, P: DaePair, tag: StructureTag) -> Step0Outcome:
        """
        Dispatch Step 0 by structure kind.

        A permutation in the tag is applied first, so L_0 = L_B L_P, K_0 = K_P K_B.
        """
        return self.session._certify("step0", self._step0, P, tag)

    def _step0(self, P: DaePair, tag: StructureTag) -> Step0Outcome:
        forms: Dict[str, DaePair] = {}
        T_pre = Transform.identity(P.m, label="identity")
        if tag.permutation is not None:
            T_pre, P = self.apply_permutation_frontend(P, tag.permutation)
            forms["permuted"] = P

        kind = tag.kind
        bases = parse_bases(tag) or None
        caveats: List[str] = []
        if kind == StructureKind.PRESCF:
            d, spec = self._partition(tag)
            T, Q = self._finish(P, Transform.identity(P.m), d, spec, caveats, "prescf")
        elif kind == StructureKind.T_CANONICAL:
            d, spec = self._partition(tag)
            T, Q = self.from_t_canonical(P.tagged(d, spec), caveats)
        elif kind == StructureKind.S_CANONICAL:
            d, spec = self._partition(tag)
            T, Q = self.from_s_canonical(P.tagged(d, spec), caveats)
        elif kind == StructureKind.HESSENBERG2:
            T, Q = self.hessenberg2_step0(P, tag.m_blocks, bases, caveats)
        elif kind == StructureKind.HESSENBERG3:
            T, Q = self.hessenberg3_step0(P, tag.m_blocks, bases, caveats)
        elif kind == StructureKind.MULTIBODY:
            n_p, n_l = tag.m_blocks[0], tag.m_blocks[2]
            M = P.E.sub(n_p, 2 * n_p, n_p, 2 * n_p)
            D = P.F.sub(n_p, 2 * n_p, n_p, 2 * n_p)
            Kstiff = P.F.sub(n_p, 2 * n_p, 0, n_p)
            G = P.F.sub(2 * n_p, P.m, 0, n_p)
            Z = -P.F.sub(0, n_p, n_p, 2 * n_p)
            form = self.multibody_frontend(M, D, Kstiff, G, Z, P.interval, P.avoid, caveats)
            forms["hessenberg"] = form.hessenberg
            T_B, Q = self.hessenberg3_step0(form.hessenberg, tag.m_blocks, bases, caveats)
            T = compose(form.transform, T_B)
        elif kind == StructureKind.CUSTOM_TRANSFORM:
            d, spec = self._partition(tag)
            L0 = parse_matrix(tag.L0, tag.parameters)
            K0 = parse_matrix(tag.K0, tag.parameters)
            T, Q = self.custom_transform(P, L0, K0, d, spec, caveats)
        else:
            raise PreconditionError("step0", f"unknown structure kind {kind}")

        T = compose(T_pre, T)
        if tag.scaling:
            scaling = [parse_matrix([[s]], tag.parameters) for s in tag.scaling]
            T_S, Q = self.apply_scaling(Q, scaling, caveats)
            T = compose(T, T_S)

        T.label = "step0"
        diagnosis = self.prescf_check(Q)
        if not diagnosis.passed:
            logger.warning(f"step0 ({kind.value}) output fails the PreSCF test: {diagnosis.notes}")
        logger.info(f"step0 ({kind.value}) completed: d={Q.d}, blocks={Q.spec.sizes}")
        return Step0Outcome(transform=T, pair=Q, diagnosis=diagnosis, caveats=caveats, forms=forms)

    @staticmethod
    def _partition(tag: StructureTag) -> Tuple[int, BlockSpec]:
        if tag.d is None or tag.blocks is None:
            raise PartitionMissingError(f"{tag.kind.value} input needs d and blocks")
        return tag.d, tag.blocks
