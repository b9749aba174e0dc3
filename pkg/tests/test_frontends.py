import numpy as np
import pytest

from daecanon import testing
from daecanon.blockstruct import elementary_nilpotent
from daecanon.equivalence import DaePair, verify_equivalent
from daecanon.expr import MatrixFn
from daecanon.models.structure import BlockSpec
from daecanon.problem import load
from daecanon.resources.frontends import kernel_bases, permutation_matrix
from daecanon.utils.exceptions import (
    InvalidPermutationError,
    PreconditionError,
    RankDropError,
    SingularMassError,
)


def rows(*entries):
    return MatrixFn.from_rows(entries)


def assert_in_prescf(session, document):
    loaded = load(document)
    outcome = session.Frontends.step0(loaded.pair, loaded.tag)
    assert outcome.diagnosis.passed, outcome.diagnosis.notes
    Q = outcome.pair
    target = MatrixFn.block_diag(MatrixFn.identity(Q.d), elementary_nilpotent(Q.spec))
    assert (Q.E - target).is_zero_expr()
    ts = session.verify_grid(loaded.pair)
    assert verify_equivalent(loaded.pair, Q, outcome.transform, ts, session.settings.tol).passed
    return outcome


class TestPreSCFCheck:
    SPEC = BlockSpec(sizes=[1, 1])
    E = rows(["1", "0", "0"], ["0", "0", "1"], ["0", "0", "0"])

    def pair(self, F):
        return DaePair(self.E, F, (0.0, 1.0), d=1, spec=self.SPEC)

    def test_pass(self, session):
        F = rows(["t", "1", "0"], ["1", "2", "t"], ["0", "0", "1 + t"])
        assert session.Frontends.prescf_check(self.pair(F))

    def test_singular_diagonal_block(self, session):
        F = rows(["t", "0", "0"], ["0", "0", "t"], ["0", "0", "1"])
        diagnosis = session.Frontends.prescf_check(self.pair(F))
        assert not diagnosis
        assert diagnosis.singular_diagonal_blocks == [0]

    def test_below_diagonal_blocks(self, session):
        F = rows(["t", "1", "0"], ["1", "2", "0"], ["0", "t", "1"])
        diagnosis = session.Frontends.prescf_check(self.pair(F))
        assert diagnosis.f22_below_blocks == [(1, 0)]
        F = rows(["t", "1", "0"], ["0", "2", "0"], ["1", "0", "1"])
        diagnosis = session.Frontends.prescf_check(self.pair(F))
        assert diagnosis.f21f12_below_blocks == [(1, 0)]

    def test_wrong_e(self, session):
        F = rows(["t", "0", "0"], ["0", "1", "0"], ["0", "0", "1"])
        pair = DaePair(MatrixFn.identity(3), F, (0.0, 1.0), d=1, spec=self.SPEC)
        diagnosis = session.Frontends.prescf_check(pair)
        assert not diagnosis.e_structure_ok


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_random_prescf_is_accepted(session, seed):
    outcome = assert_in_prescf(session, testing.random_prescf(seed))
    assert outcome.transform.is_identity()


@pytest.mark.parametrize("seed", range(40))
def test_random_prescf_coupling_is_block_upper(session, seed):
    pair = load(testing.random_prescf(seed)).pair
    d, spec = pair.d, pair.spec
    for t in (0.2, 0.7):
        F = pair.F(t)
        coupling = F[d:, :d] @ F[:d, d:]
        for i in range(spec.mu):
            r0, r1 = spec.block_range(i)
            for j in range(i):
                c0, c1 = spec.block_range(j)
                assert not np.any(coupling[r0:r1, c0:c1]), (i, j)
    assert session.Frontends.prescf_check(pair)


@pytest.mark.parametrize("seed", [4, 5])
def test_t_canonical(session, seed):
    outcome = assert_in_prescf(session, testing.random_t_canonical(seed))
    # L = diag(I, R^-1) and K = I
    assert outcome.transform.K.is_constant()


@pytest.mark.parametrize("seed", [6, 7])
def test_s_canonical(session, seed):
    outcome = assert_in_prescf(session, testing.random_s_canonical(seed))
    assert (outcome.transform.L - MatrixFn.identity(outcome.pair.m)).is_zero_expr()


def test_t_canonical_rejects_coupled_e(session):
    document = testing.random_t_canonical(4)
    document["E"][0][1] = "t"
    loaded = load(document)
    with pytest.raises(PreconditionError):
        session.Frontends.step0(loaded.pair, loaded.tag)


@pytest.mark.parametrize("seed", [8, 9])
def test_hessenberg2(session, seed):
    document = testing.random_hessenberg2(seed)
    outcome = assert_in_prescf(session, document)
    m1, m2 = document["structure"]["m_blocks"]
    assert outcome.pair.d == m1 - m2
    assert outcome.pair.spec.sizes == [m2, m2]


@pytest.mark.parametrize("sign", [1, -1])
def test_hessenberg3(session, sign):
    document = testing.random_hessenberg3(10, sign=sign)
    outcome = assert_in_prescf(session, document)
    m1, m2, m3 = document["structure"]["m_blocks"]
    assert outcome.pair.spec.sizes == [m3, m3, m3]
    assert outcome.pair.d == m1 + m2 + m3 - 3 * m3


def test_hessenberg3_normalizes_z21(session):
    document = {
        "name": "scaled Z21",
        "interval": [0.0, 1.0],
        "structure": {"kind": "hessenberg3", "m_blocks": [2, 2, 1]},
        "E": [
            ["1", "0", "0", "0", "0"],
            ["0", "1", "0", "0", "0"],
            ["0", "0", "1", "0", "0"],
            ["0", "0", "0", "1", "0"],
            ["0", "0", "0", "0", "0"],
        ],
        "F": [
            ["t", "0", "1", "0", "1"],
            ["0", "t", "0", "1", "0"],
            ["2 + t", "0", "t", "0", "0"],
            ["0", "2 + t", "0", "t", "0"],
            ["0", "0", "1", "0", "0"],
        ],
    }
    outcome = assert_in_prescf(session, document)
    assert any("Z21 normalized" in c for c in outcome.caveats)
    assert outcome.pair.d == 2


def test_hessenberg2_chain_rank_drop(session):
    document = {
        "name": "degenerate chain",
        "interval": [0.0, 1.0],
        "structure": {"kind": "hessenberg2", "m_blocks": [2, 1]},
        "E": [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "0"]],
        "F": [["0", "0", "1"], ["0", "0", "0"], ["0", "1", "0"]],
    }
    loaded = load(document)
    with pytest.raises(RankDropError):
        session.Frontends.step0(loaded.pair, loaded.tag)


def test_multibody(session):
    document = {
        "name": "pendulum pair",
        "interval": [0.0, 1.0],
        "structure": {"kind": "multibody"},
        "multibody": {
            "M": [["1", "0"], ["0", "2"]],
            "D": [["0", "0"], ["0", "0"]],
            "K": [["1", "0"], ["0", "1"]],
            "G": [["1", "t"]],
        },
    }
    outcome = assert_in_prescf(session, document)
    assert "hessenberg" in outcome.forms
    assert outcome.pair.d == 2
    assert outcome.pair.spec.sizes == [1, 1, 1]


def test_multibody_singular_mass(session):
    with pytest.raises(SingularMassError):
        session.Frontends.multibody_frontend(
            rows(["t - t"]), rows(["0"]), rows(["1"]), rows(["1"])
        )


def test_permutation(session):
    K_P = permutation_matrix([2, 0, 1])
    x = np.array([10.0, 20.0, 30.0])
    # x = K_P x_bar with x_bar[i] = x[permutation[i]]
    np.testing.assert_allclose(K_P(0.0) @ np.array([30.0, 10.0, 20.0]), x)

    pair = DaePair(rows(["1", "0", "0"], ["0", "2", "0"], ["0", "0", "3"]), MatrixFn.identity(3), (0.0, 1.0))
    T, Q = session.Frontends.apply_permutation_frontend(pair, [2, 0, 1])
    np.testing.assert_allclose(Q.E(0.0), np.diag([3.0, 1.0, 2.0]))
    with pytest.raises(InvalidPermutationError):
        session.Frontends.apply_permutation_frontend(pair, [0, 0, 1])


def test_kernel_bases_are_orthonormal(ts):
    H = rows(["1", "t", "2"])
    bases = kernel_bases(H, ts, (0.0, 1.0))
    stacked = MatrixFn.hstack(bases.B_d, bases.B_a)
    for t in ts:
        Q = stacked(t)
        np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(H(t) @ bases.B_d(t), 0.0, atol=1e-12)


def test_kernel_bases_rank_drop(ts):
    with pytest.raises(RankDropError):
        kernel_bases(rows(["0", "0"]), ts, (0.0, 1.0))


def test_scaling_needs_d_factors(session):
    outcome = assert_in_prescf(session, testing.random_prescf(1, d=1))
    with pytest.raises(PreconditionError):
        session.Frontends.apply_scaling(outcome.pair, [])
