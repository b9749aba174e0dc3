import numpy as np
import pytest

from daecanon import CanonSession, testing
from daecanon.blockstruct import elementary_nilpotent
from daecanon.equivalence import verify_equivalent
from daecanon.expr import MatrixFn
from daecanon.models.params import StageName
from daecanon.problem import load
from daecanon.utils.exceptions import PreconditionError, StageMissingError

# d = 1, blocks [1, 1]; F21 F12 = [[t, 0], [0, 0]] is block upper triangular
SMALL = {
    "name": "small PreSCF",
    "interval": [0.0, 1.0],
    "structure": {"kind": "prescf"},
    "d": 1,
    "blocks": [1, 1],
    "E": [["1", "0", "0"], ["0", "0", "1"], ["0", "0", "0"]],
    "F": [["-1", "1", "0"], ["t", "2", "t"], ["0", "0", "1"]],
}

ALREADY_SCF = {
    "name": "already SCF",
    "interval": [0.0, 1.0],
    "structure": {"kind": "prescf"},
    "d": 1,
    "blocks": [1, 1],
    "E": [["1", "0", "0"], ["0", "0", "1"], ["0", "0", "0"]],
    "F": [["cos(t)", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
}


def run(session, document, upto=StageName.STEP4):
    loaded = load(document)
    return loaded, session.Pipeline.run_pipeline(loaded.pair, loaded.tag, upto=upto)


def assert_sscf(result):
    final = result.final.pair
    d, spec = final.d, final.spec
    E_target = MatrixFn.block_diag(MatrixFn.identity(d), elementary_nilpotent(spec))
    F_target = MatrixFn.block_diag(final.omega, MatrixFn.identity(spec.a))
    assert (final.E - E_target).is_zero_expr()
    assert (final.F - F_target).is_zero_expr()


def test_full_pipeline(session):
    loaded, result = run(session, SMALL)
    assert [s.label for s in result.stages] == ["step0", "step1", "step2", "step3", "step4"]
    assert result.step4_error is None
    assert all(s.report.passed for s in result.stages)
    assert_sscf(result)

    ts = session.verify_grid(loaded.pair)
    composite = result.composite()
    assert verify_equivalent(loaded.pair, result.final.pair, composite, ts, 1e-8).passed


def test_iterations_are_bounded_by_index(session):
    _, result = run(session, SMALL)
    mu = result.spec.mu
    assert 1 <= result.stage(StageName.STEP1).iterations <= mu
    assert result.stage(StageName.STEP2).iterations <= mu


def test_stop_after_step2(session, ts):
    _, result = run(session, SMALL, upto="step2")
    assert result.last_label == "step2"
    assert not result.has_stage(StageName.STEP3)
    with pytest.raises(StageMissingError):
        result.stage(StageName.STEP3)
    quasi = result.final.pair
    _, F12, F21, _ = quasi.split(quasi.F)
    assert F12.is_zero_expr() and F21.is_zero_expr()


def test_coupling_totals(session, ts):
    _, result = run(session, SMALL)
    d, a = result.d, result.spec.a
    K1 = result.stage(StageName.STEP1).transform.K
    K2 = result.stage(StageName.STEP2).transform.K
    for t in ts:
        np.testing.assert_allclose(K1(t)[:d, d:], result.A_total(t), atol=1e-10)
        np.testing.assert_allclose(K2(t)[d:, :d], result.B_total(t), atol=1e-10)
    assert result.A_total.shape == (d, a)
    assert result.B_total.shape == (a, d)


def test_step3_gives_identity_algebraic_part(session):
    _, result = run(session, SMALL, upto=StageName.STEP3)
    scf = result.final.pair
    _, F12, F21, F22 = scf.split(scf.F)
    assert (F22 - MatrixFn.identity(2)).is_zero_expr()
    assert F12.is_zero_expr() and F21.is_zero_expr()


def test_idle_steps(session):
    _, result = run(session, ALREADY_SCF)
    assert result.stage(StageName.STEP1).iterations == 0
    assert result.stage(StageName.STEP2).iterations == 0
    assert result.stage(StageName.STEP4).transform.is_identity()
    assert_sscf(result)


def test_characteristics(session):
    _, result = run(session, SMALL)
    c = result.characteristics
    assert (c.mu, c.r, c.theta, c.d) == (2, 2, [1], 1)


def test_stage_matrices(session):
    _, result = run(session, SMALL)
    matrices = session.Pipeline.stage_matrices(result, "step3")
    assert set(matrices) == {"E", "F", "L", "K"}
    assert matrices["L"].shape == (3, 3)


def test_failure_keeps_partial_result(session):
    document = dict(SMALL, F=[["-1", "1", "0"], ["t", "0", "t"], ["0", "0", "1"]])
    loaded = load(document)
    with pytest.raises(PreconditionError) as exc_info:
        session.Pipeline.run_pipeline(loaded.pair, loaded.tag)
    partial = exc_info.value.partial
    assert partial is not None
    assert partial.last_label == "step0"
    assert not partial.diagnosis.passed



def count_pair_normalizations(monkeypatch, session):
    calls = []
    normalize_pair = session.normalize_pair
    monkeypatch.setattr(session, "normalize_pair", lambda P: calls.append(P) or normalize_pair(P))
    return calls


def test_node_budget_overflow_stops_normalization(monkeypatch, session, settings):
    within = count_pair_normalizations(monkeypatch, session)
    _, result = run(session, SMALL)
    assert not result.over_budget
    assert not any("node budget" in c for c in result.caveats)

    with CanonSession(settings, node_budget=5) as tight:
        over = count_pair_normalizations(monkeypatch, tight)
        _, result = run(tight, SMALL)
    assert result.over_budget
    assert sum("node budget" in c for c in result.caveats) == 1
    # step0 and the first elementary step are the only normalized pairs
    assert len(over) == 2 < len(within)
    assert all(s.report.passed for s in result.stages)
    assert_sscf(result)

@pytest.mark.parametrize("seed", [11, 12, 13])
def test_random_prescf_reaches_scf(session, seed):
    loaded, result = run(session, testing.random_prescf(seed))
    assert result.has_stage(StageName.STEP3)
    if result.step4_error is None:
        assert_sscf(result)
    else:
        assert any("step4" in c for c in result.caveats)
