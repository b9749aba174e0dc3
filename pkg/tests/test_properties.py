"""
Property checks over the random problem generators.

Properties without their own @settings take the example count of the
hypothesis profile loaded in conftest: 50, or 200 with RUN_SLOW_TESTS=true.
"""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from daecanon import testing
from daecanon.blockstruct import characteristics_from_nilpotent
from daecanon.equivalence import verify_equivalent
from daecanon.models.params import StageName
from daecanon.oracle import frozen_pencil_structure
from daecanon.problem import load

seeds = st.integers(min_value=0, max_value=10_000)


@given(seed=seeds, mu=st.integers(min_value=2, max_value=3), d=st.integers(min_value=1, max_value=2))
def test_pipeline_preserves_equivalence(session, seed, mu, d):
    loaded = load(testing.random_prescf(seed, mu=mu, d=d))
    result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag, upto=StageName.STEP3)
    assert all(s.report.passed for s in result.stages)
    ts = session.verify_grid(loaded.pair)
    assert verify_equivalent(loaded.pair, result.final.pair, result.composite(), ts, 1e-7).passed
    assert result.stage(StageName.STEP1).iterations <= mu
    assert result.stage(StageName.STEP2).iterations <= mu


@settings(max_examples=20)
@given(seed=seeds)
def test_projector_is_idempotent(session, seed):
    loaded = load(testing.random_prescf(seed, mu=2))
    result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag, upto=StageName.STEP2)
    Pi = session.Canonical.projector_from_prescf(result).Pi_can
    for t in session.verify_grid(loaded.pair)[::3]:
        P = Pi(t)
        np.testing.assert_allclose(P @ P, P, atol=1e-8)
        assert round(float(np.trace(P))) == result.d


@settings(max_examples=20)
@given(seed=seeds, kind=st.sampled_from(["t_canonical", "s_canonical"]))
def test_frontends_reach_prescf(session, seed, kind):
    generate = testing.random_t_canonical if kind == "t_canonical" else testing.random_s_canonical
    loaded = load(generate(seed))
    outcome = session.Frontends.step0(loaded.pair, loaded.tag)
    assert outcome.diagnosis.passed, outcome.diagnosis.notes
    ts = session.verify_grid(loaded.pair)
    assert verify_equivalent(loaded.pair, outcome.pair, outcome.transform, ts, session.settings.tol).passed


@given(seed=seeds)
def test_constant_pairs_match_frozen_pencil(session, seed):
    loaded = load(testing.random_constant_prescf(seed))
    result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag)
    canonical = session.Canonical.characteristics(result)
    structure = frozen_pencil_structure(loaded.pair.E(0.0), loaded.pair.F(0.0))
    assert (structure.mu, structure.theta, structure.d, structure.r) == (
        canonical.mu,
        canonical.theta,
        canonical.d,
        canonical.r,
    )
    # the nilpotent part of the last stage carries the same index
    nilpotent = characteristics_from_nilpotent(result.final.pair.E22(0.5), session.settings.rank_tol)
    assert (nilpotent.mu, nilpotent.theta) == (structure.mu, structure.theta)


@settings(max_examples=20)
@given(seed=seeds, u0=st.floats(min_value=-2.0, max_value=2.0))
def test_solve_ivp_with_random_rhs(session, seed, u0):
    document = testing.random_prescf(seed, d=1)
    document["q"] = testing.random_rhs(seed, len(document["E"]))
    loaded = load(document)
    result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag)
    trajectory = session.Solver.solve_ivp(result, t0=0.0, u0=[u0], q=loaded.q, grid=11)
    assert trajectory.max_residual < 1e-7
    np.testing.assert_allclose(trajectory.u[0], [u0], atol=1e-12)
