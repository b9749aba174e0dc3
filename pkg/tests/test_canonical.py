import numpy as np
import pytest

from daecanon.expr import MatrixFn
from daecanon.models.params import StageName
from daecanon.problem import load
from daecanon.utils.exceptions import StageMissingError

from .test_pipeline import SMALL


@pytest.fixture
def result(session):
    loaded = load(SMALL)
    return session.Pipeline.run_pipeline(loaded.pair, loaded.tag)


def test_projector_identities(session, result, ts):
    objects = session.Canonical.projector_from_prescf(result)
    assert objects.d == 1
    checks = session.Canonical.check_projector(objects, ts)
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]
    assert {c.name for c in checks} >= {"projector_idempotent", "projector_trace", "projector_rank", "subspace_split"}


def test_projector_agrees_with_composite(session, result, ts):
    objects = session.Canonical.projector_from_prescf(result)
    assert session.Canonical.check_projector_agreement(result, objects, ts).passed
    assert all(c.passed for c in session.Canonical.check_couplings(result, ts))


def test_projector_needs_step2(session):
    loaded = load(SMALL)
    result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag, upto=StageName.STEP1)
    with pytest.raises(StageMissingError):
        session.Canonical.projector_from_prescf(result)


def test_projector_from_transform(session):
    K = MatrixFn.from_rows([["1", "t"], ["0", "1"]])
    Pi = session.Canonical.projector_from_transform(K, 1)
    np.testing.assert_allclose(Pi(0.5), [[1.0, -0.5], [0.0, 0.0]])


@pytest.mark.parametrize(
    "omega,K11,expected,params",
    [
        ("2", "exp(-5*t)", "-3", {}),
        ("-2", "exp(5*t)", "3", {}),
        (
            "lam",
            "sqrt((1 - eta*t)^2 + 1)",
            "lam + (eta^2*t - eta)/((1 - eta*t)^2 + 1)",
            {"lam": 2.0, "eta": 0.5},
        ),
    ],
)
def test_omega_change_of_basis(session, ts, omega, K11, expected, params):
    changed = session.Canonical.omega_change_of_basis(
        MatrixFn.from_rows([[omega]], params), MatrixFn.from_rows([[K11]], params), ts
    )
    target = MatrixFn.from_rows([[expected]], params)
    deviation, _ = changed.deviation(target, ts)
    assert deviation < 1e-12


def test_pure_ode(session, result, ts):
    ode = session.Canonical.pure_ode(result)
    assert ode.d == 1
    assert ode.u_extractor.shape == (1, 3)
    assert ode.q_mapper.shape == (1, 3)
    np.testing.assert_allclose(ode.omega(0.3), result.omega(0.3))


def test_characteristics_cross_check(session, result):
    c = session.Canonical.characteristics(result)
    assert (c.mu, c.theta, c.d) == (2, [1], 1)


def test_subspace_angles(session, ts):
    e1 = MatrixFn.from_rows([["1"], ["0"]])
    scaled = MatrixFn.from_rows([["2 + t"], ["0"]])
    e2 = MatrixFn.from_rows([["0"], ["1"]])
    assert session.Canonical.same_subspace(e1, scaled, ts)
    assert not session.Canonical.same_subspace(e1, e2, ts)
    np.testing.assert_allclose(session.Canonical.subspace_angles(e1, e2, ts[:1]), [np.pi / 2])
