import pytest

from daecanon import fixtures
from daecanon.fixtures.base import display_checks, with_parameters
from daecanon.problem import load


@pytest.mark.fixture
@pytest.mark.parametrize("name", fixtures.names())
def test_reproduce(session, name):
    report = fixtures.reproduce(name, session)
    assert report.checks
    assert report.passed, report.first_failure


def test_unknown_fixture():
    with pytest.raises(KeyError):
        fixtures.problem("no-such-example")


@pytest.mark.parametrize("name", fixtures.names())
def test_fixture_documents_load(name):
    loaded = load(fixtures.problem(name))
    assert loaded.name == name
    assert loaded.pair.m == loaded.problem.m


def test_parameter_prefix():
    document, prefix = with_parameters(fixtures.FIXTURES["hmm98"].PROBLEM, {"eta": 0.5, "lam": -1.0})
    assert document["parameters"] == {"eta": 0.5, "lam": -1.0}
    assert prefix == "[eta=0.5,lam=-1] "
    _, prefix = with_parameters(fixtures.FIXTURES["berger-ilchmann"].PROBLEM, {})
    assert prefix == ""


@pytest.mark.fixture
@pytest.mark.parametrize("params", fixtures.FIXTURES["hmm98"].PARAMETER_SETS)
def test_hmm98_with_automatic_bases(session, params):
    module = fixtures.FIXTURES["hmm98"]
    assert "bases" in module.PROBLEM["structure"]
    assert "bases" not in module.PROBLEM_AUTOMATIC_BASES["structure"]
    document, prefix = with_parameters(module.PROBLEM_AUTOMATIC_BASES, params)
    loaded = load(document)
    result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag)
    assert result.has_stage("step4")
    ts = session.verify_grid(loaded.pair)
    checks = display_checks(result, module.DISPLAYS, params, ts, session.settings.tol, prefix)
    assert len(checks) == len(module.DISPLAYS)
    assert [c.name for c in checks if not c.passed] == []
