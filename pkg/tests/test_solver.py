import numpy as np
import pytest

from daecanon import fixtures
from daecanon.expr import MatrixFn
from daecanon.models.params import StageName
from daecanon.problem import load
from daecanon.utils.exceptions import ConfigurationError, StageMissingError

from .test_pipeline import SMALL

Q = [["sin(t)"], ["1"], ["t^2"]]


@pytest.fixture
def loaded():
    return load(SMALL)


@pytest.fixture
def result(session, loaded):
    return session.Pipeline.run_pipeline(loaded.pair, loaded.tag)


def pure_dae_residual(N, v, q2, ts):
    return max(float(np.max(np.abs(N(t) @ v.derivative()(t) + v(t) - q2(t)))) for t in ts)


def test_pure_dae_constant(session, ts):
    N = MatrixFn.from_rows([["0", "1"], ["0", "0"]])
    q2 = MatrixFn.from_rows([["sin(t)"], ["t"]])
    v = session.Solver.solve_pure_dae(N, q2)
    np.testing.assert_allclose(v(0.4), [[np.sin(0.4) - 1.0], [0.4]])
    assert pure_dae_residual(N, v, q2, ts) < 1e-12


def test_pure_dae_time_varying(session, ts):
    N = MatrixFn.from_rows([["0", "t"], ["0", "0"]])
    q2 = MatrixFn.from_rows([["1"], ["t^2"]])
    v = session.Solver.solve_pure_dae(N, q2)
    np.testing.assert_allclose(v(0.5), [[1.0 - 2 * 0.25], [0.25]])
    assert pure_dae_residual(N, v, q2, ts) < 1e-12


def test_solve_ivp_residual(session, loaded, result):
    q = MatrixFn.from_rows(Q)
    trajectory = session.Solver.solve_ivp(result, t0=0.0, u0=[0.5], q=q, grid=21)
    assert trajectory.x.shape == (21, 3)
    assert trajectory.max_residual < 1e-8
    assert session.Solver.residual(loaded.pair, trajectory, q) == pytest.approx(trajectory.max_residual)
    np.testing.assert_allclose(trajectory.x[0], trajectory.x0, atol=1e-12)
    np.testing.assert_allclose(trajectory.u[0], [0.5], atol=1e-12)


def test_solve_ivp_from_interior_point(session, result):
    trajectory = session.Solver.solve_ivp(result, t0=0.5, u0=[1.0], grid=11)
    assert trajectory.t[0] == 0.0 and trajectory.t[-1] == 1.0
    assert trajectory.max_residual < 1e-8
    np.testing.assert_allclose(trajectory.u[5], [1.0], atol=1e-12)


def test_homogeneous_solution_stays_in_canonical_subspace(session, result):
    trajectory = session.Solver.solve_ivp(result, t0=0.3, u0=[0.5], grid=11)
    K = result.composite().K
    Pi = session.Canonical.projector_from_prescf(result).Pi_can
    # q = 0 gives v = 0, so x(t0) = K(t0) [u0; 0]
    np.testing.assert_allclose(trajectory.x0, K(0.3) @ np.array([0.5, 0.0, 0.0]), atol=1e-12)
    np.testing.assert_allclose(Pi(0.3) @ trajectory.x0, trajectory.x0, atol=1e-10)
    for t, x in zip(trajectory.t, trajectory.x):
        np.testing.assert_allclose(Pi(t) @ x, x, atol=1e-8)


@pytest.mark.fixture
@pytest.mark.parametrize("name", fixtures.names())
def test_pure_dae_part_of_worked_examples(session, name):
    loaded = load(fixtures.problem(name))
    result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag)
    m, d = loaded.pair.m, result.d
    q = MatrixFn.from_rows([["sin(t)"]] + [["1 + t^2"]] * (m - 1))
    q2 = (result.composite().L @ q).sub(d, m, 0, 1)
    N = result.final.pair.E22
    v = session.Solver.solve_pure_dae(N, q2, result.spec.mu)
    assert pure_dae_residual(N, v, q2, session.verify_grid(loaded.pair)) < 1e-7

def test_solve_ivp_input_checks(session, loaded, result):
    with pytest.raises(ConfigurationError):
        session.Solver.solve_ivp(result, t0=0.0, u0=[1.0, 2.0])
    with pytest.raises(ConfigurationError):
        session.Solver.solve_ivp(result, t0=2.0, u0=[1.0])
    with pytest.raises(ConfigurationError):
        session.Solver.solve_ivp(result, t0=0.0, u0=[1.0], method="BDF")
    partial = session.Pipeline.run_pipeline(loaded.pair, loaded.tag, upto=StageName.STEP2)
    with pytest.raises(StageMissingError):
        session.Solver.solve_ivp(partial, t0=0.0, u0=[1.0])


def test_normalize_pure_ode(session):
    omega = MatrixFn.from_rows([["1 + t"]])
    fundamental = session.Solver.normalize_pure_ode(omega, alpha=0.5, t0=0.0, interval=(0.0, 1.0))
    np.testing.assert_allclose(fundamental(0.0), [[1.0]])
    for t in (0.2, 0.7, 1.0):
        np.testing.assert_allclose(fundamental.transformed_omega(t), [[0.5]], atol=1e-8)
        # K' = (alpha - omega) K has the closed form exp(0.5 t - t - t^2 / 2)
        np.testing.assert_allclose(fundamental(t), [[np.exp(-0.5 * t - 0.5 * t ** 2)]], rtol=1e-8)


def test_normalize_pure_ode_rejects_singular_start(session):
    omega = MatrixFn.from_rows([["1", "0"], ["0", "1"]])
    with pytest.raises(ConfigurationError):
        session.Solver.normalize_pure_ode(omega, 0.0, 0.0, (0.0, 1.0), K0init=[[1, 0], [0, 0]])
