import numpy as np
import pytest

from daecanon import testing
from daecanon.oracle import frozen_pencil_structure
from daecanon.problem import load
from daecanon.utils.exceptions import PreconditionError


def test_single_jordan_block():
    E = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    structure = frozen_pencil_structure(E, np.eye(3))
    assert (structure.mu, structure.theta, structure.d, structure.r) == (3, [1, 1], 0, 2)
    assert structure.ranks == [3, 2, 1, 0, 0]


def test_ode_part_and_nonsingular_e():
    E = np.diag([1.0, 1.0, 0.0])
    F = np.array([[2.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
    structure = frozen_pencil_structure(E, F)
    assert (structure.mu, structure.d, structure.r) == (1, 2, 2)
    assert frozen_pencil_structure(np.eye(2), np.diag([1.0, 2.0])).mu == 0


def test_explicit_shift_on_an_eigenvalue():
    # det(c E + F) = c + 1 vanishes at c = -1
    with pytest.raises(PreconditionError):
        frozen_pencil_structure(np.array([[1.0, 0.0], [0.0, 0.0]]), np.eye(2), shift=-1.0)


def test_singular_pencil():
    E = np.array([[1.0, 0.0], [0.0, 0.0]])
    F = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(PreconditionError):
        frozen_pencil_structure(E, F)


@pytest.mark.parametrize("seed", [21, 22, 23, 24])
def test_agrees_with_pipeline(session, seed):
    loaded = load(testing.random_constant_prescf(seed))
    result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag)
    expected = result.characteristics
    structure = frozen_pencil_structure(loaded.pair.E(0.5), loaded.pair.F(0.5), rank_tol=session.settings.rank_tol)
    assert (structure.mu, structure.theta, structure.d) == (expected.mu, expected.theta, expected.d)
