import numpy as np
import pytest

from daecanon import fixtures
from daecanon.fixtures.base import with_parameters
from daecanon.problem import load
from daecanon.utils.exceptions import ProblemFileError
from daecanon.utils.parsing import parse_bases, parse_matrix


def test_parse_matrix_binds_parameters():
    M = parse_matrix([["a*t", 1], ["0", "t^2"]], {"a": 2.0})
    np.testing.assert_allclose(M(3.0), [[6.0, 1.0], [0.0, 9.0]])


def test_parse_bases_of_hessenberg_tag():
    loaded = load(fixtures.problem("hmm98"))
    bases = parse_bases(loaded.tag)
    assert set(bases) == {"B_d", "B_a"}
    assert bases["B_d"].shape == (2, 1)
    for t in (0.3, 1.2):
        H21 = loaded.pair.F(t)[2:, :2]
        np.testing.assert_allclose(H21 @ bases["B_d"](t), [[0.0]], atol=1e-12)


def test_tag_without_bases():
    module = fixtures.FIXTURES["hmm98"]
    document, _ = with_parameters(module.PROBLEM_AUTOMATIC_BASES, module.PARAMETER_SETS[0])
    assert parse_bases(load(document).tag) == {}


def test_invalid_document():
    with pytest.raises(ProblemFileError):
        load({"name": "broken", "E": [["1"]]})
