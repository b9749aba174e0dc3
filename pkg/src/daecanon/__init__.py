from .session import CanonSession
from .models.settings import CanonSettings
from .equivalence import DaePair, Transform, apply, compose, verify_equivalent
from .expr import MatrixFn, ScalarFn, parse
from .problem import LoadedProblem, load
from .fixtures import reproduce
from .utils.exceptions import CanonException

__version__ = "0.1.0"

__all__ = [
    'CanonSession', 'CanonSettings',
    'DaePair', 'Transform', 'apply', 'compose', 'verify_equivalent',
    'MatrixFn', 'ScalarFn', 'parse',
    'LoadedProblem', 'load', 'reproduce',
    'CanonException',
]
