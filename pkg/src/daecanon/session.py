import logging
from typing import Any, Callable, List, Optional, Tuple, TypeVar, Union

import numpy as np
import sympy

from .equivalence import DaePair, Transform
from .expr import MatrixFn
from .models.settings import CanonSettings
from .resources.canonical import Canonical
from .resources.frontends import Frontends
from .resources.pipeline import Pipeline
from .resources.solver import Solver
from .utils import sampling
from .utils.exceptions import CanonException, ExpressionGrowthError

logger = logging.getLogger(__name__)

R = TypeVar("R")

Interval = Tuple[float, float]


class CanonSession:
    def __init__(self, settings: Optional[CanonSettings] = None, **overrides):
        """Initialize a session.

        Args:
            settings (CanonSettings, optional): Tolerances and size knobs. Built from the
                environment (and a .env file) when omitted.
            **overrides: Individual settings fields overriding the environment
        """
        if settings is None:
            settings = CanonSettings.from_env(**overrides)
        elif overrides:
            settings = CanonSettings(**{**settings.model_dump(), **overrides})
        self.settings = settings

        # Initialize resources
        self._frontends = Frontends(self)
        self._pipeline = Pipeline(self)
        self._canonical = Canonical(self)
        self._solver = Solver(self)

        logger.info(
            f"Initialized CanonSession with tol={settings.tol:g}, "
            f"{settings.n_verify} verification samples, seed {settings.seed}"
        )

    def __enter__(self):
        logger.debug("Entering CanonSession")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type is not None and issubclass(exc_type, CanonException):
            logger.debug(f"CanonSession closed after {exc_type.__name__}: {exc_val}")

    # Sample grids

    def check_grid(self, pair: Union[DaePair, Interval], avoid: Optional[List[float]] = None) -> List[float]:
        """Chebyshev samples used to certify nonsingularity."""
        interval, avoid = self._interval_of(pair, avoid)
        return sampling.chebyshev_grid(interval, self.settings.n_check, avoid)

    def verify_grid(self, pair: Union[DaePair, Interval], avoid: Optional[List[float]] = None) -> List[float]:
        """Uniform interior samples used by every equivalence report."""
        interval, avoid = self._interval_of(pair, avoid)
        return sampling.uniform_grid(interval, self.settings.n_verify, avoid)

    def zero_grid(self, pair: Union[DaePair, Interval], avoid: Optional[List[float]] = None) -> List[float]:
        """Seeded random samples used for zero detection."""
        interval, avoid = self._interval_of(pair, avoid)
        return sampling.random_grid(interval, self.settings.n_zero, self.settings.seed, avoid)

    @staticmethod
    def _interval_of(pair, avoid) -> Tuple[Interval, List[float]]:
        if isinstance(pair, DaePair):
            return pair.interval, list(avoid if avoid is not None else pair.avoid)
        return tuple(pair), list(avoid or [])

    # Expression housekeeping

    def normalize(self, M: MatrixFn) -> MatrixFn:
        if self.settings.normalize == "none":
            return M
        return M.normalized(self.settings.node_budget)

    def normalize_pair(self, P: DaePair) -> DaePair:
        if self.settings.normalize == "none":
            return P
        return P.normalized(self.settings.node_budget)

    def normalize_transform(self, T: Transform) -> Transform:
        if self.settings.normalize == "none":
            return T
        return T.normalized(self.settings.node_budget)

    def guard_nodes(self, where: str, *matrices: MatrixFn) -> bool:
        """
        Enforce the node limits on freshly built matrices.

        Returns True when some matrix exceeds the soft budget; the pipeline then
        stops normalizing symbolically for the rest of the run.

        Raises:
            ExpressionGrowthError: a matrix exceeds max_nodes
        """
        over_budget = False
        for M in matrices:
            nodes = M.node_count()
            if nodes > self.settings.max_nodes:
                raise ExpressionGrowthError(nodes, self.settings.max_nodes, f"in {where}")
            if nodes > self.settings.node_budget:
                over_budget = True
        if over_budget:
            logger.warning(f"{where}: expressions exceed the node budget {self.settings.node_budget}, skipping symbolic normalization from here on")
        return over_budget

    def _certify(self, label: str, fn: Callable[..., R], *args: Any, **kwargs: Any) -> R:
        """Run fn, wrapping unexpected numeric or symbolic failures in CanonException.

        Args:
            label (str): Operation name used in logs and messages
            fn (Callable): The operation

        Raises:
            CanonException: on any failure
        """
        try:
            logger.debug(f"Running {label}")
            return fn(*args, **kwargs)
        except CanonException:
            raise
        except (ArithmeticError, ValueError, TypeError, np.linalg.LinAlgError, sympy.SympifyError) as e:
            logger.error(f"Unexpected error during {label}: {str(e)}")
            raise CanonException(code="internal", message=f"{label} failed: {str(e)}")

    # Resource properties
    @property
    def Frontends(self) -> Frontends:
        return self._frontends

    @property
    def Pipeline(self) -> Pipeline:
        return self._pipeline

    @property
    def Canonical(self) -> Canonical:
        return self._canonical

    @property
    def Solver(self) -> Solver:
        return self._solver
