"""
Worked examples embedded as data.

Each fixture module carries the problem document, the parameter sets it is
checked with, the displayed stage matrices and a hook for further checks.
"""

import logging
from typing import Dict, List, Mapping, Optional

from ..models.reports import CheckResult, ReproduceReport
from ..problem import load
from ..utils.exceptions import CanonException
from . import berger_ilchmann, campbell_moore, hmm98
from .base import Display, display_checks, matrix_check, with_parameters

logger = logging.getLogger(__name__)

FIXTURES = {
    berger_ilchmann.NAME: berger_ilchmann,
    hmm98.NAME: hmm98,
    campbell_moore.NAME: campbell_moore,
}


def names() -> List[str]:
    return list(FIXTURES)


def problem(name: str, parameters: Optional[Mapping[str, float]] = None) -> Dict:
    """
    The problem document of a fixture, bound to its first parameter set
    unless parameters are given.

    Raises:
        KeyError: unknown fixture name
    """
    module = FIXTURES[name]
    params = dict(parameters) if parameters is not None else dict(module.PARAMETER_SETS[0])
    document, _ = with_parameters(module.PROBLEM, params)
    return document


def reproduce(name: str, session=None) -> ReproduceReport:
    """
    Run the full pipeline on a fixture for each parameter set and compare
    every displayed matrix at the verification samples.

    A pipeline failure becomes a failed check instead of an exception.
    """
    from ..session import CanonSession

    module = FIXTURES[name]
    session = session or CanonSession()
    interval = tuple(module.PROBLEM["interval"])
    checks: List[CheckResult] = []
    for params in module.PARAMETER_SETS:
        document, prefix = with_parameters(module.PROBLEM, params)
        loaded = load(document)
        ts = session.verify_grid(loaded.pair)
        try:
            result = session.Pipeline.run_pipeline(loaded.pair, loaded.tag)
            checks.extend(display_checks(result, module.DISPLAYS, params, ts, session.settings.tol, prefix))
            checks.extend(module.extra_checks(session, result, params, ts, prefix))
        except CanonException as e:
            checks.append(CheckResult(name=f"{prefix}pipeline", passed=False, detail=f"{e.code}: {e.message}"))
    report = ReproduceReport(name=name, interval=interval, grid_size=session.settings.n_verify, checks=checks)
    failed = [c.name for c in checks if not c.passed]
    logger.info(f"reproduce {name}: {len(checks) - len(failed)}/{len(checks)} checks passed")
    if failed:
        logger.warning(f"reproduce {name}: failed {failed}")
    return report


__all__ = ["Display", "FIXTURES", "display_checks", "matrix_check", "names", "problem", "reproduce"]
