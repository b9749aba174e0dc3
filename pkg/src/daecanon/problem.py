import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from .equivalence import DaePair
from .expr import MatrixFn
from .models.problem import ProblemFile, StructureKind, StructureTag
from .resources.frontends import Frontends
from .utils.exceptions import CanonException, ProblemFileError
from .utils.parsing import parse_bases, parse_matrix

logger = logging.getLogger(__name__)


@dataclass
class LoadedProblem:
    problem: ProblemFile
    pair: DaePair
    tag: StructureTag
    q: Optional[MatrixFn] = None

    @property
    def name(self) -> str:
        return self.problem.name


def load_problem(source: Union[str, Path, Dict[str, Any]]) -> ProblemFile:
    """
    Read and validate a problem document.

    Args:
        source: Path of a JSON file, or an already decoded document

    Raises:
        ProblemFileError: unreadable file, malformed JSON or invalid content
    """
    if isinstance(source, dict):
        document = source
    else:
        path = Path(source)
        try:
            document = json.loads(path.read_text())
        except OSError as e:
            raise ProblemFileError(f"cannot read {path}: {e}")
        except json.JSONDecodeError as e:
            raise ProblemFileError(f"{path} is not valid JSON: {e}")
    try:
        problem = ProblemFile.model_validate(document)
    except ValidationError as e:
        raise ProblemFileError(f"invalid problem: {e}")
    logger.info(f"Loaded problem {problem.name!r} (m={problem.m}, kind={problem.structure.kind.value})")
    return problem


def build_problem(problem: ProblemFile) -> LoadedProblem:
    """Parse the expression strings of a problem into a DaePair, its tag and q."""
    params = problem.parameters
    tag = problem.structure_tag()
    try:
        if problem.structure.kind == StructureKind.MULTIBODY:
            pair = _multibody_pair(problem)
        else:
            pair = DaePair(parse_matrix(problem.E, params), parse_matrix(problem.F, params), tuple(problem.interval), avoid=tuple(problem.avoid))
        q = parse_matrix([[e] for e in problem.q], params) if problem.q is not None else None
        parse_bases(tag)
    except CanonException as e:
        e.message = f"{problem.name}: {e.message}"
        e.args = (e.message,)
        raise
    if tag.d is not None and tag.blocks is not None and tag.blocks.a == pair.m - tag.d:
        pair = pair.tagged(tag.d, tag.blocks)
    return LoadedProblem(problem=problem, pair=pair, tag=tag, q=q)


def load(source: Union[str, Path, Dict[str, Any]]) -> LoadedProblem:
    return build_problem(load_problem(source))


def _multibody_pair(problem: ProblemFile) -> DaePair:
    blocks = problem.multibody
    params = problem.parameters
    Z = parse_matrix(blocks.Z, params) if blocks.Z is not None else None
    return Frontends.multibody_pair(
        parse_matrix(blocks.M, params),
        parse_matrix(blocks.D, params),
        parse_matrix(blocks.K, params),
        parse_matrix(blocks.G, params),
        Z,
        tuple(problem.interval),
        tuple(problem.avoid),
    )

