"""Expression matrices of problem documents and structure tags as matrix functions."""

from typing import Dict, Mapping, Optional

from ..expr import MatrixFn
from ..models.problem import BASIS_NAMES, ExprMatrix, StructureTag


def parse_matrix(rows: ExprMatrix, params: Optional[Mapping[str, float]] = None) -> MatrixFn:
    return MatrixFn.from_rows([[str(e) for e in row] for row in rows], params)


def parse_bases(tag: StructureTag) -> Dict[str, MatrixFn]:
    """User supplied kernel bases of a Hessenberg tag, keyed by basis name; empty without bases."""
    if not tag.bases:
        return {}
    names = BASIS_NAMES[tag.kind]
    return {name: parse_matrix(tag.bases[name], tag.parameters) for name in names}
