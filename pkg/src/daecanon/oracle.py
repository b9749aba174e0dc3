"""
Dense numeric structure of a constant pencil {E, F}.

For a regular pencil and a shift c with cE + F nonsingular, M = (cE + F)^-1 E
is similar to diag(J, N (cN + I)^-1) with J nonsingular and N nilpotent, so
rank M^k = d + rank N^k. This is independent of the transformation pipeline
and serves as a cross-check of the structure it reports.
"""

import logging
from typing import List, Optional

import numpy as np
import scipy.linalg
from pydantic import BaseModel, Field

from .utils.exceptions import PreconditionError

logger = logging.getLogger(__name__)

# Shifts tried when none is given
CANDIDATE_SHIFTS = (1.0, -1.7, 2.3, 0.5, -3.1, 4.7)


class PencilStructure(BaseModel):
    mu: int = Field(..., ge=0, description="Index; 0 for nonsingular E")
    theta: List[int] = Field(default_factory=list)
    d: int = Field(..., ge=0)
    r: int = Field(..., ge=0, description="rank E")
    shift: float
    ranks: List[int] = Field(default_factory=list, description="rank M^k, k = 0, 1, ...")


def _choose_shift(E: np.ndarray, F: np.ndarray) -> float:
    with np.errstate(all="ignore"):
        w = scipy.linalg.eigvals(F, -E)
    finite = w[np.isfinite(w)]
    best, best_gap = None, -1.0
    for c in CANDIDATE_SHIFTS:
        gap = float(np.min(np.abs(finite - c))) if finite.size else np.inf
        if gap > best_gap:
            best, best_gap = c, gap
    return best


def frozen_pencil_structure(
    E: np.ndarray, F: np.ndarray, shift: Optional[float] = None, rank_tol: float = 1e-9
) -> PencilStructure:
    """
    (mu, theta, d, r) of the constant pencil {E, F} from the rank sequence of
    M = (shift E + F)^-1 E.

    Raises:
        PreconditionError: shift E + F is singular, i.e. the pencil is singular
            or the shift is one of its eigenvalues
    """
    E = np.asarray(E, dtype=float)
    F = np.asarray(F, dtype=float)
    m = E.shape[0]
    c = shift if shift is not None else _choose_shift(E, F)
    pencil = c * E + F
    s = np.linalg.svd(pencil, compute_uv=False)
    if m and s[-1] <= rank_tol * max(s[0], 1.0):
        raise PreconditionError("oracle", f"{c:g} E + F is singular; the pencil is singular or {c:g} is an eigenvalue")
    M = np.linalg.solve(pencil, E) if m else np.zeros((0, 0))
    scale = max(1.0, float(np.linalg.norm(M, 2))) if m else 1.0

    ranks = [m]
    power = np.eye(m)
    for k in range(1, m + 2):
        power = power @ M
        sv = np.linalg.svd(power, compute_uv=False) if m else np.zeros(0)
        ranks.append(int(np.sum(sv > rank_tol * scale ** k)))
        if ranks[-1] == ranks[-2]:
            break
    mu = len(ranks) - 2
    d = ranks[-1]
    theta = [ranks[i + 1] - ranks[i + 2] for i in range(max(mu - 1, 0))]
    logger.debug(f"frozen pencil at shift {c:g}: ranks {ranks}")
    return PencilStructure(mu=mu, theta=theta, d=d, r=ranks[1] if m else 0, shift=c, ranks=ranks)
