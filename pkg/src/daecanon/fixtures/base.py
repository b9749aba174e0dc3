"""Displayed matrices of the worked examples and how they are compared."""

from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..expr import MatrixFn
from ..models.reports import CheckResult
from ..resources.pipeline import PipelineResult
from ..utils.exceptions import StageMissingError

Rows = Sequence[Sequence[str]]


@dataclass(frozen=True)
class Display:
    """
    One displayed matrix.

    `source` selects what it is compared with:
      E, F        pair of the stage
      L, K        accumulated transform of the stage
      L@i, K@i    i-th iteration transform of step1/step2
      L_total, K_total, K_total_inv
                  composite transform from the original pair up to the stage
    `signs` allows a per-column ("columns") or per-row ("rows") sign flip,
    for matrices built from orthonormal bases.
    """

    name: str
    stage: str
    source: str
    rows: Rows
    signs: Optional[str] = None


def stage_source(result: PipelineResult, stage: str, source: str) -> MatrixFn:
    s = result.stage(stage)
    if source == "E":
        return s.pair.E
    if source == "F":
        return s.pair.F
    if source in ("L", "K"):
        return getattr(s.transform, source)
    if source.startswith(("L@", "K@")):
        which, index = source.split("@")
        return getattr(s.steps[int(index)], which)
    composite = result.composite(stage)
    if source == "L_total":
        return composite.L
    if source == "K_total":
        return composite.K
    if source == "K_total_inv":
        return composite.K_inv
    raise KeyError(f"unknown display source {source!r}")


def _sign_aligned(actual: np.ndarray, signs: np.ndarray, axis: str) -> np.ndarray:
    if axis == "rows":
        return actual * signs[:, None]
    return actual * signs[None, :]


def matrix_check(
    name: str,
    actual: MatrixFn,
    expected: MatrixFn,
    ts: Sequence[float],
    tol: float,
    signs: Optional[str] = None,
) -> CheckResult:
    """Entrywise comparison at ts, optionally up to one sign per column or row."""
    if actual.shape != expected.shape:
        return CheckResult(name=name, tol=tol, passed=False, detail=f"shape {actual.shape} vs {expected.shape}")
    if signs is None:
        deviation, worst_t = actual.deviation(expected, ts)
    else:
        axis = 1 if signs == "rows" else 0
        mid = ts[len(ts) // 2]
        overlap = np.sum(actual(mid) * expected(mid), axis=axis)
        flips = np.where(overlap < 0, -1.0, 1.0)
        deviation, worst_t = 0.0, None
        for t in ts:
            diff = _sign_aligned(actual(t), flips, signs) - expected(t)
            dev = float(np.max(np.abs(diff), initial=0.0))
            if worst_t is None or dev > deviation:
                deviation, worst_t = dev, t
    detail = f"worst at t={worst_t:.6g}" if worst_t is not None else None
    return CheckResult(name=name, deviation=deviation, tol=tol, passed=deviation <= tol, detail=detail)


def display_checks(
    result: PipelineResult,
    displays: Sequence[Display],
    params: Mapping[str, float],
    ts: Sequence[float],
    tol: float,
    prefix: str = "",
) -> List[CheckResult]:
    checks = []
    for display in displays:
        label = f"{prefix}{display.name}"
        try:
            actual = stage_source(result, display.stage, display.source)
        except (IndexError, KeyError, StageMissingError) as e:
            checks.append(CheckResult(name=label, passed=False, detail=f"not produced: {e}"))
            continue
        expected = MatrixFn.from_rows(display.rows, params)
        checks.append(matrix_check(label, actual, expected, ts, tol, display.signs))
    return checks


def identity_rows(n: int) -> List[List[str]]:
    return [["1" if i == j else "0" for j in range(n)] for i in range(n)]


def diag_rows(entries: Sequence[str]) -> List[List[str]]:
    n = len(entries)
    return [[entries[i] if i == j else "0" for j in range(n)] for i in range(n)]


def with_parameters(problem: dict, params: Mapping[str, float]) -> Tuple[dict, str]:
    """A copy of a problem document bound to params, and a label for check names."""
    document = dict(problem)
    document["parameters"] = dict(params)
    label = ",".join(f"{k}={v:g}" for k, v in params.items())
    return document, (f"[{label}] " if label else "")
