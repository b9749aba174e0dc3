"""JSON and CSV dumps of stages, projectors and trajectories."""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Union

import numpy as np

from ..expr import MatrixFn

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def matrix_columns(name: str, M: MatrixFn) -> List[str]:
    return [f"{name}_{i}_{j}" for i in range(M.rows) for j in range(M.cols)]


def stage_document(label: str, matrices: Mapping[str, MatrixFn], caveats: Sequence[str] = (), report: Any = None) -> Dict[str, Any]:
    """Matrices as expression strings, with caveats and the equivalence report."""
    document: Dict[str, Any] = {"stage": label}
    for name, M in matrices.items():
        document[name] = M.to_strings()
    document["caveats"] = list(caveats)
    if report is not None:
        document["report"] = report.model_dump(mode="json")
    return document


def sample_rows(matrices: Mapping[str, MatrixFn], ts: Iterable[float]) -> List[List[float]]:
    rows = []
    for t in ts:
        row = [float(t)]
        for M in matrices.values():
            row.extend(M(t).ravel().tolist())
        rows.append(row)
    return rows


def write_json(path: PathLike, document: Any):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2))
    logger.debug(f"wrote {path}")


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[float]]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
    logger.debug(f"wrote {path}")


def write_stage(directory: PathLike, label: str, matrices: Mapping[str, MatrixFn], ts: Sequence[float], caveats: Sequence[str] = (), report: Any = None) -> List[Path]:
    """<label>.json with the expressions and <label>.csv with columns t,E_i_j...,F_i_j..."""
    directory = Path(directory)
    json_path, csv_path = directory / f"{label}.json", directory / f"{label}.csv"
    write_json(json_path, stage_document(label, matrices, caveats, report))
    sampled = {name: matrices[name] for name in ("E", "F") if name in matrices}
    header = ["t"] + [c for name, M in sampled.items() for c in matrix_columns(name, M)]
    write_csv(csv_path, header, sample_rows(sampled, ts))
    return [json_path, csv_path]


def write_projector(directory: PathLike, Pi: MatrixFn, ts: Sequence[float]) -> List[Path]:
    directory = Path(directory)
    json_path, csv_path = directory / "projector.json", directory / "projector.csv"
    write_json(json_path, {"Pi_can": Pi.to_strings()})
    write_csv(csv_path, ["t"] + matrix_columns("Pi", Pi), sample_rows({"Pi": Pi}, ts))
    return [json_path, csv_path]


def trajectory_rows(t: np.ndarray, x: np.ndarray, residual: np.ndarray) -> List[List[float]]:
    return [[float(ti), *map(float, xi), float(ri)] for ti, xi, ri in zip(t, x, residual)]


def write_trajectory(path: PathLike, trajectory) -> Path:
    """Columns t,x1..xm,residual."""
    m = trajectory.x.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(m)] + ["residual"]
    write_csv(path, header, trajectory_rows(trajectory.t, trajectory.x, trajectory.residual))
    return Path(path)
