"""
Sample grids on a working interval.

Nonsingularity and zero patterns are only certified at sample points, so every
check in the package draws its points from here. Grids never contain the
interval endpoints and stay away from the points of an avoid list.
"""

from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

# Minimal distance kept from points of an avoid list, relative to interval length
AVOID_MARGIN = 1e-6

Interval = Tuple[float, float]


def _drop_avoided(ts: np.ndarray, interval: Interval, avoid: Optional[Iterable[float]]) -> np.ndarray:
    if not avoid:
        return ts
    margin = AVOID_MARGIN * (interval[1] - interval[0])
    keep = np.ones(ts.shape, dtype=bool)
    for point in avoid:
        keep &= np.abs(ts - float(point)) > margin
    return ts[keep]


def chebyshev_grid(interval: Interval, n: int, avoid: Optional[Sequence[float]] = None) -> List[float]:
    """
    Chebyshev points of the first kind mapped into the open interval.

    Args:
        interval: (t0, t1) with t0 < t1
        n: number of points before avoid-list filtering
        avoid: times that must not be sampled

    Returns:
        Increasing list of sample times
    """
    t0, t1 = interval
    k = np.arange(n)
    nodes = np.cos((2 * k + 1) * np.pi / (2 * n))[::-1]
    ts = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * nodes
    return _drop_avoided(ts, interval, avoid).tolist()


def uniform_grid(interval: Interval, n: int, avoid: Optional[Sequence[float]] = None) -> List[float]:
    """
    n equispaced interior points, i.e. linspace(t0, t1, n + 2) without the endpoints.
    """
    t0, t1 = interval
    ts = np.linspace(t0, t1, n + 2)[1:-1]
    return _drop_avoided(ts, interval, avoid).tolist()


def closed_grid(interval: Interval, n: int, avoid: Optional[Sequence[float]] = None) -> List[float]:
    """n equispaced points including both endpoints; used for trajectories."""
    t0, t1 = interval
    ts = np.linspace(t0, t1, n)
    return _drop_avoided(ts, interval, avoid).tolist()


def random_grid(
    interval: Interval, n: int, seed: int = 0, avoid: Optional[Sequence[float]] = None
) -> List[float]:
    """
    n seeded uniform random interior points, sorted.

    Used for zero detection, where a structured grid could coincide with
    zeros of the tested expression.
    """
    t0, t1 = interval
    rng = np.random.default_rng(seed)
    width = t1 - t0
    ts = np.sort(t0 + width * (0.01 + 0.98 * rng.random(n)))
    return _drop_avoided(ts, interval, avoid).tolist()


def midpoint(interval: Interval) -> float:
    return 0.5 * (interval[0] + interval[1])
