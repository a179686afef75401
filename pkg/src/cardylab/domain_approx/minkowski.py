"""Box-counting dimension of polyline boundaries."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..geometry import Polyline, densify


@dataclass(frozen=True)
class MinkowskiEstimate:
    scales: tuple
    counts: tuple
    fitted_dimension: float


def box_count(points: np.ndarray, size: float, origin: np.ndarray) -> int:
    cells = np.floor((points - origin) / size).astype(np.int64)
    return len(np.unique(cells, axis=0))


def minkowski_dimension(boundary: Sequence[Polyline], scales: Sequence[float]) -> MinkowskiEstimate:
    """Least-squares slope of log(box count) against log(1/size).

    Each polyline is sampled at one eighth of the smallest box size, so every
    box the curve passes through holds a sample.
    """
    scales = sorted((float(s) for s in scales), reverse=True)
    if len(scales) < 4:
        raise ValueError("need at least four scales")
    if scales[0] / scales[-1] < 100 * (1 - 1e-12):
        raise ValueError("scales must span at least two decades")
    step = scales[-1] / 8.0
    pts = np.vstack([densify(pl.array, step) for pl in boundary])
    # a fixed irrational shift keeps grid lines off axis-aligned fixture edges
    origin = pts.min(axis=0) - np.array([0.1234567, 0.2345678]) * scales[0]
    counts = [box_count(pts, s, origin) for s in scales]
    slope = np.polyfit(np.log(1.0 / np.array(scales)), np.log(np.array(counts, dtype=float)), 1)[0]
    return MinkowskiEstimate(tuple(scales), tuple(counts), float(slope))


def koch_curve(levels: int) -> Polyline:
    """Koch curve on the unit segment after ``levels`` refinements."""
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    rot = np.array([[0.5, -np.sqrt(3) / 2], [np.sqrt(3) / 2, 0.5]])
    for _ in range(levels):
        out = [pts[0]]
        for a, b in zip(pts[:-1], pts[1:]):
            d = (b - a) / 3.0
            p1 = a + d
            p2 = p1 + rot @ d
            p3 = a + 2 * d
            out.extend([p1, p2, p3, b])
        pts = np.array(out)
    return Polyline(pts)
