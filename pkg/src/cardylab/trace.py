"""Interface traces on the hexagonal tiling (exploration paths and discrete slits)."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import Polyline
from .lattice import LatticeScale, site_centers


class StopReason(enum.Enum):
    STEP_LIMIT = "StepLimit"
    REACHED_TARGET = "ReachedTargetNbhd"
    TRAPPED = "Trapped"


@dataclass(frozen=True)
class CurveTrace:
    """Edge path between hexagons, with the ``left`` hexes on its left.

    ``vertices[i]`` and ``vertices[i+1]`` are the corner keys bounding edge i;
    ``left[i]`` / ``right[i]`` are the axial coordinates of the two hexes that
    share it.  The first edge may be virtual (both hexes exterior).
    """

    left: tuple[tuple[int, int], ...]
    right: tuple[tuple[int, int], ...]
    vertices: tuple[tuple[int, int], ...]
    stop_reason: StopReason = StopReason.STEP_LIMIT

    def __post_init__(self):
        if len(self.left) != len(self.right) or len(self.vertices) != len(self.left) + 1:
            raise ValueError("trace edges and vertices are inconsistent")

    @property
    def start(self) -> tuple[int, int]:
        return self.vertices[0]

    @property
    def tip(self) -> tuple[int, int]:
        return self.vertices[-1]

    def __len__(self) -> int:
        return len(self.left)

    @property
    def edges(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        return list(zip(self.left, self.right))

    def is_edge_self_avoiding(self) -> bool:
        keys = [frozenset(e) for e in self.edges]
        return len(set(keys)) == len(keys)

    def points(self, scale: LatticeScale) -> np.ndarray:
        return site_centers(np.asarray(self.vertices, dtype=float) / 3.0, scale)

    def polyline(self, scale: LatticeScale) -> Polyline:
        return Polyline(self.points(scale))

    def truncated(self, n_edges: int) -> "CurveTrace":
        n = max(0, min(n_edges, len(self)))
        return CurveTrace(self.left[:n], self.right[:n], self.vertices[: n + 1], StopReason.STEP_LIMIT)

    @classmethod
    def empty(cls, start) -> "CurveTrace":
        return cls((), (), (tuple(start),), StopReason.STEP_LIMIT)
