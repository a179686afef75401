"""Planar primitives: points, polylines, polygons and curve distances."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

# relative on-boundary tolerance; multiplied by a length scale (domain diameter)
TAU_REL = 1e-9


class GeometryError(ValueError):
    pass


class Location(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    ON_BOUNDARY = "on_boundary"


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y})")

    def as_complex(self) -> complex:
        return complex(self.x, self.y)

    def __iter__(self):
        yield self.x
        yield self.y


def _as_array(pts) -> np.ndarray:
    if isinstance(pts, (Polyline, Polygon)):
        return pts.array
    arr = np.asarray([tuple(p) for p in pts], dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError("expected a sequence of 2D points")
    return arr


class Polyline:
    """Ordered open polyline with at least two distinct consecutive vertices."""

    __slots__ = ("_arr",)

    def __init__(self, vertices):
        arr = _as_array(vertices)
        if len(arr) < 2:
            raise GeometryError("polyline needs at least 2 vertices")
        if not np.all(np.isfinite(arr)):
            raise GeometryError("non-finite polyline vertex")
        if np.any(np.all(np.diff(arr, axis=0) == 0.0, axis=1)):
            raise GeometryError("consecutive polyline vertices coincide")
        arr.setflags(write=False)
        self._arr = arr

    @property
    def array(self) -> np.ndarray:
        return self._arr

    @property
    def vertices(self) -> list[Point]:
        return [Point(float(x), float(y)) for x, y in self._arr]

    def __len__(self):
        return len(self._arr)

    def length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self._arr, axis=0).T)))

    def reversed(self) -> "Polyline":
        return Polyline(self._arr[::-1])

    def densify(self, step: float) -> np.ndarray:
        """Vertices plus uniformly inserted points so consecutive samples are <= step apart."""
        return densify(self._arr, step)

    def __repr__(self):
        return f"Polyline({self._arr.tolist()})"


class Polygon:
    """Simple polygon, stored counterclockwise. Closed implicitly."""

    __slots__ = ("_arr",)

    def __init__(self, vertices):
        arr = _as_array(vertices)
        if len(arr) >= 2 and np.all(arr[0] == arr[-1]):
            arr = arr[:-1]
        if len(arr) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(arr)):
            raise GeometryError("non-finite polygon vertex")
        area = signed_area(arr)
        if abs(area) <= 0.0:
            raise GeometryError("degenerate polygon (zero area)")
        if area < 0:
            arr = arr[::-1].copy()
        if not is_simple(arr):
            raise GeometryError("polygon is not simple")
        arr.setflags(write=False)
        self._arr = arr

    @property
    def array(self) -> np.ndarray:
        return self._arr

    @property
    def vertices(self) -> list[Point]:
        return [Point(float(x), float(y)) for x, y in self._arr]

    def __len__(self):
        return len(self._arr)

    def edges(self) -> np.ndarray:
        """Array of shape (n, 2, 2): segment i runs from vertex i to vertex i+1."""
        return np.stack([self._arr, np.roll(self._arr, -1, axis=0)], axis=1)

    def boundary(self) -> Polyline:
        return Polyline(np.vstack([self._arr, self._arr[:1]]))

    def area(self) -> float:
        return signed_area(self._arr)

    def diameter(self) -> float:
        d = self._arr[:, None, :] - self._arr[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    def bbox(self):
        lo = self._arr.min(axis=0)
        hi = self._arr.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def __repr__(self):
        return f"Polygon({self._arr.tolist()})"


def signed_area(arr: np.ndarray) -> float:
    x, y = arr[:, 0], arr[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def segments_intersect(p1, p2, q1, q2, tol: float = 0.0) -> bool:
    """Closed-segment intersection test."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
        (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)
    ):
        return True
    return (
        segment_distance(p1, q1, q2) <= tol
        or segment_distance(p2, q1, q2) <= tol
        or segment_distance(q1, p1, p2) <= tol
        or segment_distance(q2, p1, p2) <= tol
    )


def is_simple(arr: np.ndarray) -> bool:
    n = len(arr)
    for i in range(n):
        a1, a2 = arr[i], arr[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            if segments_intersect(a1, a2, arr[j], arr[(j + 1) % n]):
                return False
    return True


def segment_distance(p, a, b) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    t = 0.0 if L2 == 0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / L2))
    return math.hypot(px - ax - t * dx, py - ay - t * dy)


def points_to_segments(points: np.ndarray, seg_a: np.ndarray, seg_b: np.ndarray):
    """Distances from every point to every segment, plus the nearest-point parameter.

    Returns ``(dist, t)`` each of shape ``(len(points), len(segments))``.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    d = seg_b - seg_a
    L2 = np.einsum("ij,ij->i", d, d)
    L2 = np.where(L2 == 0, 1.0, L2)
    rel = points[:, None, :] - seg_a[None, :, :]
    t = np.clip(np.einsum("pij,ij->pi", rel, d) / L2, 0.0, 1.0)
    near = seg_a[None] + t[..., None] * d[None]
    dist = np.hypot(*(points[:, None, :] - near).transpose(2, 0, 1))
    return dist, t


def point_in_polygon(p, poly: Polygon, tol: Optional[float] = None) -> Location:
    """Classify ``p`` against ``poly``; within ``tol`` of an edge counts as on-boundary.

    ``tol`` defaults to ``TAU_REL`` times the polygon diameter.
    """
    if tol is None:
        tol = TAU_REL * poly.diameter()
    return classify_points(np.asarray([tuple(p)], dtype=float), poly, tol)[0]


def classify_points(points: np.ndarray, poly: Polygon, tol: float) -> list[Location]:
    arr = poly.array
    a = arr
    b = np.roll(arr, -1, axis=0)
    dist, _ = points_to_segments(points, a, b)
    on = dist.min(axis=1) <= tol
    inside = winding_inside(points, arr)
    out = []
    for o, i in zip(on, inside):
        out.append(Location.ON_BOUNDARY if o else (Location.INSIDE if i else Location.OUTSIDE))
    return out


def winding_inside(points: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Even-odd ray-casting test for many points against a closed ring."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    x = points[:, 0][:, None]
    y = points[:, 1][:, None]
    x1, y1 = ring[:, 0][None], ring[:, 1][None]
    x2, y2 = np.roll(ring[:, 0], -1)[None], np.roll(ring[:, 1], -1)[None]
    cond = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    crosses = cond & (x < xint)
    return (crosses.sum(axis=1) % 2) == 1


def distance_point_to_polyline(p, c: Polyline) -> float:
    arr = c.array
    dist, _ = points_to_segments(np.asarray([tuple(p)], dtype=float), arr[:-1], arr[1:])
    return float(dist.min())


def densify(arr: np.ndarray, step: float) -> np.ndarray:
    if step <= 0:
        raise GeometryError("densification step must be positive")
    arr = np.asarray(arr, dtype=float)
    out = [arr[:1]]
    for a, b in zip(arr[:-1], arr[1:]):
        n = max(1, int(math.ceil(math.hypot(*(b - a)) / step)))
        t = np.arange(1, n + 1)[:, None] / n
        out.append(a + t * (b - a))
    return np.vstack(out)


def discrete_frechet(P: np.ndarray, Q: np.ndarray) -> float:
    """Discrete Fréchet distance between two vertex sequences (iterative DP)."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    D = np.hypot(P[:, None, 0] - Q[None, :, 0], P[:, None, 1] - Q[None, :, 1])
    n, m = D.shape
    ca = np.empty((n, m))
    ca[0, 0] = D[0, 0]
    ca[0, 1:] = np.maximum.accumulate(D[0, 1:].clip(min=D[0, 0]))
    ca[1:, 0] = np.maximum.accumulate(D[1:, 0].clip(min=D[0, 0]))
    for i in range(1, n):
        # row recurrence: ca[i, j] = max(D[i, j], min(ca[i-1, j], ca[i-1, j-1], ca[i, j-1]))
        prev = ca[i - 1]
        best_diag = np.minimum(prev[1:], prev[:-1])
        row = ca[i]
        for j in range(1, m):
            row[j] = max(D[i, j], min(best_diag[j - 1], row[j - 1]))
    return float(ca[-1, -1])


def frechet_distance(
    g1: Polyline,
    g2: Polyline,
    step: Optional[float] = None,
    weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> float:
    """Curve distance realized as discrete Fréchet on densified polylines.

    Parameters
    ----------
    step : float, optional
        Maximum spacing of the samples; defaults to 1/64 of the longer curve.
    weight : callable, optional
        Hook for a position-dependent weighting of deviations; receives the
        midpoints of matched sample pairs ``(k, 2)`` and returns factors.
        Only the unweighted distance is used elsewhere in the package.
    """
    if step is None:
        step = max(g1.length(), g2.length()) / 64.0 or 1.0
    P = g1.densify(step)
    Q = g2.densify(step)
    if weight is None:
        return discrete_frechet(P, Q)
    # weighted variant: scale the coupling cost pointwise, then run the same DP
    mid = 0.5 * (P[:, None, :] + Q[None, :, :])
    w = np.asarray(weight(mid.reshape(-1, 2)), dtype=float).reshape(len(P), len(Q))
    return _frechet_from_cost(w * np.hypot(P[:, None, 0] - Q[None, :, 0], P[:, None, 1] - Q[None, :, 1]))


def _frechet_from_cost(D: np.ndarray) -> float:
    n, m = D.shape
    ca = np.full((n, m), np.inf)
    ca[0, 0] = D[0, 0]
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                continue
            best = min(
                ca[i - 1, j] if i else np.inf,
                ca[i, j - 1] if j else np.inf,
                ca[i - 1, j - 1] if i and j else np.inf,
            )
            ca[i, j] = max(D[i, j], best)
    return float(ca[-1, -1])


def directed_hausdorff(A: Polyline, B: Polyline, step: Optional[float] = None) -> float:
    """sup over a in A of dist(a, B), with A sampled at ``step`` and B exact."""
    if step is None:
        step = max(A.length(), B.length()) / 256.0 or 1.0
    P = A.densify(step)
    arr = B.array
    dist, _ = points_to_segments(P, arr[:-1], arr[1:])
    return float(dist.min(axis=1).max())


def hausdorff_distance(A: Polyline, B: Polyline, step: Optional[float] = None) -> float:
    return max(directed_hausdorff(A, B, step), directed_hausdorff(B, A, step))


def polyline_from(points: Iterable[Sequence[float]]) -> Polyline:
    return Polyline(list(points))
