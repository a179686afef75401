"""Polygonal domains with polyline slits and three (or four) marked boundary points.

The boundary of a slit domain is traversed once counterclockwise (domain on
the left).  A slit is visited twice, first along its direction (its left
side) and then back (its right side), so every prime end has exactly one
traversal parameter.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

from ..geometry import (
    TAU_REL,
    GeometryError,
    Point,
    Polygon,
    Polyline,
    points_to_segments,
    segments_intersect,
    winding_inside,
)

ARC_NAMES = ("A", "B", "C")
MARK_NAMES = ("a", "b", "c")


class DomainParseError(GeometryError):
    """Malformed domain file or inconsistent domain data."""


@dataclass(frozen=True)
class Mark:
    point: Point
    side: Optional[str] = None  # "left" / "right" for points on a two-sided slit

    def __post_init__(self):
        if self.side not in (None, "left", "right"):
            raise DomainParseError(f"mark side must be left, right or null, got {self.side!r}")


@dataclass(frozen=True)
class Traversal:
    """Directed boundary segments in counterclockwise order."""

    seg_a: np.ndarray  # (M, 2)
    seg_b: np.ndarray  # (M, 2)
    slit: np.ndarray  # (M,) slit index, -1 for the outer polygon
    forward: np.ndarray  # (M,) True when a slit segment is walked along the slit direction
    start: np.ndarray  # (M,) arclength parameter at seg_a
    total: float

    @property
    def lengths(self) -> np.ndarray:
        return np.hypot(*(self.seg_b - self.seg_a).T)

    def point_at(self, t: float) -> np.ndarray:
        t = t % self.total
        i = int(np.searchsorted(self.start, t, side="right") - 1)
        L = self.lengths[i]
        f = 0.0 if L == 0 else (t - self.start[i]) / L
        return self.seg_a[i] + f * (self.seg_b[i] - self.seg_a[i])

    def path(self, t0: float, t1: float) -> np.ndarray:
        """Boundary points from parameter t0 forward to t1 (wrapping), including corners."""
        span = (t1 - t0) % self.total
        return self._path_sorted(t0, span if span > 0 else self.total)

    def _path_sorted(self, t0: float, span: float) -> np.ndarray:
        rel = (self.start - t0) % self.total
        order = np.argsort(rel, kind="stable")
        pts = [self.point_at(t0)]
        for i in order:
            if 0 < rel[i] < span:
                pts.append(self.seg_a[i])
        pts.append(self.point_at(t0 + span))
        arr = np.array(pts)
        keep = np.ones(len(arr), dtype=bool)
        keep[1:] = np.any(np.abs(np.diff(arr, axis=0)) > 0, axis=1)
        return arr[keep]


def _node_key(p, scale: float) -> tuple[int, int]:
    q = 1e-9 * scale
    return (int(round(p[0] / q)), int(round(p[1] / q)))


def _split_at(seg: tuple[np.ndarray, np.ndarray], cuts: list[np.ndarray]) -> list[np.ndarray]:
    a, b = seg
    d = b - a
    L2 = float(d @ d)
    ts = sorted({float(np.clip((c - a) @ d / L2, 0, 1)) for c in cuts})
    pts = [a] + [a + t * d for t in ts if 0 < t < 1] + [b]
    return pts


class ContinuousDomain:
    """Outer polygon minus directed polyline slits, with marks a, b, c (and optional probe d)."""

    def __init__(
        self,
        outer: Polygon,
        slits: list[Polyline] | tuple = (),
        marks: Optional[dict] = None,
        z0=None,
        probe: Optional[Mark] = None,
    ):
        self.outer = outer
        self.slits = tuple(slits)
        marks = dict(marks or {})
        missing = [m for m in MARK_NAMES if m not in marks]
        if missing:
            raise DomainParseError(f"missing marks: {missing}")
        self.marks = {k: (v if isinstance(v, Mark) else Mark(Point(*v))) for k, v in marks.items() if k in MARK_NAMES}
        if probe is None and "d" in marks:
            probe = marks["d"] if isinstance(marks["d"], Mark) else Mark(Point(*marks["d"]))
        self.probe = probe
        if z0 is None:
            raise DomainParseError("z0 is required")
        self.z0 = z0 if isinstance(z0, Point) else Point(*z0)
        self.tol = TAU_REL * outer.diameter()
        self._validate_slits()
        self._traversal = self._build_traversal()
        self.mark_params = {m: self.locate(self.marks[m]) for m in MARK_NAMES}
        self._check_marks()
        if not self.contains(np.array([tuple(self.z0)]))[0]:
            raise DomainParseError("z0 is not inside the slit domain")
        if self.probe is not None:
            self.probe_param = self.locate(self.probe)
            if self.arc_at(self.probe_param) != "A" and not self._at_mark(self.probe_param, ("b", "c")):
                raise DomainParseError("probe d must lie on arc A (between b and c)")
        else:
            self.probe_param = None

    # ------------------------------------------------------------------ validation
    def _validate_slits(self):
        outer = self.outer.array
        oa, ob = outer, np.roll(outer, -1, axis=0)
        tol = self.tol
        for k, sl in enumerate(self.slits):
            arr = sl.array
            # start must touch the outer boundary or an earlier slit
            d_outer, _ = points_to_segments(arr[:1], oa, ob)
            attached = d_outer.min() <= tol
            for prev in self.slits[:k]:
                pa = prev.array
                dd, _ = points_to_segments(arr[:1], pa[:-1], pa[1:])
                attached = attached or dd.min() <= tol
            if not attached:
                raise DomainParseError(f"slit {k} does not start on the boundary")
            rest = arr[1:]
            if not winding_inside(rest, outer).all():
                raise DomainParseError(f"slit {k} leaves the outer polygon")
            dd, _ = points_to_segments(rest, oa, ob)
            if (dd.min(axis=1) <= tol).any():
                raise DomainParseError(f"slit {k} touches the outer boundary away from its start")
            segs = list(zip(arr[:-1], arr[1:]))
            for i, (p1, p2) in enumerate(segs):
                for j in range(i + 2, len(segs)):
                    if segments_intersect(p1, p2, *segs[j]):
                        raise DomainParseError(f"slit {k} is not simple")
                for j in range(len(oa)):
                    if i == 0:
                        continue
                    if segments_intersect(p1, p2, oa[j], ob[j]):
                        raise DomainParseError(f"slit {k} crosses the outer boundary")
                for prev in self.slits[:k]:
                    pa = prev.array
                    for j in range(len(pa) - 1):
                        if i == 0:
                            # the first segment may touch its attachment point only
                            dd, _ = points_to_segments(p2[None], pa[j : j + 1], pa[j + 1 : j + 2])
                            if dd[0, 0] <= tol:
                                raise DomainParseError(f"slit {k} touches slit {prev!r}")
                            continue
                        if segments_intersect(p1, p2, pa[j], pa[j + 1]):
                            raise DomainParseError(f"slit {k} crosses an earlier slit")

    # ------------------------------------------------------------------ traversal
    def _build_traversal(self) -> Traversal:
        scale = self.outer.diameter()
        outer = self.outer.array
        starts = [sl.array[0] for sl in self.slits]
        # (points, slit index) chains; outer edges are split at slit attachments
        edges = []  # (p, q, slit index)
        n = len(outer)
        for i in range(n):
            a, b = outer[i], outer[(i + 1) % n]
            cuts = [s for s in starts if _seg_dist(s, a, b) <= self.tol]
            pts = _split_at((a, b), cuts)
            for p, q in zip(pts[:-1], pts[1:]):
                edges.append((p, q, -1))
        for k, sl in enumerate(self.slits):
            arr = sl.array
            later = [s.array[0] for s in self.slits[k + 1 :]]
            for p, q in zip(arr[:-1], arr[1:]):
                cuts = [s for s in later if _seg_dist(s, p, q) <= self.tol]
                pts = _split_at((p, q), cuts)
                for p2, q2 in zip(pts[:-1], pts[1:]):
                    edges.append((p2, q2, k))
        pos: dict[tuple[int, int], np.ndarray] = {}
        adj: dict[tuple[int, int], list] = {}
        for p, q, k in edges:
            kp, kq = _node_key(p, scale), _node_key(q, scale)
            pos.setdefault(kp, np.asarray(p, float))
            pos.setdefault(kq, np.asarray(q, float))
            adj.setdefault(kp, []).append((kq, k, True))
            adj.setdefault(kq, []).append((kp, k, False))

        def angle(u, v):
            d = pos[v] - pos[u]
            return math.atan2(d[1], d[0])

        first = edges[0]
        cur = (_node_key(first[0], scale), _node_key(first[1], scale), -1, True)
        start = cur
        seq = []
        for _ in range(4 * len(edges) + 4):
            seq.append(cur)
            u, v, _, _ = cur
            back = angle(v, u)
            best, best_turn = None, None
            for w, k, fwd in adj[v]:
                if w == u and len(adj[v]) > 1:
                    continue
                # clockwise sweep from the back direction
                turn = (back - angle(v, w)) % (2 * math.pi)
                if turn == 0:
                    turn = 2 * math.pi
                if best_turn is None or turn < best_turn:
                    best, best_turn = (v, w, k, fwd), turn
            cur = best
            if cur[:2] == start[:2]:
                break
        else:  # pragma: no cover - defensive
            raise DomainParseError("boundary traversal did not close")
        seg_a = np.array([pos[s[0]] for s in seq])
        seg_b = np.array([pos[s[1]] for s in seq])
        L = np.hypot(*(seg_b - seg_a).T)
        st = np.concatenate([[0.0], np.cumsum(L)[:-1]])
        return Traversal(
            seg_a=seg_a,
            seg_b=seg_b,
            slit=np.array([s[2] for s in seq]),
            forward=np.array([s[3] for s in seq]),
            start=st,
            total=float(L.sum()),
        )

    @property
    def traversal(self) -> Traversal:
        return self._traversal

    # ------------------------------------------------------------------ marks and arcs
    def locate(self, mark: Mark) -> float:
        """Traversal parameter of a marked boundary point."""
        tr = self._traversal
        p = np.array([tuple(mark.point)])
        dist, t = points_to_segments(p, tr.seg_a, tr.seg_b)
        dist, t = dist[0], t[0]
        cand = np.flatnonzero(dist <= max(self.tol, 1e-12))
        if len(cand) == 0:
            raise DomainParseError(f"mark {tuple(mark.point)} is not on the boundary")
        params = (tr.start[cand] + t[cand] * tr.lengths[cand]) % tr.total
        on_slit = tr.slit[cand] >= 0
        side = np.where(tr.forward[cand], "left", "right")
        distinct = _distinct_params(params, tr.total, self.tol)
        if len(distinct) == 1:
            return distinct[0]
        if mark.side is not None:
            sel = [params[i] for i in range(len(cand)) if on_slit[i] and side[i] == mark.side]
            if not sel:
                sel = list(params) if mark.side == "left" else list(params)[::-1]
            return float(sel[0] if mark.side == "left" else sel[-1])
        if on_slit.all() or (on_slit.any() and not (~on_slit).any()):
            raise DomainParseError("a mark on a two-sided slit needs a side tag")
        outer_params = sorted(params[~on_slit])
        return float(outer_params[0])

    def _check_marks(self):
        mp = self.mark_params
        L = self._traversal.total
        rb = (mp["b"] - mp["a"]) % L
        rc = (mp["c"] - mp["a"]) % L
        if min(rb, rc, (mp["c"] - mp["b"]) % L) <= self.tol:
            raise DomainParseError("marks must be distinct boundary points")
        if not rb < rc:
            raise DomainParseError("marks a, b, c must be in counterclockwise order")

    def _at_mark(self, t: float, names) -> bool:
        L = self._traversal.total
        return any(min((t - self.mark_params[m]) % L, (self.mark_params[m] - t) % L) <= self.tol for m in names)

    def arc_at(self, t) -> np.ndarray | str:
        """Arc label at traversal parameter(s): C = [a,b], A = [b,c], B = [c,a]."""
        mp = self.mark_params
        L = self._traversal.total
        rel = (np.asarray(t, dtype=float) - mp["a"]) % L
        rb = (mp["b"] - mp["a"]) % L
        rc = (mp["c"] - mp["a"]) % L
        out = np.where(rel < rb, "C", np.where(rel < rc, "A", "B"))
        return str(out) if out.ndim == 0 else out

    def arc_span(self, label: str) -> tuple[float, float]:
        start, end = {"C": ("a", "b"), "A": ("b", "c"), "B": ("c", "a")}[label]
        return self.mark_params[start], self.mark_params[end]

    def arc_polyline(self, label: str) -> np.ndarray:
        t0, t1 = self.arc_span(label)
        return self._traversal._path_sorted(t0, (t1 - t0) % self._traversal.total)

    def nearest_boundary(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Parameter and distance of the nearest boundary point seen from the domain side.

        On a two-sided slit both directed copies are equidistant; the copy that
        has the point on its left (the side the point is on) wins.
        """
        tr = self._traversal
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        dist, t = points_to_segments(pts, tr.seg_a, tr.seg_b)
        d = tr.seg_b - tr.seg_a
        rel = pts[:, None, :] - tr.seg_a[None]
        cross = d[None, :, 0] * rel[..., 1] - d[None, :, 1] * rel[..., 0]
        key = dist + np.where(cross < -self.tol * tr.lengths[None], 1e300, 0.0)
        key = np.where(np.isfinite(key), key, dist)
        idx = np.argmin(key, axis=1)
        rows = np.arange(len(pts))
        param = (tr.start[idx] + t[rows, idx] * tr.lengths[idx]) % tr.total
        return param, dist[rows, idx]

    def mark_point(self, name: str) -> np.ndarray:
        if name == "d":
            if self.probe is None:
                raise DomainParseError("domain has no probe d")
            return np.array(tuple(self.probe.point))
        return np.array(tuple(self.marks[name].point))

    # ------------------------------------------------------------------ region tests
    def contains(self, points: np.ndarray) -> np.ndarray:
        """Strictly inside the outer polygon and off every slit (within the geometric tolerance)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        tr = self._traversal
        inside = winding_inside(pts, self.outer.array)
        dist, _ = points_to_segments(pts, tr.seg_a, tr.seg_b)
        return inside & (dist.min(axis=1) > self.tol)

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        tr = self._traversal
        dist, _ = points_to_segments(np.asarray(points, dtype=float).reshape(-1, 2), tr.seg_a, tr.seg_b)
        return dist.min(axis=1)

    @cached_property
    def shapes(self):
        """Shapely geometries of the outer polygon and the union of slits (or None)."""
        import shapely

        poly = shapely.Polygon(self.outer.array)
        slits = shapely.MultiLineString([sl.array for sl in self.slits]) if self.slits else None
        if slits is not None:
            shapely.prepare(slits)
        shapely.prepare(poly)
        return poly, slits

    @property
    def diameter(self) -> float:
        return self.outer.diameter()

    def inradius_at(self, p) -> float:
        return float(self.boundary_distance(np.array([tuple(p)]))[0])

    # ------------------------------------------------------------------ construction helpers
    def with_slits(self, slits, marks: Optional[dict] = None, probe: Optional[Mark] = None, z0=None) -> "ContinuousDomain":
        return ContinuousDomain(
            self.outer,
            list(slits),
            marks if marks is not None else dict(self.marks),
            z0 if z0 is not None else self.z0,
            probe if probe is not None else self.probe,
        )

    def with_probe(self, point, side: Optional[str] = None) -> "ContinuousDomain":
        return ContinuousDomain(self.outer, list(self.slits), dict(self.marks), self.z0, Mark(Point(*point), side))

    def to_dict(self) -> dict:
        marks = {k: {"point": [m.point.x, m.point.y], "side": m.side} for k, m in self.marks.items()}
        if self.probe is not None:
            marks["d"] = {"point": [self.probe.point.x, self.probe.point.y], "side": self.probe.side}
        return {
            "outer": self.outer.array.tolist(),
            "slits": [{"points": sl.array.tolist()} for sl in self.slits],
            "marks": marks,
            "z0": [self.z0.x, self.z0.y],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ContinuousDomain":
        try:
            if not isinstance(doc, dict):
                raise DomainParseError("domain document must be a JSON object")
            outer = Polygon([_pt(p) for p in doc["outer"]])
            slits = []
            for s in doc.get("slits", []) or []:
                pts = s["points"] if isinstance(s, dict) else s
                slits.append(Polyline([_pt(p) for p in pts]))
            marks = {}
            probe = None
            for name, m in doc["marks"].items():
                if isinstance(m, dict):
                    mk = Mark(Point(*_pt(m["point"])), m.get("side"))
                else:
                    mk = Mark(Point(*_pt(m)))
                if name == "d":
                    probe = mk
                elif name in MARK_NAMES:
                    marks[name] = mk
                else:
                    raise DomainParseError(f"unknown mark {name!r}")
            return cls(outer, slits, marks, _pt(doc["z0"]), probe)
        except DomainParseError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainParseError(f"malformed domain document: {exc!r}") from exc

    @classmethod
    def load(cls, path) -> "ContinuousDomain":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DomainParseError(f"cannot read domain file {path}: {exc}") from exc
        return cls.from_dict(doc)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def __repr__(self):
        return f"ContinuousDomain(outer={len(self.outer)} vertices, slits={len(self.slits)})"


def _pt(p) -> tuple[float, float]:
    if len(p) != 2:
        raise DomainParseError(f"point must have two coordinates, got {p!r}")
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise DomainParseError(f"non-finite coordinate in {p!r}")
    return (x, y)


def _seg_dist(p, a, b) -> float:
    d, _ = points_to_segments(np.asarray(p, float)[None], np.asarray(a, float)[None], np.asarray(b, float)[None])
    return float(d[0, 0])


def _distinct_params(params: np.ndarray, total: float, tol: float) -> list[float]:
    out: list[float] = []
    for p in sorted(params):
        if not any(min((p - q) % total, (q - p) % total) <= max(tol, 1e-12) for q in out):
            out.append(float(p))
    return out
