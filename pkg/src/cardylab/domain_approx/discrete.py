"""Lattice approximations of continuous domains.

A :class:`DiscreteDomain` is a finite set of hexagonal tiles.  Its boundary
consists of tile edges ``(i, k)`` (site index ``i``, facing direction ``k``)
whose other side is not in the domain or has been cut.  Boundary edges are
traced into closed cycles with the domain on the left, labelled with the arcs
``A``, ``B``, ``C``, and split at the marked vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

from ..lattice import (
    DIRS,
    DIRS_ARR,
    LatticeError,
    LatticeScale,
    SiteCoord,
    cluster_labels,
    corner_key,
    site_centers,
)
from ..geometry import points_to_segments
from ..trace import CurveTrace
from .continuous import ContinuousDomain

ARCS = ("A", "B", "C")
# label immediately before / after each mark in counterclockwise order
BEFORE = {"a": "B", "b": "C", "c": "A"}
AFTER = {"a": "C", "b": "A", "c": "B"}


class DomainApproxError(ValueError):
    pass


class EmptyApproximation(DomainApproxError):
    pass


class NoPrincipalComponent(DomainApproxError):
    pass


class AmbiguousArc(DomainApproxError):
    pass


class LabelingError(DomainApproxError):
    pass


class SlitEscapesDomain(DomainApproxError):
    pass


class NonCommensurate(DomainApproxError):
    pass


class MarkSwallowed(DomainApproxError):
    pass


class UnlabeledDomain(DomainApproxError):
    pass


_OFF = 1 << 30
_MUL = 1 << 31


def _codes(uv: np.ndarray) -> np.ndarray:
    uv = np.asarray(uv, dtype=np.int64)
    return (uv[..., 0] + _OFF) * _MUL + (uv[..., 1] + _OFF)


def neighbour_table(sites: np.ndarray) -> np.ndarray:
    """(N, 6) neighbour indices for lexicographically sorted sites (-1 if absent)."""
    codes = _codes(sites)
    nb = sites[:, None, :] + DIRS_ARR[None, :, :]
    nc = _codes(nb)
    pos = np.searchsorted(codes, nc)
    pos = np.clip(pos, 0, len(codes) - 1)
    found = codes[pos] == nc
    return np.where(found, pos, -1).astype(np.int64)


def corner_keys(sites: np.ndarray, j: np.ndarray) -> np.ndarray:
    a = DIRS_ARR[j % 6]
    b = DIRS_ARR[(j + 1) % 6]
    return 3 * sites + a + b


def corner_positions(keys, scale: LatticeScale) -> np.ndarray:
    return site_centers(np.asarray(keys, dtype=float).reshape(-1, 2) / 3.0, scale)


@dataclass(frozen=True, eq=False)
class DiscreteDomain:
    """Finite set of hex tiles with traced, labelled boundary cycles.

    ``nbr[i, k]`` is the index of the neighbour of site ``i`` in direction
    ``k``, or -1 when that neighbour is outside the domain or the shared edge
    has been cut by a slit.  ``edge_labels`` maps boundary edges ``(i, k)`` to
    ``"A" | "B" | "C"``; ``marked`` maps ``a, b, c`` to corner keys on the
    principal cycle.
    """

    scale: LatticeScale
    sites: np.ndarray
    nbr: np.ndarray
    component: np.ndarray
    principal: int
    cycles: tuple
    principal_cycle: int
    edge_labels: dict = field(default_factory=dict)
    marked: dict = field(default_factory=dict)
    probe_vertex: Optional[tuple] = None

    # -------------------------------------------------------------- basic views
    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @cached_property
    def _index(self) -> dict:
        return {(int(u), int(v)): i for i, (u, v) in enumerate(self.sites)}

    def index_of(self, s) -> int:
        try:
            u, v = s
            return self._index[(int(u), int(v))]
        except (KeyError, TypeError, ValueError):
            raise LatticeError(f"site {s} is not in the domain") from None

    def contains_site(self, s) -> bool:
        u, v = s
        return (int(u), int(v)) in self._index

    def site(self, i: int) -> SiteCoord:
        return SiteCoord(int(self.sites[i, 0]), int(self.sites[i, 1]))

    @cached_property
    def centers(self) -> np.ndarray:
        return site_centers(self.sites, self.scale)

    @cached_property
    def principal_mask(self) -> np.ndarray:
        return self.component == self.principal

    @property
    def labeled(self) -> bool:
        return bool(self.edge_labels) and all(m in self.marked for m in "abc")

    def edge_key(self, e) -> tuple:
        """Start and end corner keys of boundary edge (i, k), domain on the left."""
        i, k = int(e[0]), int(e[1])
        s = (int(self.sites[i, 0]), int(self.sites[i, 1]))
        return corner_key(s, k - 1), corner_key(s, k)

    def edge_midpoints(self, edges) -> np.ndarray:
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        s = self.sites[edges[:, 0]]
        a = corner_keys(s, edges[:, 1] - 1)
        b = corner_keys(s, edges[:, 1])
        return corner_positions((a + b) / 2.0, self.scale)

    def cycle_vertices(self, ci: int) -> np.ndarray:
        cyc = self.cycles[ci]
        return corner_keys(self.sites[cyc[:, 0]], cyc[:, 1] - 1)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        i, k = np.nonzero(self.nbr < 0)
        return np.column_stack([i, k])

    def touch_mask(self, label: str, edges: Optional[Iterable] = None) -> np.ndarray:
        """Principal-component sites owning a boundary edge with the given label."""
        mask = np.zeros(self.n_sites, dtype=bool)
        src = self.edge_labels.items() if edges is None else ((tuple(e), self.edge_labels.get(tuple(e))) for e in edges)
        for (i, _k), lab in src:
            if lab == label:
                mask[i] = True
        return mask & self.principal_mask

    def edges_touch_mask(self, edges: Iterable) -> np.ndarray:
        mask = np.zeros(self.n_sites, dtype=bool)
        for i, _k in edges:
            mask[i] = True
        return mask & self.principal_mask

    # -------------------------------------------------------------- principal cycle views
    def oriented_principal(self) -> np.ndarray:
        """Principal cycle edges rotated to start at the edge leaving a_eps."""
        cyc = self.cycles[self.principal_cycle]
        if "a" not in self.marked:
            return cyc
        verts = self.cycle_vertices(self.principal_cycle)
        a = np.asarray(self.marked["a"])
        hit = np.flatnonzero((verts == a).all(axis=1))
        if len(hit) == 0:
            raise LabelingError("a_eps is not a vertex of the principal cycle")
        return np.roll(cyc, -int(hit[0]), axis=0)

    def arc_run(self, label: str) -> list[tuple[int, int]]:
        """Edges of one arc on the principal cycle, in counterclockwise order."""
        return [(int(i), int(k)) for i, k in self.oriented_principal() if self.edge_labels.get((int(i), int(k))) == label]

    def probe_split(self, label: str = "A", vertex=None) -> tuple[list, list]:
        """Split an arc run at a vertex: edges before it and edges after it."""
        run = self.arc_run(label)
        vertex = self.probe_vertex if vertex is None else vertex
        if vertex is None:
            raise DomainApproxError("no probe vertex")
        vertex = tuple(vertex)
        starts = [self.edge_key(e)[0] for e in run]
        if run and self.edge_key(run[-1])[1] == vertex:
            return run, []
        if vertex not in starts:
            raise DomainApproxError(f"vertex {vertex} is not on arc {label}")
        p = starts.index(vertex)
        return run[:p], run[p:]

    def with_labels(self, edge_labels: dict, marked: Optional[dict] = None, probe_vertex="keep") -> "DiscreteDomain":
        """Copy with replaced labels (used to build deliberately broken fixtures)."""
        return replace(
            self,
            edge_labels=dict(edge_labels),
            marked=dict(self.marked if marked is None else marked),
            probe_vertex=self.probe_vertex if probe_vertex == "keep" else probe_vertex,
        )

    def with_probe(self, vertex) -> "DiscreteDomain":
        return replace(self, probe_vertex=None if vertex is None else tuple(vertex))

    def fingerprint(self) -> str:
        """Stable digest of sites, cuts, labels and marks."""
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.sites).tobytes())
        h.update(np.ascontiguousarray(self.nbr).tobytes())
        for key in sorted(self.edge_labels):
            h.update(f"{key}:{self.edge_labels[key]};".encode())
        h.update(repr(sorted(self.marked.items())).encode())
        h.update(repr(self.probe_vertex).encode())
        return h.hexdigest()

    def __repr__(self):
        return f"DiscreteDomain(eps={self.scale.epsilon:g}, sites={self.n_sites}, cycles={len(self.cycles)})"


# ---------------------------------------------------------------------- tracing
def next_boundary_edge(nbr: np.ndarray, i: int, k: int) -> tuple[int, int]:
    """Successor of boundary edge (i, k) walking with the domain on the left.

    At the head corner of the edge the three hexes are ``i``, its neighbour in
    direction k+1 and its neighbour in direction k (the blocked side).
    """
    k1 = (k + 1) % 6
    j1 = nbr[i, k1]
    if j1 < 0:
        return i, k1
    km = (k - 1) % 6
    j2 = nbr[j1, km]
    if j2 < 0:
        return int(j1), km
    return int(j2), (k + 3) % 6


def trace_cycles(nbr: np.ndarray) -> list[np.ndarray]:
    """All boundary cycles, each as an (L, 2) array of (site, direction), canonical start."""
    todo = {(int(i), int(k)) for i, k in zip(*np.nonzero(nbr < 0))}
    cycles = []
    for e in sorted(todo):
        if e not in todo:
            continue
        cyc = [e]
        todo.discard(e)
        cur = next_boundary_edge(nbr, *e)
        while cur != e:
            if cur not in todo:
                raise DomainApproxError("boundary tracing revisited an edge")
            todo.discard(cur)
            cyc.append(cur)
            cur = next_boundary_edge(nbr, *cur)
        cycles.append(np.array(cyc, dtype=np.int64))
    return cycles


def _cycle_area(sites: np.ndarray, cyc: np.ndarray, scale: LatticeScale) -> float:
    pts = corner_positions(corner_keys(sites[cyc[:, 0]], cyc[:, 1] - 1), scale)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _assemble(scale: LatticeScale, sites: np.ndarray, nbr: np.ndarray, principal_site: int) -> DiscreteDomain:
    comp = cluster_labels(nbr, np.ones(len(sites), dtype=bool))
    principal = int(comp[principal_site])
    cycles = trace_cycles(nbr)
    best, best_area = -1, -math.inf
    for ci, cyc in enumerate(cycles):
        if comp[cyc[0, 0]] != principal:
            continue
        area = _cycle_area(sites, cyc, scale)
        if area > best_area:
            best, best_area = ci, area
    return DiscreteDomain(scale, sites, nbr, comp, principal, tuple(cycles), best)


def from_sites(sites, scale: LatticeScale, principal_site=None) -> DiscreteDomain:
    """Unlabelled discrete domain from an explicit site list (hand-built fixtures)."""
    arr = np.unique(np.asarray([tuple(s) for s in sites], dtype=np.int64).reshape(-1, 2), axis=0)
    if len(arr) == 0:
        raise EmptyApproximation("no sites")
    nbr = neighbour_table(arr)
    p = 0
    if principal_site is not None:
        codes = _codes(arr)
        hit = np.flatnonzero(codes == _codes(np.asarray(principal_site)))
        if len(hit) == 0:
            raise NoPrincipalComponent("principal site is not in the domain")
        p = int(hit[0])
    return _assemble(scale, arr, nbr, p)


# ---------------------------------------------------------------------- canonical approximation
def candidate_sites(bbox, scale: LatticeScale) -> np.ndarray:
    xmin, ymin, xmax, ymax = bbox
    h = scale.spacing
    row = h * math.sqrt(3.0) / 2.0
    v0, v1 = math.floor(ymin / row) - 1, math.ceil(ymax / row) + 1
    vs = np.arange(v0, v1 + 1)
    out = []
    for v in vs:
        u0 = math.floor(xmin / h - 0.5 * v) - 1
        u1 = math.ceil(xmax / h - 0.5 * v) + 1
        us = np.arange(u0, u1 + 1)
        out.append(np.column_stack([us, np.full_like(us, v)]))
    return np.concatenate(out).astype(np.int64)


_CORNER_ANG = np.deg2rad(60.0 * np.arange(6) + 30.0)
_CORNER_OFF = np.column_stack([np.cos(_CORNER_ANG), np.sin(_CORNER_ANG)])


def tiles_inside(dom: ContinuousDomain, uv: np.ndarray, scale: LatticeScale) -> np.ndarray:
    """True for tiles contained, boundary included, in the open slit domain."""
    import shapely

    poly, slits = dom.shapes
    centers = site_centers(uv, scale)
    # cheap prefilter: centres farther than one circumradius from the boundary
    keep = dom.contains(centers)
    keep[keep] = dom.boundary_distance(centers[keep]) > scale.circumradius * (1.0 - 1e-12)
    idx = np.flatnonzero(keep)
    rings = centers[idx, None, :] + scale.circumradius * _CORNER_OFF[None]
    tiles = shapely.polygons(rings)
    ok = shapely.contains_properly(poly, tiles)
    if slits is not None:
        ok &= ~shapely.intersects(slits, tiles)
    out = np.zeros(len(uv), dtype=bool)
    out[idx[ok]] = True
    return out


def default_delta(epsilon: float) -> float:
    """Neighbourhood radius around marks: epsilon * ceil(log(1/epsilon)), at least 4 epsilon."""
    return epsilon * max(4, math.ceil(math.log(1.0 / epsilon)))


def canonical_approximation(
    dom: ContinuousDomain, scale: LatticeScale, delta: Optional[float] = None, label: bool = True
) -> DiscreteDomain:
    """All tiles lying entirely inside the domain, with labelled boundary arcs and marks."""
    from .. import lattice

    cand = candidate_sites(dom.outer.bbox(), scale)
    inside = tiles_inside(dom, cand, scale)
    sites = cand[inside]
    if len(sites) == 0:
        raise EmptyApproximation(f"no tile of diameter {scale.epsilon} fits in the domain")
    order = np.lexsort((sites[:, 1], sites[:, 0]))
    sites = np.ascontiguousarray(sites[order])
    nbr = neighbour_table(sites)
    z = lattice.nearest_site(dom.z0.x, dom.z0.y, scale)
    codes = _codes(sites)
    hit = np.flatnonzero(codes == _codes(np.asarray(z)))
    if len(hit) == 0:
        raise NoPrincipalComponent("the tile containing z0 is not in the approximation")
    dd = _assemble(scale, sites, nbr, int(hit[0]))
    if not label:
        return dd
    return assign_boundary_arcs(dd, dom, default_delta(scale.epsilon) if delta is None else delta)


# ---------------------------------------------------------------------- arc labelling
def _vertex_interior_count(nbr: np.ndarray, e: tuple, e_next: tuple) -> int:
    """Number of domain hexes at the corner shared by consecutive boundary edges."""
    if e_next[0] == e[0]:
        return 1
    i, k = e
    j1 = nbr[i, (k + 1) % 6]
    if j1 == e_next[0]:
        return 2
    return 3


def assign_boundary_arcs(dd: DiscreteDomain, dom: ContinuousDomain, delta: float) -> DiscreteDomain:
    """Label every boundary edge with its nearest continuum arc, splitting at marked vertices.

    Edges whose midpoints lie within ``delta`` of a mark get the labels on
    either side of a single split vertex: the cycle vertex in that
    neighbourhood nearest to the mark, preferring vertices with exactly one
    domain hex (an exploration can start there), ties broken by the lowest
    corner key.
    """
    if delta < 4 * dd.scale.epsilon * (1 - 1e-12):
        raise DomainApproxError("delta must be at least four lattice scales")
    labels: dict = {}
    marked: dict = {}
    tol = dom.tol
    for ci, cyc in enumerate(dd.cycles):
        mids = dd.edge_midpoints(cyc)
        params, _ = dom.nearest_boundary(mids)
        arcs = dom.arc_at(params)
        if ci != dd.principal_cycle:
            for e, lab in zip(cyc, arcs):
                labels[(int(e[0]), int(e[1]))] = str(lab)
            continue
        _check_ambiguity(dom, mids, params, arcs, delta, tol)
        n = len(cyc)
        verts = dd.cycle_vertices(ci)
        vpos = corner_positions(verts, dd.scale)
        mark_pts = np.array([dom.mark_point(m) for m in "abc"])
        dmid = np.hypot(*(mids[:, None, :] - mark_pts[None]).transpose(2, 0, 1))
        owner = np.where(dmid.min(axis=1) < delta, np.argmin(dmid, axis=1), -1)
        lab = np.array(arcs, dtype=object)
        for mi, m in enumerate("abc"):
            in_disk = owner == mi
            if not in_disk.any():
                raise LabelingError(f"no boundary edge within delta of mark {m}")
            runs = _cyclic_runs(in_disk)
            # the run holding the vertex nearest the mark carries the split
            best = None
            for run in runs:
                vidx = [(run[0] + t) % n for t in range(len(run) + 1)]
                for p, vi in enumerate(vidx):
                    e_prev = tuple(cyc[(vi - 1) % n])
                    e_next = tuple(cyc[vi])
                    single = _vertex_interior_count(dd.nbr, e_prev, e_next) == 1
                    d = float(np.hypot(*(vpos[vi] - mark_pts[mi])))
                    key = (round(d / dd.scale.epsilon, 9), 0 if single else 1, tuple(verts[vi]))
                    if best is None or key < best[0]:
                        best = (key, run, p, vi)
            _, run, p, vi = best
            for t, ei in enumerate(run):
                lab[ei] = BEFORE[m] if t < p else AFTER[m]
            marked[m] = (int(verts[vi][0]), int(verts[vi][1]))
        for e, l in zip(cyc, lab):
            labels[(int(e[0]), int(e[1]))] = str(l)
    out = dd.with_labels(labels, marked, probe_vertex=None)
    validate_labels(out)
    if dom.probe is not None:
        out = out.with_probe(choose_probe_vertex(out, dom.mark_point("d")))
    return out


def _check_ambiguity(dom, mids, params, arcs, delta, tol):
    """Raise if an edge away from the marks is equally near two different arcs.

    Distances are measured only to arc pieces that have the edge on their
    domain side, so the two sides of a slit never compete.
    """
    mark_pts = np.array([dom.mark_point(m) for m in "abc"])
    far = np.hypot(*(mids[:, None, :] - mark_pts[None]).transpose(2, 0, 1)).min(axis=1) >= delta
    if not far.any():
        return
    pts = mids[far]
    per_arc = []
    for lab in "ABC":
        poly = dom.arc_polyline(lab)
        a, b = poly[:-1], poly[1:]
        d, _ = points_to_segments(pts, a, b)
        seg = b - a
        rel = pts[:, None, :] - a[None]
        cross = seg[None, :, 0] * rel[..., 1] - seg[None, :, 1] * rel[..., 0]
        d = np.where(cross < -tol * np.hypot(*seg.T)[None], np.inf, d)
        per_arc.append(d.min(axis=1))
    per_arc = np.sort(np.column_stack(per_arc), axis=1)
    tie = np.flatnonzero(np.isfinite(per_arc[:, 1]) & (per_arc[:, 1] - per_arc[:, 0] <= tol))
    if len(tie):
        raise AmbiguousArc(f"boundary edge near {pts[tie[0]].tolist()} is equidistant from two arcs")


def _cyclic_runs(mask: np.ndarray) -> list[list[int]]:
    n = len(mask)
    if mask.all():
        return [list(range(n))]
    start = int(np.flatnonzero(~mask)[0])
    runs, cur = [], []
    for t in range(1, n + 1):
        i = (start + t) % n
        if mask[i]:
            cur.append(i)
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return runs


def validate_labels(dd: DiscreteDomain) -> None:
    """Arcs C, A, B must follow a_eps, b_eps, c_eps as single contiguous runs."""
    if any(m not in dd.marked for m in "abc"):
        raise UnlabeledDomain("marked vertices missing")
    cyc = dd.oriented_principal()
    seq = [dd.edge_labels.get((int(i), int(k))) for i, k in cyc]
    if any(s is None for s in seq):
        raise UnlabeledDomain("principal cycle has unlabelled edges")
    compressed = [seq[0]]
    for s in seq[1:]:
        if s != compressed[-1]:
            compressed.append(s)
    if compressed != ["C", "A", "B"]:
        raise LabelingError(f"arc runs out of order along the principal cycle: {compressed}")
    starts = [dd.edge_key(tuple(e))[0] for e in cyc]
    b_at = starts[seq.index("A")]
    c_at = starts[seq.index("B")]
    if b_at != tuple(dd.marked["b"]) or c_at != tuple(dd.marked["c"]):
        raise LabelingError("marked vertices do not sit at the arc junctions")


def choose_probe_vertex(dd: DiscreteDomain, point) -> tuple[int, int]:
    """Vertex of arc A (endpoints included) nearest to a continuum probe point."""
    run = dd.arc_run("A")
    keys = [dd.edge_key(e)[0] for e in run] + [dd.edge_key(run[-1])[1]]
    pos = corner_positions(keys, dd.scale)
    d = np.hypot(*(pos - np.asarray(point, dtype=float)).T)
    order = sorted(range(len(keys)), key=lambda t: (round(d[t] / dd.scale.epsilon, 9), keys[t]))
    return keys[order[0]]


# ---------------------------------------------------------------------- sup-approximation
def sup_assemble(base: DiscreteDomain, trace: CurveTrace, strict: bool = True) -> DiscreteDomain:
    """Cut a lattice slit into a labelled domain; the slit tip becomes the new mark a.

    Both hexes of every interior trace edge lose their shared adjacency.  The
    side to the left of the trace (the one reached from arc B) is labelled B
    and the right side C; trace edges running along the existing boundary are
    relabelled the same way.  The principal component is the one next to
    c_eps, the target of the exploration.  The tip, b_eps and the probe must
    lie on its outer cycle, otherwise the slit has swallowed them.

    With ``strict=False`` swallowed marks are tolerated and the label order
    is not validated; the result is then only fit for inspecting the slit
    sides (no crossing events).
    """
    if not base.labeled:
        raise UnlabeledDomain("base domain must be labelled")
    if len(trace) == 0:
        return base
    if tuple(trace.start) != tuple(base.marked["a"]):
        raise NonCommensurate("slit does not start at a_eps")
    nbr = base.nbr.copy()
    labels = dict(base.edge_labels)
    for t, (L, R) in enumerate(zip(trace.left, trace.right)):
        inL, inR = base.contains_site(L), base.contains_site(R)
        if not inL and not inR:
            if t == 0:
                continue  # virtual first edge between two exterior hexes
            raise SlitEscapesDomain(f"trace edge {t} leaves the domain")
        k = DIRS.index((R[0] - L[0], R[1] - L[1]))
        if inL:
            i = base.index_of(L)
            nbr[i, k] = -1
            labels[(i, k)] = "B"
        if inR:
            j = base.index_of(R)
            nbr[j, (k + 3) % 6] = -1
            labels[(j, (k + 3) % 6)] = "C"
    # principal component: the one owning the hex just after c_eps (first edge of arc B)
    c_site = base.arc_run("B")[0][0]
    dd = _assemble(base.scale, base.sites, nbr, c_site)
    labels = {e: l for e, l in labels.items() if nbr[e[0], e[1]] < 0}
    marked = dict(base.marked)
    marked["a"] = tuple(trace.tip)
    out = dd.with_labels(labels, marked, probe_vertex=base.probe_vertex)
    if not strict:
        return out
    verts = {tuple(v) for v in out.cycle_vertices(out.principal_cycle)}
    for m in "abc":
        if tuple(marked[m]) not in verts:
            raise MarkSwallowed(f"mark {m} is not on the principal boundary after cutting the slit")
    if out.probe_vertex is not None and tuple(out.probe_vertex) not in verts:
        raise MarkSwallowed("probe vertex swallowed by the slit")
    validate_labels(out)
    return out
