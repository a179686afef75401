"""Auditable convergence and labelling conditions for discrete approximations."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..geometry import Polyline, frechet_distance, points_to_segments, winding_inside
from ..lattice import flood, nearest_site, site_centers
from .continuous import ContinuousDomain
from .discrete import (
    AFTER,
    BEFORE,
    DiscreteDomain,
    DomainApproxError,
    LabelingError,
    UnlabeledDomain,
    candidate_sites,
    corner_positions,
    default_delta,
    tiles_inside,
    validate_labels,
)


class InsufficientSequence(DomainApproxError):
    pass


class NoConnector(DomainApproxError):
    pass


class PathNotFound(DomainApproxError):
    pass


@dataclass(frozen=True)
class ConditionResult:
    passed: bool
    witness: Optional[dict] = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "witness": self.witness}


@dataclass
class ApproxReport:
    conditions: dict = field(default_factory=dict)
    eta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.conditions.items() if not c.passed]

    def to_dict(self) -> dict:
        return {"conditions": {k: v.to_dict() for k, v in self.conditions.items()}, "eta": dict(self.eta)}


def _pt(p) -> list:
    return [float(p[0]), float(p[1])]


# ---------------------------------------------------------------------- probes
def probe_grid(dom: ContinuousDomain, n: int = 24, margin: float = 0.25) -> dict:
    """Interior, exterior and boundary sample points on a regular grid around the domain."""
    xmin, ymin, xmax, ymax = dom.outer.bbox()
    w, h = xmax - xmin, ymax - ymin
    xs = np.linspace(xmin - margin * w, xmax + margin * w, n)
    ys = np.linspace(ymin - margin * h, ymax + margin * h, n)
    pts = np.array([(x, y) for x in xs for y in ys])
    inside = dom.contains(pts)
    tr = dom.traversal
    t = np.linspace(0.0, tr.total, 4 * n, endpoint=False)
    boundary = np.array([tr.point_at(s) for s in t])
    return {"interior": pts[inside], "exterior": pts[~inside], "boundary": boundary}


def covered(dd: DiscreteDomain, pts: np.ndarray) -> np.ndarray:
    out = np.zeros(len(pts), dtype=bool)
    for i, p in enumerate(pts):
        out[i] = dd.contains_site(nearest_site(p[0], p[1], dd.scale))
    return out


def complement_distance(dd: DiscreteDomain, pts: np.ndarray) -> np.ndarray:
    """Distance from each point to the complement of the union of tiles."""
    cov = covered(dd, pts)
    out = np.zeros(len(pts))
    if cov.any():
        e = dd.boundary_edges
        s = dd.sites[e[:, 0]]
        from .discrete import corner_keys

        a = corner_positions(corner_keys(s, e[:, 1] - 1), dd.scale)
        b = corner_positions(corner_keys(s, e[:, 1]), dd.scale)
        d, _ = points_to_segments(pts[cov], a, b)
        out[cov] = d.min(axis=1)
    return out


def _eventually(flags: np.ndarray) -> bool:
    """True on the later half of the sequence (at least the last two entries).

    Coverage is not monotone in the scale, so an early True followed by a
    False is allowed as long as the tail settles.
    """
    tail = max(2, len(flags) // 2)
    return bool(flags[-tail:].all())


# ---------------------------------------------------------------------- kernel convergence
def check_kernel_convergence(
    seq: Sequence[DiscreteDomain], dom: ContinuousDomain, probes: Optional[dict] = None
) -> ApproxReport:
    """Conditions (i_I), (i_II) and (e) on a sequence ordered by decreasing scale.

    ``probes`` maps ``interior`` / ``exterior`` / ``boundary`` to point arrays
    (default: :func:`probe_grid`).  The tolerance is two tiles of the finest
    scale.
    """
    if len(seq) < 3:
        raise InsufficientSequence("need at least three discrete domains")
    eps = [d.scale.epsilon for d in seq]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("sequence must be ordered by decreasing scale")
    probes = probe_grid(dom) if probes is None else probes
    tol = 2.0 * eps[-1]
    rep = ApproxReport()

    inner = np.asarray(probes.get("interior", np.zeros((0, 2)))).reshape(-1, 2)
    # points closer to the boundary than the resolution cannot be expected to be covered
    inner = inner[dom.boundary_distance(inner) > tol] if len(inner) else inner
    cov = np.array([covered(d, inner) for d in seq]).reshape(len(seq), -1)
    bad = [i for i in range(len(inner)) if not _eventually(cov[:, i])]
    rep.conditions["i_I"] = ConditionResult(
        not bad, None if not bad else {"point": _pt(inner[bad[0]]), "covered": cov[:, bad[0]].tolist()}
    )

    # complement points of late domains must not sit deep inside the continuum domain
    witness = None
    for n in range(len(seq) // 2, len(seq)):
        d = seq[n]
        cand = candidate_sites(dom.outer.bbox(), d.scale)
        present = np.array([d.contains_site(s) for s in cand])
        comp = site_centers(cand[~present], d.scale)
        inside = dom.contains(comp)
        depth = np.zeros(len(comp))
        depth[inside] = dom.boundary_distance(comp[inside])
        if len(depth) and depth.max() > tol:
            j = int(np.argmax(depth))
            witness = {"index": n, "point": _pt(comp[j]), "depth": float(depth[j])}
            break
    rep.conditions["i_II"] = ConditionResult(witness is None, witness)

    outer = np.concatenate(
        [np.asarray(probes.get(k, np.zeros((0, 2)))).reshape(-1, 2) for k in ("exterior", "boundary")]
    )
    near = np.array([complement_distance(d, outer) <= tol for d in seq]).reshape(len(seq), -1)
    bad = [i for i in range(len(outer)) if not _eventually(near[:, i])]
    rep.conditions["e"] = ConditionResult(
        not bad, None if not bad else {"point": _pt(outer[bad[0]]), "near": near[:, bad[0]].tolist()}
    )
    return rep


# ---------------------------------------------------------------------- single-scale audit
def arc_polyline_discrete(dd: DiscreteDomain, label: str) -> np.ndarray:
    run = dd.arc_run(label)
    keys = [dd.edge_key(e)[0] for e in run] + [dd.edge_key(run[-1])[1]]
    return corner_positions(keys, dd.scale)


def check_interior_conditions(
    dd: DiscreteDomain,
    dom: ContinuousDomain,
    delta: Optional[float] = None,
    probes: Optional[np.ndarray] = None,
) -> ApproxReport:
    """Conditions (i), (ii) and the conformal-free surrogate of (iii) at one scale.

    (iii) checks that every principal-cycle edge away from the marks carries
    its nearest continuum arc, that edges near a mark carry one of the two
    arcs meeting there, and that the three arcs form contiguous runs in
    order.  ``eta`` holds the curve distance from each discrete arc to its
    continuum arc.
    """
    eps = dd.scale.epsilon
    delta = default_delta(eps) if delta is None else delta
    rep = ApproxReport()

    ok = tiles_inside(dom, dd.sites, dd.scale)
    bad = np.flatnonzero(~ok)
    rep.conditions["i"] = ConditionResult(
        len(bad) == 0, None if len(bad) == 0 else {"site": dd.sites[bad[0]].tolist()}
    )

    pts = probe_grid(dom)["interior"] if probes is None else np.asarray(probes).reshape(-1, 2)
    deep = pts[dom.boundary_distance(pts) > eps] if len(pts) else pts
    cov = covered(dd, deep) if len(deep) else np.zeros(0, dtype=bool)
    miss = np.flatnonzero(~cov)
    rep.conditions["ii"] = ConditionResult(len(miss) == 0, None if len(miss) == 0 else {"point": _pt(deep[miss[0]])})

    rep.conditions["iii"] = _check_labels(dd, dom, delta)
    if rep.conditions["iii"].passed:
        for lab in "ABC":
            disc = arc_polyline_discrete(dd, lab)
            cont = dom.arc_polyline(lab)
            rep.eta[lab] = frechet_distance(Polyline(_dedupe(disc)), Polyline(_dedupe(cont)), step=eps / 4)
    return rep


def _dedupe(arr: np.ndarray) -> np.ndarray:
    keep = np.ones(len(arr), dtype=bool)
    keep[1:] = np.any(np.abs(np.diff(arr, axis=0)) > 1e-15, axis=1)
    arr = arr[keep]
    if len(arr) == 1:
        arr = np.vstack([arr, arr + 1e-12])
    return arr


def _check_labels(dd: DiscreteDomain, dom: ContinuousDomain, delta: float) -> ConditionResult:
    if not dd.labeled:
        return ConditionResult(False, {"reason": "unlabelled"})
    # edge-by-edge first, so that a failure names a concrete edge
    cyc = dd.cycles[dd.principal_cycle]
    mids = dd.edge_midpoints(cyc)
    params, _ = dom.nearest_boundary(mids)
    arcs = dom.arc_at(params)
    marks = np.array([dom.mark_point(m) for m in "abc"])
    dist = np.hypot(*(mids[:, None, :] - marks[None]).transpose(2, 0, 1))
    for t, e in enumerate(cyc):
        lab = dd.edge_labels.get((int(e[0]), int(e[1])))
        m = int(np.argmin(dist[t]))
        if dist[t, m] < delta:
            # at coarse scales the disk around a mark can reach an unrelated arc,
            # so the nearest continuum arc stays acceptable there as well
            allowed = {BEFORE["abc"[m]], AFTER["abc"[m]], str(arcs[t])}
            if lab not in allowed:
                return ConditionResult(
                    False, {"edge": [int(e[0]), int(e[1])], "label": lab, "allowed": sorted(allowed), "midpoint": _pt(mids[t])}
                )
        elif lab != str(arcs[t]):
            return ConditionResult(
                False, {"edge": [int(e[0]), int(e[1])], "label": lab, "nearest_arc": str(arcs[t]), "midpoint": _pt(mids[t])}
            )
    try:
        validate_labels(dd)
    except (LabelingError, UnlabeledDomain) as exc:
        return ConditionResult(False, {"reason": str(exc), "marked": {k: list(v) for k, v in dd.marked.items()}})
    return ConditionResult(True)


# ---------------------------------------------------------------------- well-organized sides
def check_well_organized(
    dd: DiscreteDomain, run: Sequence, p, p2, delta: float
) -> tuple[bool, Optional[dict]]:
    """Monochrome test for the region between a boundary run and a connector inside the domain.

    ``run`` is a list of principal-cycle edges in cycle order (for example one
    side of a slit).  The curve piece between its last exit from the disk of
    radius ``delta`` around ``p`` and its first entry into the disk around
    ``p2`` is joined back by a chain of domain sites that own its edges.  Sites
    reached from that chain inside the enclosed region (away from the disks)
    must only see boundary edges of a single label.
    """
    run = [(int(i), int(k)) for i, k in run]
    if not run:
        raise ValueError("empty run")
    p, p2 = np.asarray(p, float), np.asarray(p2, float)
    if np.hypot(*(p - p2)) <= 2 * delta:
        raise ValueError("the two disks must be disjoint")
    keys = [dd.edge_key(e)[0] for e in run] + [dd.edge_key(run[-1])[1]]
    vpos = corner_positions(keys, dd.scale)
    in_p = np.hypot(*(vpos - p).T) <= delta
    in_p2 = np.hypot(*(vpos - p2).T) <= delta
    if not in_p.any() or not in_p2.any():
        raise ValueError("both points must lie near the run")
    i1 = int(np.argmax(in_p2))
    before = np.flatnonzero(in_p[:i1])
    if len(before) == 0:
        raise ValueError("the run must pass p before p2")
    i0 = int(before[-1])
    piece = run[i0:i1]
    if not piece:
        return True, None
    # connector: owners of the piece's edges, gaps filled by shortest paths in the domain
    owners = []
    for i, _k in piece:
        if not owners or owners[-1] != i:
            owners.append(i)
    chain = [owners[0]]
    for nxt in owners[1:]:
        path = _bfs_path(dd.nbr, chain[-1], nxt)
        if path is None:
            raise NoConnector("no path inside the domain joins consecutive owners")
        chain.extend(path[1:])
    ring = np.vstack([vpos[i0 : i1 + 1], dd.centers[chain][::-1]])
    centers = dd.centers
    inside = winding_inside(centers, ring)
    region = inside.copy()
    region[chain] = True
    disk = (np.hypot(*(centers - p).T) <= delta) | (np.hypot(*(centers - p2).T) <= delta)
    region &= ~disk
    reach = flood(dd.nbr, [c for c in chain if region[c]], region)
    # labels seen: the piece itself plus region boundary edges strictly inside the ring
    seen: dict = {}
    for e in piece:
        seen.setdefault(dd.edge_labels.get(e), e)
    idx = np.flatnonzero(reach)
    cand = [(int(i), k) for i in idx for k in range(6) if dd.nbr[i, k] < 0]
    if cand:
        mids = dd.edge_midpoints(cand)
        strict = winding_inside(mids, ring)
        dist_ring, _ = points_to_segments(mids, ring, np.roll(ring, -1, axis=0))
        strict &= dist_ring.min(axis=1) > 1e-9 * dd.scale.epsilon
        for e, s in zip(cand, strict):
            if s:
                seen.setdefault(dd.edge_labels.get(e), e)
    if len(seen) <= 1:
        return True, None
    labs = sorted(seen, key=str)
    return False, {"edges": [list(seen[labs[0]]), list(seen[labs[1]])], "labels": [labs[0], labs[1]]}


def _bfs_path(nbr: np.ndarray, s: int, t: int) -> Optional[list]:
    prev = {s: -1}
    q = deque([s])
    while q:
        i = q.popleft()
        if i == t:
            path = [t]
            while prev[path[-1]] != -1:
                path.append(prev[path[-1]])
            return path[::-1]
        for j in nbr[i]:
            j = int(j)
            if j >= 0 and j not in prev:
                prev[j] = i
                q.append(j)
    return None


# ---------------------------------------------------------------------- homotopical consistency
def check_homotopical_consistency(
    dd: DiscreteDomain, dom: ContinuousDomain, q, Delta: float, delta_star: float
) -> tuple[bool, Optional[dict]]:
    """Bottom-component test near arc C.

    A band of sites at distance between ``2*delta_star`` and
    ``2*delta_star + 2*spacing`` from the discrete arc C, outside the
    ``Delta``-disks around a and b, cuts the principal component.  Starting
    from ``q``, a flood that avoids the band and the disks may only meet
    boundary edges labelled C.
    """
    if Delta < 10 * delta_star:
        raise ValueError("Delta must be at least ten times delta_star")
    q = np.asarray(q, float)
    a, b = dom.mark_point("a"), dom.mark_point("b")
    if min(np.hypot(*(q - a)), np.hypot(*(q - b))) <= Delta:
        raise ValueError("q must be farther than Delta from a and b")
    cpoly = dom.arc_polyline("C")
    dq, _ = points_to_segments(q[None], cpoly[:-1], cpoly[1:])
    if dq.min() > delta_star:
        raise ValueError("q must lie within delta_star of arc C")
    if not dd.labeled:
        raise UnlabeledDomain("labelled domain required")
    c_edges = dd.arc_run("C")
    from .discrete import corner_keys

    e = np.array(c_edges)
    s = dd.sites[e[:, 0]]
    ea = corner_positions(corner_keys(s, e[:, 1] - 1), dd.scale)
    eb = corner_positions(corner_keys(s, e[:, 1]), dd.scale)
    centers = dd.centers
    dist, _ = points_to_segments(centers, ea, eb)
    dc = dist.min(axis=1)
    lo, hi = 2 * delta_star, 2 * delta_star + 2 * dd.scale.spacing
    pm = dd.principal_mask
    disks = (np.hypot(*(centers - a).T) <= Delta) | (np.hypot(*(centers - b).T) <= Delta)
    band = pm & (dc >= lo) & (dc <= hi) & ~disks
    # the band must join the two disks: sites of the band touching each disk's rim
    rim = pm & ~disks & (
        (np.abs(np.hypot(*(centers - a).T) - Delta) <= 2 * dd.scale.spacing)
        | (np.abs(np.hypot(*(centers - b).T) - Delta) <= 2 * dd.scale.spacing)
    )
    near_a = band & rim & (np.hypot(*(centers - a).T) <= Delta + 2 * dd.scale.spacing)
    near_b = band & rim & (np.hypot(*(centers - b).T) <= Delta + 2 * dd.scale.spacing)
    if not near_a.any() or not near_b.any() or not (flood(dd.nbr, np.flatnonzero(near_a), band) & near_b).any():
        raise PathNotFound("no band path joins the neighbourhoods of a and b")
    u, v = nearest_site(q[0], q[1], dd.scale)
    if not dd.contains_site((u, v)):
        # q sits in the boundary layer: start from the nearest principal site
        j = int(np.argmin(np.where(pm, np.hypot(*(centers - q).T), np.inf)))
    else:
        j = dd.index_of((u, v))
    passable = pm & ~band & ~disks
    if not passable[j]:
        raise ValueError("q is not in the bottom part")
    reach = flood(dd.nbr, [j], passable)
    for i in np.flatnonzero(reach):
        for k in range(6):
            if dd.nbr[i, k] < 0:
                lab = dd.edge_labels.get((int(i), k))
                if lab != "C":
                    return False, {"edge": [int(i), k], "label": lab, "midpoint": _pt(dd.edge_midpoints([(int(i), k)])[0])}
    return True, None
