"""Crossing events on labelled discrete domains.

``U`` asks for a blue path joining arcs A and B that separates the probe from
C; ``V`` and ``W`` are the cyclic relabellings (B, C | A) and (C, A | B).  A
yellow spec asks the same question with the colours exchanged.

Probes are either sites (interior probes) or boundary vertices on the first
arc of the triple.  A path separating an interior probe cannot pass through
the probe's own hex, so that hex never counts as part of a crossing.  For a boundary vertex ``d`` on A the event is a blue path
from the part of A between b and d to B.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..domain_approx.discrete import DiscreteDomain, UnlabeledDomain
from ..lattice import Color, Coloring, SiteCoord, clusters, flood
from . import _kernels as K

# arcs (joined pair, separated arc) for each crossing function
TRIPLES = {"U": ("A", "B", "C"), "V": ("B", "C", "A"), "W": ("C", "A", "B")}


class ProbeError(ValueError):
    pass


@dataclass(frozen=True)
class CrossingSpec:
    """Which crossing function, which colour, and where it is probed.

    Exactly one of ``probe`` (a site of the principal component) and
    ``vertex`` (a corner key on the first arc of the triple) is set.
    """

    function: str = "U"
    color: Color = Color.BLUE
    probe: Optional[SiteCoord] = None
    vertex: Optional[tuple] = None

    def __post_init__(self):
        if self.function not in TRIPLES:
            raise ValueError(f"function must be U, V or W, got {self.function!r}")
        if (self.probe is None) == (self.vertex is None):
            raise ValueError("give exactly one of probe (site) or vertex (boundary)")

    def swapped(self) -> "CrossingSpec":
        return CrossingSpec(self.function, Color(self.color).other, self.probe, self.vertex)


@dataclass(frozen=True, eq=False)
class EventProblem:
    """Masks that turn a spec into one compiled kernel call per replica."""

    mode: int
    flip: bool
    src: np.ndarray
    tgt: np.ndarray
    third: np.ndarray
    probe: int


def event_problem(dd: DiscreteDomain, spec: CrossingSpec) -> EventProblem:
    if not dd.labeled:
        raise UnlabeledDomain("crossing events need a labelled domain")
    x, y, z = TRIPLES[spec.function]
    flip = Color(spec.color) == Color.YELLOW
    tgt = dd.touch_mask(y)
    third = dd.touch_mask(z)
    if spec.vertex is not None:
        before, _after = dd.probe_split(x, spec.vertex)
        src = dd.edges_touch_mask(before)
        return EventProblem(K.BOUNDARY, flip, src, tgt, third, -1)
    i = dd.index_of(spec.probe)
    if not dd.principal_mask[i]:
        raise ProbeError("probe is not in the principal component")
    return EventProblem(K.INTERIOR, flip, dd.touch_mask(x), tgt, third, i)


def _scratch(n: int):
    return (
        np.zeros(n, dtype=np.int64),
        np.empty(max(n, 1), dtype=np.int64),
        np.zeros(n, dtype=np.bool_),
        np.empty(max(n, 1), dtype=np.int64),
    )


def evaluate(dd: DiscreteDomain, prob: EventProblem, blue: np.ndarray) -> bool:
    """One compiled evaluation of a prepared event on an explicit blue mask."""
    b = np.asarray(blue, dtype=np.bool_) != prob.flip
    seen, stack, removed, members = _scratch(dd.n_sites)
    if prob.mode == K.BOUNDARY:
        return bool(K.boundary_event(b, dd.nbr, prob.src, prob.tgt, seen, stack, 1))
    return bool(K.interior_event(b, dd.nbr, prob.src, prob.tgt, prob.third, prob.probe, seen, stack, removed, members, 1))


def crossing_event(col: Coloring, dd: DiscreteDomain, spec: CrossingSpec) -> bool:
    """Does the crossing event of ``spec`` hold in this colouring?"""
    return evaluate(dd, event_problem(dd, spec), col.blue)


# ---------------------------------------------------------------------- reference oracles
def crossing_event_direct(col: Coloring, dd: DiscreteDomain, spec: CrossingSpec) -> bool:
    """Cluster-by-cluster oracle in plain Python (no compiled code, no union of clusters).

    For interior probes: with the probe's hex taken out of the spec colour,
    some single cluster touches both joined arcs and blocks every route from
    the probe to the separated arc.  For boundary vertices: some cluster touches
    the first part of the split arc and the joined arc.
    """
    prob = event_problem(dd, spec)
    color = Color(spec.color)
    if prob.mode == K.INTERIOR:
        blue = col.blue.copy()
        blue[prob.probe] = color is Color.YELLOW
        col = Coloring(dd, blue)
    idx = {s: i for i, s in enumerate(SiteCoord(int(u), int(v)) for u, v in dd.sites)}
    for cl in clusters(col, color):
        members = np.array(sorted(idx[s] for s in cl))
        if not (prob.src[members].any() and prob.tgt[members].any()):
            continue
        if prob.mode == K.BOUNDARY:
            return True
        passable = np.ones(dd.n_sites, dtype=bool)
        passable[members] = False
        reach = flood(dd.nbr, [prob.probe], passable)
        if not (reach & prob.third).any():
            return True
    return False


def boundary_event_dual(col: Coloring, dd: DiscreteDomain, spec: CrossingSpec) -> Optional[bool]:
    """Boundary-vertex event through the opposite colour.

    The four boundary pieces (first part of the split arc, joined arc, second
    part, separated arc) carry exactly one of: a spec-colour crossing between
    the first two, or an opposite-colour crossing between the last two.
    Returns None when the vertex sits at an end of its arc (the four-piece
    picture degenerates there).
    """
    if spec.vertex is None:
        raise ProbeError("dual form applies to boundary vertices")
    x, _y, z = TRIPLES[spec.function]
    before, after = dd.probe_split(x, spec.vertex)
    if not before or not after:
        return None
    # the hex owning the last edge before the vertex also borders the second
    # part: when it is not of the spec colour it can start the dual crossing
    src = dd.edges_touch_mask(after) | dd.edges_touch_mask(before[-1:])
    tgt = dd.touch_mask(z)
    other = col.mask(Color(spec.color).other)
    reach = flood(dd.nbr, np.flatnonzero(src & other), other)
    return not bool((reach & tgt).any())
