"""Percolation exploration from a_eps toward c_eps.

The interface runs on tile edges with blue on its left.  Its state is the
pair of hexes sharing the current edge (``left`` blue, ``right`` yellow) and
the third hex at the head corner.  A corner key equals the sum of the axial
coordinates of its three hexes, and the hex across the next edge is
``third + kept - dropped``.

Hexes outside the domain take their colour from the boundary edge they share
with it: arc B is blue, arcs A and C are yellow.  The walk starts on the
virtual edge between the two outside hexes at a_eps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..domain_approx.discrete import DiscreteDomain, LabelingError, UnlabeledDomain, corner_positions
from ..lattice import DIRS, Color, Coloring
from ..rng import colors_for, check_seed
from ..trace import CurveTrace, StopReason

EXPLORE_STREAM = 0
COMPLETION_STREAM = 1


@dataclass(frozen=True)
class ExplorationResult:
    trace: CurveTrace
    revealed: dict  # (u, v) -> Color for interior sites the walk looked at
    coloring: Coloring  # revealed colours completed with independent fair coins


def _add(p, q):
    return (p[0] + q[0], p[1] + q[1])


def _sub(p, q):
    return (p[0] - q[0], p[1] - q[1])


def exterior_colors(dd: DiscreteDomain) -> dict:
    """Colour of each outside hex touching the principal boundary (None on conflict)."""
    out: dict = {}
    pm = dd.principal_mask
    for (i, k), lab in dd.edge_labels.items():
        if not pm[i] or dd.nbr[i, k] >= 0:
            continue
        s = (int(dd.sites[i, 0]) + DIRS[k][0], int(dd.sites[i, 1]) + DIRS[k][1])
        if dd.contains_site(s) and pm[dd.index_of(s)]:
            continue  # a cut edge: the other side is still in the domain
        c = Color.BLUE if lab == "B" else Color.YELLOW
        if s in out and out[s] is not c:
            out[s] = None
        else:
            out[s] = c
    return out


def start_state(dd: DiscreteDomain) -> tuple:
    """(left, right, third) hexes of the virtual first edge ending at a_eps."""
    cyc = dd.oriented_principal()
    first = (int(cyc[0][0]), int(cyc[0][1]))  # leaves a_eps, labelled C
    last = (int(cyc[-1][0]), int(cyc[-1][1]))  # arrives at a_eps, labelled B
    if first[0] != last[0] or (last[1] + 1) % 6 != first[1]:
        raise LabelingError("a_eps must be a corner with exactly one domain hex")
    h = (int(dd.sites[first[0], 0]), int(dd.sites[first[0], 1]))
    xb = _add(h, DIRS[last[1]])
    xc = _add(h, DIRS[first[1]])
    return xb, xc, h


def explore(
    dd: DiscreteDomain,
    seed: int,
    max_steps: Optional[int] = None,
    target_radius: Optional[float] = None,
    site_color: Optional[Callable[[tuple], Color]] = None,
) -> ExplorationResult:
    """Run the exploration until a step limit, the target neighbourhood, or a dead end.

    ``site_color`` overrides the fair coins (used for hand-checked fixtures).
    ``target_radius`` stops the walk once its head corner is within that
    distance of c_eps.
    """
    if not dd.labeled:
        raise UnlabeledDomain("exploration needs a labelled domain")
    if max_steps is None and target_radius is None:
        raise ValueError("give max_steps, target_radius, or both")
    seed = check_seed(seed)
    pm = dd.principal_mask
    ext = exterior_colors(dd)
    c_pos = corner_positions([dd.marked["c"]], dd.scale)[0]
    c_key = tuple(dd.marked["c"])
    revealed: dict = {}

    def interior(s) -> bool:
        return dd.contains_site(s) and bool(pm[dd.index_of(s)])

    def color(s):
        if interior(s):
            if s not in revealed:
                if site_color is not None:
                    revealed[s] = Color(site_color(s))
                else:
                    blue = colors_for(seed, EXPLORE_STREAM, np.array([s], dtype=np.int64))[0]
                    revealed[s] = Color.BLUE if blue else Color.YELLOW
            return revealed[s]
        return ext.get(s)

    left, right, third = start_state(dd)
    head = (left[0] + right[0] + third[0], left[1] + right[1] + third[1])
    lefts, rights, verts = [], [], [head]
    seen_edges = set()
    reason = StopReason.STEP_LIMIT
    steps = 0
    while True:
        if max_steps is not None and steps >= max_steps:
            reason = StopReason.STEP_LIMIT
            break
        if target_radius is not None and steps > 0:
            hp = corner_positions([head], dd.scale)[0]
            if np.hypot(*(hp - c_pos)) <= target_radius:
                reason = StopReason.REACHED_TARGET
                break
        col = color(third)
        if col is None:
            reason = StopReason.REACHED_TARGET if head == c_key else StopReason.TRAPPED
            break
        if col is Color.BLUE:
            new_left, new_right, dropped = third, right, left
        else:
            new_left, new_right, dropped = left, third, right
        if not interior(new_left) and not interior(new_right):
            # the walk would leave the domain: it has reached the far junction
            reason = StopReason.REACHED_TARGET if head == c_key else StopReason.TRAPPED
            break
        edge = frozenset((new_left, new_right))
        if edge in seen_edges:
            reason = StopReason.TRAPPED
            break
        seen_edges.add(edge)
        new_third = _sub(_add(new_left, new_right), dropped)
        left, right, third = new_left, new_right, new_third
        head = (left[0] + right[0] + third[0], left[1] + right[1] + third[1])
        lefts.append(left)
        rights.append(right)
        verts.append(head)
        steps += 1
    trace = CurveTrace(tuple(lefts), tuple(rights), tuple(verts), reason)
    fresh = colors_for(seed, COMPLETION_STREAM, dd.sites)
    for s, c in revealed.items():
        fresh[dd.index_of(s)] = c is Color.BLUE
    return ExplorationResult(trace, dict(revealed), Coloring(dd, fresh))


def slit_cardy_after_exploration(dd: DiscreteDomain, trace: CurveTrace, n: int, seed: int, workers=None):
    """Cardy estimate on the domain with the trace cut out and its tip as the new mark a.

    Colourings are fresh; the colours revealed by the exploration are not reused.
    """
    from ..domain_approx.discrete import sup_assemble
    from .estimate import estimate_cardy

    return estimate_cardy(sup_assemble(dd, trace), n, seed, workers)


def trace_side_runs(slit_dd: DiscreteDomain, trace: CurveTrace) -> dict:
    """Principal-cycle edges along each side of a cut trace, in cycle order.

    The left side carries label B and the right side C.  Each run is the
    stretch of the principal cycle from the first to the last edge that the
    side contributes, so boundary stretches the trace hugged stay inside it.
    """
    side: dict = {"B": set(), "C": set()}
    for L, R in zip(trace.left, trace.right):
        k = DIRS.index((R[0] - L[0], R[1] - L[1]))
        if slit_dd.contains_site(L):
            side["B"].add((slit_dd.index_of(L), k))
        if slit_dd.contains_site(R):
            side["C"].add((slit_dd.index_of(R), (k + 3) % 6))
    cyc = [(int(i), int(k)) for i, k in slit_dd.oriented_principal()]
    out = {}
    for lab, edges in side.items():
        pos = [t for t, e in enumerate(cyc) if e in edges]
        out[lab] = cyc[pos[0] : pos[-1] + 1] if pos else []
    return out


def well_organized_sides(slit_dd: DiscreteDomain, trace: CurveTrace, delta: Optional[float] = None) -> dict:
    """Well-organized test on both sides of a cut trace.

    The two test points sit at a quarter and three quarters of each side's
    run; ``delta`` defaults to two tile widths, shrunk when the run is too
    short to keep the two disks apart or winds back past the second point.
    Sides shorter than eight edges are reported as skipped (``None``).
    """
    from ..domain_approx.checks import check_well_organized

    res = {}
    for lab, run in trace_side_runs(slit_dd, trace).items():
        if len(run) < 8:
            res[lab] = None
            continue
        keys = [slit_dd.edge_key(e)[0] for e in run] + [slit_dd.edge_key(run[-1])[1]]
        vpos = corner_positions(keys, slit_dd.scale)
        p, p2 = vpos[len(run) // 4], vpos[(3 * len(run)) // 4]
        d = 2 * slit_dd.scale.epsilon if delta is None else delta
        d = min(d, 0.45 * float(np.hypot(*(p - p2))))
        # a winding run can come near p2 before p; smaller disks separate the visits
        while True:
            try:
                res[lab] = check_well_organized(slit_dd, run, p, p2, d)
                break
            except ValueError:
                if d < 0.25 * slit_dd.scale.circumradius:
                    raise
                d /= 2.0
    return res
