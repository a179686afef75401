"""Named test domains, including two deliberately broken approximations.

Every builder returns a fresh :class:`ContinuousDomain` (or, for the broken
approximations, a discrete domain plus what is needed to audit it).  The
marks always run counterclockwise a, b, c, so arc A is the side from b to c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain_approx import ContinuousDomain, DiscreteDomain, Mark, canonical_approximation
from .geometry import Point, Polygon, Polyline
from .lattice import LatticeScale

SQRT3 = math.sqrt(3.0)


def _marks(a, b, c) -> dict:
    return {"a": Mark(Point(*a)), "b": Mark(Point(*b)), "c": Mark(Point(*c))}


def unit_square(probe=(1.0, 1.0)) -> ContinuousDomain:
    """Unit square with a, b, c at three corners and d at the fourth.

    With d at (1, 1) the Cardy event is the left-right blue crossing, whose
    probability is 1/2 by self-duality.
    """
    poly = Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    return ContinuousDomain(poly, [], _marks((0, 0), (1, 0), (0, 1)), (0.5, 0.5), Mark(Point(*probe)))


def rectangle(aspect: float, probe: bool = True) -> ContinuousDomain:
    """``aspect`` by 1 rectangle; the Cardy value at d is the left-right crossing probability."""
    w = float(aspect)
    poly = Polygon([(0, 0), (w, 0), (w, 1), (0, 1)])
    return ContinuousDomain(
        poly, [], _marks((0, 0), (w, 0), (0, 1)), (w / 2, 0.5), Mark(Point(w, 1.0)) if probe else None
    )


def equilateral_triangle(t: float = 0.5) -> ContinuousDomain:
    """Unit-side equilateral triangle; d sits a fraction ``t`` of the way from b to c.

    The identity is already the conformal map onto the reference triangle,
    so the Cardy value at d is exactly ``t``.
    """
    a, b, c = (0.0, 0.0), (1.0, 0.0), (0.5, SQRT3 / 2)
    d = (b[0] + t * (c[0] - b[0]), b[1] + t * (c[1] - b[1]))
    return ContinuousDomain(Polygon([a, b, c]), [], _marks(a, b, c), (0.5, SQRT3 / 6), Mark(Point(*d)))


def l_shape(probe=(2.0, 1.0)) -> ContinuousDomain:
    """L made of three unit squares: a at the inner corner's opposite, d on the right side."""
    poly = Polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])
    return ContinuousDomain(poly, [], _marks((0, 0), (2, 0), (0, 2)), (0.5, 0.5), Mark(Point(*probe)))


def pentagon() -> ContinuousDomain:
    """Irregular convex pentagon."""
    poly = Polygon([(0, 0), (2, 0), (2.5, 1), (1, 1.8), (-0.3, 1)])
    return ContinuousDomain(poly, [], _marks((0, 0), (2, 0), (1, 1.8)), (1, 0.8), Mark(Point(2.3, 0.6)))


def regular_polygon(n: int = 240, marks=(60, 140, 220), probe: Optional[int] = 180) -> ContinuousDomain:
    """Regular n-gon inscribed in the unit circle; marks and probe are vertex indices."""
    ang = 2 * np.pi * np.arange(n) / n
    pts = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    poly = Polygon(pts)
    m = _marks(*(tuple(pts[i]) for i in marks))
    d = Mark(Point(*pts[probe])) if probe is not None else None
    return ContinuousDomain(poly, [], m, (0.0, 0.0), d)


def hexagon() -> ContinuousDomain:
    ang = np.pi / 3 * np.arange(6)
    pts = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return ContinuousDomain(
        Polygon(pts), [], _marks(tuple(pts[3]), tuple(pts[5]), tuple(pts[1])), (0.0, 0.0), Mark(Point(*pts[0]))
    )


def slit_square(tip=(0.5, 0.5), probe=(1.0, 1.0)) -> ContinuousDomain:
    """Unit square with a vertical slit up from the bottom edge; a is the slit tip.

    Arc C runs from the tip down the slit's right side to b = (1, 0); arc B
    runs from c = (0, 1) down the left edge and up the slit's left side.
    """
    poly = Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])
    slit = Polyline([(tip[0], 0.0), tip])
    return ContinuousDomain(poly, [slit], _marks(tip, (1, 0), (0, 1)), (0.25, 0.75), Mark(Point(*probe)) if probe else None)


CONVEX = {
    "square": unit_square,
    "triangle": equilateral_triangle,
    "pentagon": pentagon,
    "hexagon": hexagon,
    "rectangle2": lambda: rectangle(2.0),
}

ALL = dict(CONVEX, l_shape=l_shape, slit_square=slit_square, polygon240=regular_polygon)


# ---------------------------------------------------------------------- broken approximations
def uncovered_interior(eps: float) -> tuple[DiscreteDomain, ContinuousDomain]:
    """Tiles of a notched square offered as an approximation of the plain square.

    The notch (0.4..0.6 by 0..0.5) is missing at every scale, so interior
    points such as (0.5, 0.25) stay uncovered while sitting a quarter unit
    from the square's boundary: condition (ii) fails.
    """
    notched = Polygon([(0, 0), (0.4, 0), (0.4, 0.5), (0.6, 0.5), (0.6, 0), (1, 0), (1, 1), (0, 1)])
    dom = ContinuousDomain(notched, [], _marks((0, 0), (1, 0), (0, 1)), (0.5, 0.75), Mark(Point(1.0, 1.0)))
    return canonical_approximation(dom, LatticeScale(eps)), unit_square()


@dataclass(frozen=True)
class CrisscrossCase:
    dd: DiscreteDomain
    run: list
    p: np.ndarray
    p2: np.ndarray
    delta: float


def crisscrossed_slit(eps: float) -> CrisscrossCase:
    """A slit square whose slit side carries alternating B and C labels.

    This imitates the two approximating sides of a slit crossing each other:
    along the side facing arc C, every third edge is labelled as the other
    side's arc.  The run handed to the well-organized check is that side,
    and the test points sit at a quarter and three quarters of the slit.
    """
    dom = slit_square()
    dd = canonical_approximation(dom, LatticeScale(eps))
    cyc = [(int(i), int(k)) for i, k in dd.oriented_principal()]
    mids = dd.edge_midpoints(cyc)
    # the slit's right side: C edges just right of x = 1/2, below the tip
    side = [e for e, m in zip(cyc, mids) if dd.edge_labels.get(e) == "C" and 0.5 < m[0] < 0.5 + eps and m[1] < 0.5]
    labels = dict(dd.edge_labels)
    for n, e in enumerate(side):
        if n % 3 == 1:
            labels[e] = "B"
    bad = dd.with_labels(labels)
    delta = 2 * eps
    return CrisscrossCase(bad, side, np.array([0.5, 0.4]), np.array([0.5, 0.1]), delta)


def leaked_label(eps: float, length: float = 0.3) -> tuple[DiscreteDomain, ContinuousDomain]:
    """Canonical unit-square approximation whose arc C runs on past b.

    The first ``length`` of arc A above b (the right side) is relabelled C,
    so the C run leaks past the mark and the surrogate of (iii) must fail.
    """
    dom = unit_square()
    dd = canonical_approximation(dom, LatticeScale(eps))
    run = dd.arc_run("A")
    mids = dd.edge_midpoints(run)
    labels = dict(dd.edge_labels)
    for e, m in zip(run, mids):
        if m[1] < length:
            labels[(int(e[0]), int(e[1]))] = "C"
    return dd.with_labels(labels), dom
