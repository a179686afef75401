"""Triangular-lattice sites rendered as hexagonal tiles, colorings and connectivity.

Sites carry axial coordinates ``(u, v)``.  With lattice spacing ``s`` the site
centre is ``s * (u + v/2, v*sqrt(3)/2)``.  Tiles are pointy-top regular
hexagons of circumradius ``R = s / sqrt(3)``; the lattice scale ``epsilon`` is
the tile diameter ``2R``, so ``s = epsilon * sqrt(3) / 2``.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .geometry import Polygon, winding_inside

SQRT3 = math.sqrt(3.0)

# axial offsets, direction k points at angle 60k degrees
DIRS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))
DIRS_ARR = np.array(DIRS, dtype=np.int64)


class LatticeError(ValueError):
    pass


class AnnulusOutsideDomain(LatticeError):
    pass


class Color(enum.IntEnum):
    YELLOW = 0
    BLUE = 1

    @property
    def other(self) -> "Color":
        return Color(1 - int(self))


@dataclass(frozen=True)
class SiteCoord:
    u: int
    v: int

    def __iter__(self):
        yield self.u
        yield self.v


@dataclass(frozen=True)
class LatticeScale:
    epsilon: float

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise LatticeError(f"lattice scale must be positive, got {self.epsilon}")

    @property
    def spacing(self) -> float:
        """Distance between neighbouring site centres."""
        return self.epsilon * SQRT3 / 2.0

    @property
    def circumradius(self) -> float:
        return self.epsilon / 2.0


def site_center(s, scale: LatticeScale) -> tuple[float, float]:
    u, v = s
    h = scale.spacing
    return (h * (u + 0.5 * v), h * (SQRT3 / 2.0) * v)


def site_centers(uv: np.ndarray, scale: LatticeScale) -> np.ndarray:
    uv = np.asarray(uv, dtype=float).reshape(-1, 2)
    h = scale.spacing
    return np.column_stack([h * (uv[:, 0] + 0.5 * uv[:, 1]), h * (SQRT3 / 2.0) * uv[:, 1]])


def nearest_site(x: float, y: float, scale: LatticeScale) -> tuple[int, int]:
    """Axial coordinate of the tile containing (x, y) (hex rounding)."""
    h = scale.spacing
    v = y / (h * SQRT3 / 2.0)
    u = x / h - 0.5 * v
    # cube rounding
    cx, cz = u, v
    cy = -cx - cz
    rx, ry, rz = round(cx), round(cy), round(cz)
    dx, dy, dz = abs(rx - cx), abs(ry - cy), abs(rz - cz)
    if dx > dy and dx > dz:
        rx = -ry - rz
    elif dy > dz:
        ry = -rx - rz
    else:
        rz = -rx - ry
    return int(rx), int(rz)


# corner j of a tile sits between directions j and j+1, at angle 60j + 30 degrees
_CORNER_ANG = np.deg2rad(60.0 * np.arange(6) + 30.0)
_CORNER_OFF = np.column_stack([np.cos(_CORNER_ANG), np.sin(_CORNER_ANG)])


def hex_vertices(s, scale: LatticeScale) -> np.ndarray:
    cx, cy = site_center(s, scale)
    return np.array([cx, cy]) + scale.circumradius * _CORNER_OFF


def hex_tile(s, scale: LatticeScale) -> Polygon:
    return Polygon(hex_vertices(s, scale))


def neighbors(s) -> list[SiteCoord]:
    u, v = s
    return [SiteCoord(u + du, v + dv) for du, dv in DIRS]


def corner_key(s, j: int) -> tuple[int, int]:
    """Integer key of tile corner j, in units of one third of the axial lattice."""
    u, v = s
    a = DIRS[j % 6]
    b = DIRS[(j + 1) % 6]
    return (3 * u + a[0] + b[0], 3 * v + a[1] + b[1])


def edge_corners(s, k: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Corners of the tile edge facing direction k, ordered counterclockwise about the tile."""
    return corner_key(s, k - 1), corner_key(s, k)


def corner_position(key, scale: LatticeScale) -> tuple[float, float]:
    u, v = key[0] / 3.0, key[1] / 3.0
    return site_center((u, v), scale)


def direction_between(a, b) -> int:
    d = (b[0] - a[0], b[1] - a[1])
    try:
        return DIRS.index(d)
    except ValueError:
        raise LatticeError(f"sites {a} and {b} are not adjacent") from None


class UnionFind:
    """Union-find with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


class Coloring:
    """Blue/yellow assignment to every site of a discrete domain.

    ``colors`` is a boolean array aligned with ``domain.sites`` (True = blue).
    """

    __slots__ = ("domain", "_blue")

    def __init__(self, domain, colors):
        blue = np.asarray(colors, dtype=bool).copy()
        if blue.shape != (domain.n_sites,):
            raise LatticeError("coloring must assign exactly one color to every site")
        blue.setflags(write=False)
        self.domain = domain
        self._blue = blue

    @classmethod
    def uniform(cls, domain, color: Color) -> "Coloring":
        return cls(domain, np.full(domain.n_sites, color == Color.BLUE))

    @classmethod
    def from_map(cls, domain, mapping) -> "Coloring":
        blue = np.zeros(domain.n_sites, dtype=bool)
        seen = np.zeros(domain.n_sites, dtype=bool)
        for s, c in mapping.items():
            i = domain.index_of(s)
            blue[i] = Color(c) == Color.BLUE
            seen[i] = True
        if not seen.all():
            raise LatticeError("coloring must assign exactly one color to every site")
        return cls(domain, blue)

    @property
    def blue(self) -> np.ndarray:
        return self._blue

    def color_at(self, s) -> Color:
        return Color.BLUE if self._blue[self.domain.index_of(s)] else Color.YELLOW

    def swapped(self) -> "Coloring":
        return Coloring(self.domain, ~self._blue)

    def mask(self, color: Color) -> np.ndarray:
        return self._blue if color == Color.BLUE else ~self._blue

    def with_site(self, i: int, color: Color) -> "Coloring":
        blue = self._blue.copy()
        blue[i] = color == Color.BLUE
        return Coloring(self.domain, blue)


def cluster_labels(nbr: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Component label per site (-1 where ``mask`` is False); labels are the minimum site index."""
    n = len(mask)
    uf = UnionFind(n)
    for i in np.flatnonzero(mask):
        for j in nbr[i]:
            if j > i and mask[j]:
                uf.union(int(i), int(j))
    labels = np.full(n, -1, dtype=np.int64)
    root_min: dict[int, int] = {}
    for i in np.flatnonzero(mask):
        r = uf.find(int(i))
        root_min.setdefault(r, int(i))
    for i in np.flatnonzero(mask):
        labels[i] = root_min[uf.find(int(i))]
    return labels


def clusters(c: Coloring, color: Color) -> list[frozenset]:
    """Connected monochromatic clusters as frozensets of SiteCoord, canonically ordered."""
    dom = c.domain
    labels = cluster_labels(dom.nbr, c.mask(color))
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        if lab >= 0:
            groups.setdefault(int(lab), []).append(i)
    out = []
    for lab in sorted(groups):
        out.append(frozenset(SiteCoord(int(dom.sites[i, 0]), int(dom.sites[i, 1])) for i in groups[lab]))
    return out


def flood(nbr: np.ndarray, sources: Iterable[int], passable: np.ndarray) -> np.ndarray:
    """Boolean reach set from ``sources`` through ``passable`` sites (sources must be passable)."""
    seen = np.zeros(len(passable), dtype=bool)
    q = deque()
    for s in sources:
        if passable[s] and not seen[s]:
            seen[s] = True
            q.append(s)
    while q:
        i = q.popleft()
        for j in nbr[i]:
            if j >= 0 and passable[j] and not seen[j]:
                seen[j] = True
                q.append(j)
    return seen


@dataclass(frozen=True)
class AnnulusSites:
    """Site classification for an annulus ``outer \\ inner`` intersected with a domain."""

    inner: np.ndarray  # sites with centres inside the inner polygon (separation sources)
    ring: np.ndarray  # sites with centres in the annular region
    targets: np.ndarray  # outside the outer polygon, or touching a non-assisting arc


def annulus_sites(domain, inner: Polygon, outer: Polygon, assist: Optional[Sequence[str]] = None) -> AnnulusSites:
    centers = domain.centers
    in_outer = winding_inside(centers, outer.array)
    in_inner = winding_inside(centers, inner.array)
    ring = in_outer & ~in_inner
    targets = ~in_outer
    if assist is not None:
        # only the listed arcs may close a circuit; touching any other arc counts as escaping
        others = [lab for lab in ("A", "B", "C") if lab not in assist]
        for lab in others:
            targets = targets | domain.touch_mask(lab)
    inner_sites = in_inner & ~targets
    if not ring.any() or not inner_sites.any():
        raise AnnulusOutsideDomain("annulus does not meet the domain")
    return AnnulusSites(inner_sites, ring, targets)


def circuit_in_annulus(
    c: Coloring,
    inner: Polygon,
    outer: Polygon,
    color: Color,
    assist: Optional[Sequence[str]] = None,
) -> bool:
    """True iff sites of ``color`` in the annular region separate ``inner`` from ``outer``.

    The domain boundary is impenetrable, so circuits may close up against it.
    ``assist`` restricts which labelled arcs may do so (default: all of them).
    """
    dom = c.domain
    ann = annulus_sites(dom, inner, outer, assist)
    blocked = ann.ring & c.mask(color)
    reach = flood(dom.nbr, np.flatnonzero(ann.inner), ~blocked)
    return not bool((reach & ann.targets).any())


def radial_crossing(
    c: Coloring,
    inner: Polygon,
    outer: Polygon,
    color: Color,
    assist: Optional[Sequence[str]] = None,
) -> bool:
    """True iff a path whose annulus sites all have ``color`` joins the inner region to a target."""
    dom = c.domain
    ann = annulus_sites(dom, inner, outer, assist)
    passable = ~ann.ring | c.mask(color)
    reach = flood(dom.nbr, np.flatnonzero(ann.inner), passable)
    return bool((reach & ann.targets).any())
