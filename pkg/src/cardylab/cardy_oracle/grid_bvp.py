"""Cardy values from a finite-element modulus computation, independent of the zipper.

The marked domain with probe d is a conformal quadrilateral with corners
b, d, c, a.  Its modulus is the Dirichlet energy of the harmonic function
equal to 0 on the boundary stretch from b to d, equal to 1 on arc B (c to a)
and free elsewhere.  The half-plane with corners 0, x, 1, infinity has
energy K(x) / K(1 - x), so solving for x and applying I_x(1/3, 1/3) gives
the Cardy value without any conformal map.

Energies from piecewise-linear elements converge like the mesh size (the
solution has square-root corners where the boundary condition switches), so
three meshes are combined by Richardson extrapolation.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve
from scipy.spatial import Delaunay
from scipy.special import betainc, ellipk

from ..domain_approx.continuous import ContinuousDomain
from .triangle import THIRD, CardyValue


GRADING_LEVELS = 12


class SlitNotSupported(ValueError):
    pass


def modulus_to_eta(energy: float) -> float:
    """Half-plane corner x with K(x)/K(1-x) equal to the given energy."""
    if energy == 1.0:
        return 0.5
    if energy > 1.0:
        return 1.0 - modulus_to_eta(1.0 / energy)
    return brentq(lambda x: ellipk(x) / ellipk(1.0 - x) - energy, 1e-300, 0.5, xtol=1e-300, rtol=1e-15)


def _mesh(dom: ContinuousDomain, h: float):
    tr = dom.traversal
    L = tr.total
    special = [dom.mark_params[m] for m in ("a", "b", "c")] + [dom.probe_param]
    brk = np.unique(np.concatenate([tr.start, special]))
    params = []
    for t0, t1 in zip(brk, np.append(brk[1:], L)):
        m = max(1, int(np.ceil((t1 - t0) / h)))
        params.extend(t0 + (t1 - t0) * np.arange(m) / m)
    # geometric refinement toward the four corners where the boundary condition switches
    radii = h * 0.6 ** np.arange(1, GRADING_LEVELS + 1)
    for t in special:
        params.extend(t + radii)
        params.extend(t - radii)
    params = np.unique(np.array(params) % L)
    bpts = np.array([tr.point_at(t) for t in params])
    xmin, ymin, xmax, ymax = dom.outer.bbox()
    # a triangular grid keeps element angles away from degenerate
    rows = np.arange(ymin, ymax + h, h * np.sqrt(3) / 2)
    grid = []
    for r, y in enumerate(rows):
        xs = np.arange(xmin + (h / 2 if r % 2 else 0.0), xmax + h, h)
        grid.append(np.stack([xs, np.full_like(xs, y)], axis=1))
    grid = np.vstack(grid)
    grid = grid[dom.contains(grid)]
    grid = grid[dom.boundary_distance(grid) > 0.5 * h]
    rings = []
    for t in special:
        p = tr.point_at(t)
        for r in radii:
            ang = np.linspace(0, 2 * np.pi, 12, endpoint=False)
            rings.append(p + r * np.stack([np.cos(ang), np.sin(ang)], axis=1))
    rings = np.vstack(rings)
    rings = rings[dom.contains(rings)]
    rings = rings[dom.boundary_distance(rings) > 0.1 * radii[-1]]
    pts = np.vstack([bpts, grid, rings])
    tri = Delaunay(pts).simplices
    cen = pts[tri].mean(axis=1)
    tri = tri[dom.contains(cen)]
    return pts, tri, params


def _energy(pts: np.ndarray, tri: np.ndarray, fixed: np.ndarray, values: np.ndarray) -> float:
    p = pts[tri]  # (T, 3, 2)
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    edges = np.stack([e0, e1, e2], axis=1)
    # stiffness K_ij = (e_i . e_j) / (4 * area)
    k = np.einsum("tik,tjk->tij", edges, edges) / (2.0 * np.abs(area2))[:, None, None]
    I = np.repeat(tri, 3, axis=1).ravel()
    J = np.tile(tri, (1, 3)).ravel()
    n = len(pts)
    K = coo_matrix((k.ravel(), (I, J)), shape=(n, n)).tocsr()
    free = ~fixed
    phi = np.zeros(n)
    phi[fixed] = values[fixed]
    rhs = -K[free][:, fixed] @ phi[fixed]
    phi[free] = spsolve(K[free][:, free].tocsc(), rhs)
    return float(phi @ (K @ phi))


def modulus_energy(dom: ContinuousDomain, h: float) -> float:
    """Dirichlet energy of the b-d / arc B modulus problem on a mesh of size ``h``."""
    if dom.slits:
        raise SlitNotSupported("the grid back end handles slit-free domains")
    if dom.probe_param is None:
        raise ValueError("the grid back end needs a probe d")
    pts, tri, params = _mesh(dom, h)
    L = dom.traversal.total
    mp = dom.mark_params
    nb = len(params)
    rel = (params - mp["b"]) % L
    zero = rel <= (dom.probe_param - mp["b"]) % L + dom.tol
    rel_c = (params - mp["c"]) % L
    one = rel_c <= (mp["a"] - mp["c"]) % L + dom.tol
    fixed = np.zeros(len(pts), dtype=bool)
    fixed[:nb] = zero | one
    values = np.zeros(len(pts))
    values[:nb][one] = 1.0
    return _energy(pts, tri, fixed, values)


def grid_cardy_value(dom: ContinuousDomain, h: float | None = None, levels: int = 3) -> CardyValue:
    """Cardy value at the probe from extrapolated modulus energies.

    ``h`` is the coarsest mesh size (default: diameter / 80); each further
    level halves it.  The accuracy is the change made by the last
    extrapolation step, mapped through to the Cardy value.
    """
    h = dom.diameter / 80.0 if h is None else float(h)
    hs = [h / 2 ** k for k in range(levels)]
    E = np.array([modulus_energy(dom, s) for s in hs])
    # first-order Richardson on successive pairs, then on the results
    R = E.copy()
    order = 1
    ests = [E[-1]]
    while len(R) > 1:
        R = (2 ** order * R[1:] - R[:-1]) / (2 ** order - 1)
        ests.append(R[-1])
        order += 1
    best = ests[-1]

    def cardy(en):
        return float(betainc(THIRD, THIRD, modulus_to_eta(en)))

    val = cardy(best)
    acc = abs(val - cardy(ests[-2])) if len(ests) > 1 else np.nan
    return CardyValue(min(max(val, 0.0), 1.0), acc)
