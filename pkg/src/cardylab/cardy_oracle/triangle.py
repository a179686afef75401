"""Conformal map of a marked slit polygon onto the equilateral triangle.

The map is a composition of three pieces:

1. the zipper sends the domain onto the upper half-plane;
2. a real Möbius map sends the images of b, c, a to 0, 1, infinity;
3. the Schwarz-Christoffel integral of t^(-2/3) (1-t)^(-2/3), scaled by the
   complete beta integral, sends the half-plane onto the triangle with
   corners 0, 1 and e^(i pi/3).  An affine step moves those corners to
   e^(-2 pi i/3) (b), 1 (c) and e^(2 pi i/3) (a).

On the side from b to c the last two steps reduce to the regularized
incomplete beta function I_x(1/3, 1/3), which is what the Cardy value reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import mpmath
import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import beta as beta_fn
from scipy.special import betainc

from ..domain_approx.continuous import ContinuousDomain
from .zipper import ZipperMap, zip_nodes

THIRD = 1.0 / 3.0
BETA_THIRDS = float(beta_fn(THIRD, THIRD))
VERTEX_A = complex(np.exp(2j * np.pi / 3))
VERTEX_B = complex(np.exp(-2j * np.pi / 3))
VERTEX_C = 1.0 + 0.0j
_ROT60 = complex(np.exp(1j * np.pi / 3))
_ROT120 = complex(np.exp(2j * np.pi / 3))


class NoConvergence(RuntimeError):
    def __init__(self, tol: float, iterations: int, residual: float):
        super().__init__(f"conformal map did not reach tol={tol:g} after {iterations} refinements (residual {residual:.3g})")
        self.tol = tol
        self.iterations = iterations
        self.residual = residual


class ProbeOffArc(ValueError):
    pass


@dataclass(frozen=True)
class CardyValue:
    value: float
    accuracy: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"Cardy value {self.value} is not a probability")

    def to_dict(self) -> dict:
        return {"value": self.value, "accuracy": self.accuracy}


# ---------------------------------------------------------------------- half-plane -> triangle
def _schwarz_real(x: np.ndarray) -> np.ndarray:
    """Standard triangle map at real arguments (limits from the upper half-plane)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, dtype=complex)
    neg = x < 0
    mid = (x >= 0) & (x <= 1)
    big = x > 1
    inf = ~np.isfinite(x)
    out[mid] = betainc(THIRD, THIRD, x[mid])
    xn = -x[neg & ~inf]
    out[neg & ~inf] = _ROT60 * betainc(THIRD, THIRD, xn / (1.0 + xn))
    xb = x[big & ~inf]
    out[big & ~inf] = 1.0 + _ROT120 * betainc(THIRD, THIRD, (xb - 1.0) / xb)
    out[inf] = _ROT60
    return out


def _schwarz_complex(w: complex) -> complex:
    z = mpmath.mpc(w.real, w.imag)
    val = 3 * mpmath.power(z, THIRD) * mpmath.hyp2f1(THIRD, 2 * THIRD, 4 * THIRD, z)
    return complex(val) / BETA_THIRDS


def schwarz_triangle(w) -> np.ndarray:
    """Map closed upper half-plane points onto the triangle with corners 0, 1, e^(i pi/3).

    0, 1 and infinity go to the corners 0, 1 and e^(i pi/3) respectively.
    """
    w = np.asarray(w, dtype=complex)
    flat = w.ravel()
    out = np.empty(flat.shape, dtype=complex)
    real = np.abs(flat.imag) <= 1e-15 * np.maximum(1.0, np.abs(flat.real))
    real |= ~np.isfinite(flat)
    out[real] = _schwarz_real(np.where(np.isfinite(flat[real]), flat[real].real, np.inf))
    for i in np.flatnonzero(~real):
        out[i] = _schwarz_complex(complex(flat[i]))
    return out.reshape(w.shape)


def to_target(s: np.ndarray) -> np.ndarray:
    """Affine move of the standard triangle onto the one with corners 1, e^(+-2 pi i/3)."""
    return VERTEX_B + np.asarray(s) * (VERTEX_C - VERTEX_B)


def barycentric(points) -> np.ndarray:
    """Barycentric coordinates (weights of a, b, c corners) of points in the target triangle."""
    p = np.asarray(points, dtype=complex)
    u = (2.0 * p.real + 1.0) / 3.0  # weight of c = 1
    # weights of a and b from the imaginary part: Im = (sqrt3/2)(w_a - w_b)
    diff = p.imag / (np.sqrt(3) / 2)
    rest = 1.0 - u
    wa = (rest + diff) / 2.0
    wb = (rest - diff) / 2.0
    return np.stack([wa, wb, u], axis=-1)


# ---------------------------------------------------------------------- node layout
@dataclass(frozen=True)
class _Layout:
    params: np.ndarray  # traversal parameter of each node
    points: np.ndarray  # complex coordinates
    twin: np.ndarray  # index of the earlier visit of the same slit point, or -1
    index: dict = field(default_factory=dict)  # breakpoint parameter -> node index


def _mirror(tr, i: int) -> Optional[int]:
    """Traversal segment that walks segment ``i`` backwards (the other side of a slit)."""
    hit = np.flatnonzero(
        (np.abs(tr.seg_a - tr.seg_b[i]).max(axis=1) == 0) & (np.abs(tr.seg_b - tr.seg_a[i]).max(axis=1) == 0)
    )
    return int(hit[0]) if len(hit) else None


def _layout(dom: ContinuousDomain, n: int, extra_params: Sequence[float] = ()) -> _Layout:
    tr = dom.traversal
    L = tr.total
    brk = [float(s) for s in tr.start]
    special = [dom.mark_params[m] for m in ("a", "b", "c")]
    if dom.probe_param is not None:
        special.append(dom.probe_param)
    special.extend(float(t) % L for t in extra_params)
    for t in special:
        brk.append(t)
        i = int(np.searchsorted(tr.start, t, side="right") - 1)
        if tr.slit[i] >= 0:
            j = _mirror(tr, i)
            if j is not None:
                brk.append(float(tr.start[j] + tr.lengths[i] - (t - tr.start[i])))
    tol = dom.tol
    brk = np.array(sorted(brk))
    keep = np.concatenate([[True], np.diff(brk) > tol])
    brk = brk[keep]
    if L - brk[-1] <= tol and len(brk) > 1:
        brk = brk[:-1]
    ends = np.append(brk[1:], L + brk[0])
    lengths = ends - brk
    # node 0 sits in the middle of the longest stretch of the outer polygon
    seg_of = np.searchsorted(tr.start, brk, side="right") - 1
    outer_piece = tr.slit[seg_of] < 0
    cand = np.where(outer_piece, lengths, -1.0)
    k0 = int(np.argmax(cand))
    mid = brk[k0] + lengths[k0] / 2.0
    pieces = [(mid, ends[k0] - mid)]
    order = list(range(k0 + 1, len(brk))) + list(range(0, k0))
    pieces += [(brk[k], lengths[k]) for k in order]
    pieces.append((brk[k0], mid - brk[k0]))
    params = []
    index = {}
    # every piece gets a share proportional to n, so doubling n refines short pieces too
    floor = max(2, n // (4 * len(pieces)))
    for start, length in pieces:
        m = floor + int(math.ceil(n * length / L))
        j = np.arange(m)
        index[float(start % L)] = len(params)
        params.extend(start + length * (1.0 - np.cos(np.pi * j / m)) / 2.0)
    params = np.array(params) % L
    pts = np.array([complex(*tr.point_at(t)) for t in params])
    scale = dom.diameter
    key = np.round(np.stack([pts.real, pts.imag], axis=1) / (1e-9 * scale)).astype(np.int64)
    first: dict = {}
    twin = np.full(len(pts), -1, dtype=np.int64)
    for k, kk in enumerate(map(tuple, key)):
        if kk in first:
            if np.any(twin == first[kk]):
                raise ValueError("a boundary point is visited more than twice (branching slits)")
            twin[k] = first[kk]
            pts[k] = pts[first[kk]]
        else:
            first[kk] = k
    return _Layout(params, pts, twin, index)


# ---------------------------------------------------------------------- the map
@dataclass(frozen=True)
class TriangleMap:
    """Numerical conformal map of a marked domain onto the equilateral triangle.

    ``node_params`` and ``node_eta`` give the boundary correspondence: each
    boundary node's traversal parameter and its real image after the Möbius
    normalization (b -> 0, c -> 1, a -> infinity).
    """

    domain: ContinuousDomain
    zipper: ZipperMap
    node_params: np.ndarray
    node_eta: np.ndarray
    mark_eta: dict
    accuracy: float
    n_nodes: int
    _raw: tuple = field(repr=False, default=())  # (a, b, c) half-plane images before normalization

    def _normalize(self, w: np.ndarray) -> np.ndarray:
        a, b, c = self._raw
        return (w - b) * (c - a) / ((w - a) * (c - b))

    def eta(self, points) -> np.ndarray:
        """Normalized half-plane images of interior points given as (N, 2) or complex."""
        z = _as_complex(points)
        return self._normalize(self.zipper(z))

    def __call__(self, points) -> np.ndarray:
        """Images in the target triangle of interior points."""
        return to_target(schwarz_triangle(self.eta(points)))

    def u(self, points) -> np.ndarray:
        """Barycentric weight of the corner c at interior points."""
        return barycentric(self(points))[..., 2]

    @property
    def boundary_correspondence(self) -> tuple[np.ndarray, np.ndarray]:
        """Traversal parameters of the nodes (sorted) and their images on the triangle boundary."""
        order = np.argsort(self.node_params)
        return self.node_params[order], to_target(_schwarz_real(self.node_eta[order]))

    def boundary_eta(self, t: float) -> float:
        """Normalized image of the boundary point at traversal parameter ``t``.

        Exact at nodes; between nodes a monotone cubic in the parameter.
        """
        L = self.domain.traversal.total
        t = float(t) % L
        gap = np.abs(((self.node_params - t) + L / 2) % L - L / 2)
        k = int(np.argmin(gap))
        if gap[k] <= self.domain.tol:
            return float(self.node_eta[k])
        # walk the boundary from a, where the image runs from -inf up to +inf;
        # arctan makes that a bounded monotone function of the parameter
        ta = self.domain.mark_params["a"]
        rel = (self.node_params - ta) % L
        order = np.argsort(rel)
        r = np.append(rel[order], L)
        y = np.append(np.arctan(self.node_eta[order]), np.pi / 2)
        y[0] = -np.pi / 2  # the node at a itself
        keep = np.concatenate([[True], np.diff(r) > 0])
        interp = PchipInterpolator(r[keep], y[keep])
        return float(np.tan(interp((t - ta) % L)))


def _as_complex(points) -> np.ndarray:
    arr = np.asarray(points)
    if np.iscomplexobj(arr):
        return arr
    arr = np.asarray(arr, dtype=float)
    if arr.ndim >= 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(complex)


def _zip_domain(dom: ContinuousDomain, n: int, extra_params: Sequence[float] = ()) -> TriangleMap:
    lay = _layout(dom, n, extra_params)
    f, img, _ = zip_nodes(lay.points, complex(dom.z0.x, dom.z0.y), lay.twin)
    L = dom.traversal.total

    def node_of(t):
        gap = np.abs(((lay.params - t) + L / 2) % L - L / 2)
        k = int(np.argmin(gap))
        return k

    raw = tuple(float(img[node_of(dom.mark_params[m])]) for m in ("a", "b", "c"))
    a, b, c = raw
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = (img - b) * (c - a) / ((img - a) * (c - b))
    eta[0] = (c - a) / (c - b)  # node 0 sits at infinity
    eta[node_of(dom.mark_params["a"])] = np.inf
    mark_eta = {"a": np.inf, "b": 0.0, "c": 1.0}
    eta[node_of(dom.mark_params["b"])] = 0.0
    eta[node_of(dom.mark_params["c"])] = 1.0
    return TriangleMap(dom, f, lay.params, eta, mark_eta, np.nan, len(lay.params), raw)


def default_test_points(dom: ContinuousDomain, count: int = 24) -> np.ndarray:
    """Interior grid points kept away from the boundary (a tenth of the diameter or the deepest third)."""
    xmin, ymin, xmax, ymax = dom.outer.bbox()
    g = 41
    xs, ys = np.meshgrid(np.linspace(xmin, xmax, g), np.linspace(ymin, ymax, g))
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    pts = pts[dom.contains(pts)]
    depth = dom.boundary_distance(pts)
    cut = min(0.1 * dom.diameter, np.quantile(depth, 2.0 / 3.0))
    pts = pts[depth >= cut]
    idx = np.linspace(0, len(pts) - 1, min(count, len(pts))).round().astype(int)
    return pts[idx]


def build_triangle_map(
    dom: ContinuousDomain,
    tol: float = 1e-6,
    n_start: int = 512,
    max_nodes: int = 16384,
    extra_params: Sequence[float] = (),
    test_points: Optional[np.ndarray] = None,
) -> TriangleMap:
    """Conformal map onto the triangle, refined until two node counts agree within ``tol``.

    The residual compares the map built with ``n`` and ``2n`` nodes at the
    probe d (if any), at ``extra_params`` on the boundary and at interior
    test points.  The finer map is returned with that residual as its
    accuracy.
    """
    pts = default_test_points(dom) if test_points is None else np.asarray(test_points, dtype=float)
    bparams = [dom.probe_param] if dom.probe_param is not None else []
    bparams += [float(t) for t in extra_params]

    def sample(m: TriangleMap) -> np.ndarray:
        parts = [m(pts)] if len(pts) else []
        if bparams:
            parts.append(to_target(_schwarz_real(np.array([m.boundary_eta(t) for t in bparams]))))
        return np.concatenate(parts) if parts else np.zeros(0, complex)

    n = n_start
    prev = _zip_domain(dom, n, extra_params)
    prev_vals = sample(prev)
    it = 0
    residual = np.inf
    while 2 * n <= max_nodes:
        n *= 2
        it += 1
        cur = _zip_domain(dom, n, extra_params)
        vals = sample(cur)
        residual = float(np.max(np.abs(vals - prev_vals))) if len(vals) else 0.0
        if residual <= tol:
            return _with_accuracy(cur, residual)
        prev, prev_vals = cur, vals
    raise NoConvergence(tol, it, residual)


def _with_accuracy(m: TriangleMap, acc: float) -> TriangleMap:
    return TriangleMap(m.domain, m.zipper, m.node_params, m.node_eta, m.mark_eta, acc, m.n_nodes, m._raw)


def cardy_value(tmap: TriangleMap, d=None) -> CardyValue:
    """Cardy value at a point d of arc A: the weight of corner c in the image of d.

    ``d`` defaults to the domain's probe.  On arc A the weight equals the
    regularized incomplete beta function of the normalized image.
    """
    dom = tmap.domain
    if d is None:
        if dom.probe_param is None:
            raise ProbeOffArc("domain has no probe d and none was given")
        t = dom.probe_param
    else:
        from ..domain_approx.continuous import Mark
        from ..geometry import Point

        mark = d if isinstance(d, Mark) else Mark(Point(*d))
        try:
            t = dom.locate(mark)
        except ValueError as exc:
            raise ProbeOffArc(str(exc)) from None
        if dom.arc_at(t) != "A" and not dom._at_mark(t, ("b", "c")):
            raise ProbeOffArc(f"point {tuple(mark.point)} is not on arc A")
    x = tmap.boundary_eta(t)
    x = min(max(x, 0.0), 1.0)
    val = float(betainc(THIRD, THIRD, x))
    acc = tmap.accuracy if np.isfinite(tmap.accuracy) else np.nan
    return CardyValue(val, acc)
