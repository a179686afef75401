"""Geodesic zipper: conformal map of a simply connected polygonal domain onto the upper half-plane.

Boundary nodes ``z_0, ..., z_n`` are listed counterclockwise.  The first map
sends ``z_1`` to 0 and ``z_0`` to infinity; each following elementary map
opens the circular arc from 0 to the current image of the next node onto
the real line.  A last Möbius-and-square step unfolds the remaining arc.

Two-sided slits list every slit point twice.  The second visit is a *copy*
of the first: it carries the same coordinates, and when its twin is zipped
the copy is placed on the other side of 0.  By the time the walk reaches the
copies they already sit on the real line, so those steps are plain shifts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ELEMENTARY = 0
SHIFT = 1


def _sqrt_up(w: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Square root in the closed upper half-plane; real results take the sign of Re(ref), zero counting as negative."""
    s = np.sqrt(w)
    flip = (s.imag < 0) | ((np.abs(s.imag) <= 1e-14 * np.abs(s)) & (ref.real <= 0))
    return np.where(flip, -s, s)


def _first_map(z: np.ndarray, z0: complex, z1: complex) -> np.ndarray:
    return 1j * np.sqrt((z - z1) / (z - z0))


def _elementary(z: np.ndarray, c: float, d: float) -> np.ndarray:
    t = z / (1.0 - z / c) if np.isfinite(c) else z
    return _sqrt_up(t * t + d * d, t)


def _step(z: np.ndarray, kind: int, c: float, d: float) -> np.ndarray:
    if kind == SHIFT:
        return z - c
    return _elementary(z, c, d)


def _step_inf(zeta: complex, kind: int, c: float, d: float) -> complex:
    """Image of the tracked point at ``zeta`` (possibly infinite) under one step."""
    if np.isfinite(zeta):
        return complex(_step(np.array([zeta], dtype=complex), kind, c, d)[0])
    if kind == SHIFT or not np.isfinite(c):
        return complex(np.inf)
    r = np.sqrt(c * c + d * d)
    return complex(r if -c > 0 else -r)


def _final(w: np.ndarray, zeta0: complex) -> np.ndarray:
    m = w / (1.0 - w / zeta0) if np.isfinite(zeta0) else w
    return m * m


@dataclass(frozen=True)
class ZipperMap:
    """Composition of the zipper steps; calling it maps interior points into the upper half-plane."""

    z0: complex
    z1: complex
    kinds: np.ndarray
    cs: np.ndarray
    ds: np.ndarray
    zeta0: complex
    sign: float

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        w = _first_map(z.ravel(), self.z0, self.z1)
        for kind, c, d in zip(self.kinds, self.cs, self.ds):
            w = _step(w, kind, c, d)
        return (self.sign * _final(w, self.zeta0)).reshape(shape)


def zip_nodes(
    nodes: np.ndarray,
    interior: complex,
    twin: np.ndarray | None = None,
    extra: np.ndarray | None = None,
) -> tuple[ZipperMap, np.ndarray, np.ndarray]:
    """Run the zipper over counterclockwise boundary nodes.

    ``twin[k]`` is the index of an earlier node that node ``k`` copies (the
    same slit point seen from the other side) or -1.  ``interior`` fixes the
    orientation of the last step.  Returns the map, the real images of every
    node (the image of ``z_0`` is infinite) and the images of ``extra`` points.
    """
    nodes = np.asarray(nodes, dtype=complex)
    n = len(nodes)
    twin = np.full(n, -1, dtype=np.int64) if twin is None else np.asarray(twin, dtype=np.int64)
    if twin[0] >= 0 or twin[1] >= 0:
        raise ValueError("the first two nodes cannot be copies")
    copies: dict[int, list[int]] = {}
    for k, t in enumerate(twin):
        if t >= 0:
            if t >= k:
                raise ValueError("a copy must come after its twin")
            copies.setdefault(int(t), []).append(k - 1)  # indices into w (node 0 is dropped)
    extra = np.zeros(0, dtype=complex) if extra is None else np.asarray(extra, dtype=complex).ravel()
    z0, z1 = nodes[0], nodes[1]
    pts = np.concatenate([nodes[1:], extra, [interior]])
    w = _first_map(pts, z0, z1)
    for j in copies.get(1, ()):
        w[j] = 0.0
    w[0] = 0.0
    on_zero = [0] + list(copies.get(1, ()))  # w-indices sitting at 0: the zipped node and its copies
    zeta0 = complex(np.inf)
    kinds = np.zeros(n - 2, dtype=np.int64)
    cs = np.empty(n - 2)
    ds = np.zeros(n - 2)
    for k in range(1, n - 1):
        a = w[k]
        ar, ai = float(a.real), float(a.imag)
        if twin[k + 1] >= 0:
            # already on the real line: slide it to 0
            kind, c, d = SHIFT, ar, 0.0
        else:
            if ai <= 0:
                ai = max(ai, 0.0) + 1e-15 * max(abs(ar), 1.0)
            r2 = ar * ar + ai * ai
            kind, c, d = ELEMENTARY, (r2 / ar if ar != 0 else np.inf), r2 / ai
        kinds[k - 1], cs[k - 1], ds[k - 1] = kind, c, d
        w = _step(w, kind, c, d)
        if kind == ELEMENTARY:
            # the point that sat at 0 splits: the zipped node goes left, its copies right
            for j in on_zero:
                w[j] = -d if j < k else d
        w[k] = 0.0
        on_zero = [k] + list(copies.get(k + 1, ()))
        for j in on_zero[1:]:
            w[j] = 0.0
        zeta0 = _step_inf(zeta0, kind, c, d)
    fin = _final(w, zeta0)
    sign = 1.0 if fin[-1].imag > 0 else -1.0
    fin = sign * fin
    f = ZipperMap(complex(z0), complex(z1), kinds, cs, ds, complex(zeta0), sign)
    node_img = np.concatenate([[np.inf], fin[: n - 1].real])
    return f, node_img, fin[n - 1 : n - 1 + len(extra)]
