"""Continuum-side continuity of the Cardy value under slit perturbations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..domain_approx.continuous import ContinuousDomain, Mark
from ..geometry import Point, Polyline, frechet_distance, points_to_segments, winding_inside
from .triangle import build_triangle_map, cardy_value


@dataclass(frozen=True)
class SweepRow:
    delta: float
    index: int
    frechet: float
    value: float
    difference: float


@dataclass(frozen=True)
class EquicontinuityTable:
    base_value: float
    accuracy: float
    rows: tuple

    def envelope(self) -> dict:
        """Largest difference for each perturbation size, keyed by delta (descending)."""
        out: dict = {}
        for r in self.rows:
            out[r.delta] = max(out.get(r.delta, 0.0), r.difference)
        return dict(sorted(out.items(), reverse=True))

    def is_monotone(self, slack: float = 0.0) -> bool:
        """True when the envelope does not grow as delta shrinks (up to ``slack``)."""
        env = list(self.envelope().values())
        return all(b <= a + slack for a, b in zip(env, env[1:]))

    def to_dict(self) -> dict:
        return {
            "base_value": self.base_value,
            "accuracy": self.accuracy,
            "rows": [r.__dict__ for r in self.rows],
            "envelope": {repr(k): v for k, v in self.envelope().items()},
        }


def slit_domain(dom: ContinuousDomain, slit: Polyline) -> ContinuousDomain:
    """``dom`` with one extra slit whose tip becomes the mark a.

    The interior reference point is kept unless it lies within a tenth of
    the diameter of the new slit; then the deepest point of a 48 x 48 grid
    replaces it.  The margin is wide so that nearby perturbed slits keep
    the same reference point.
    """
    marks = dict(dom.marks)
    marks["a"] = Mark(Point(*slit.array[-1]))
    slits = list(dom.slits) + [slit]
    z0 = np.array([dom.z0.x, dom.z0.y])
    if _clearance(dom, slits, z0[None])[0] <= 0.1 * dom.diameter:
        xmin, ymin, xmax, ymax = dom.outer.bbox()
        gx, gy = np.meshgrid(np.linspace(xmin, xmax, 48), np.linspace(ymin, ymax, 48))
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        grid = grid[winding_inside(grid, dom.outer.array)]
        z0 = grid[int(np.argmax(_clearance(dom, slits, grid)))]
    return dom.with_slits(slits, marks=marks, z0=(float(z0[0]), float(z0[1])))


def _clearance(dom: ContinuousDomain, slits: Sequence[Polyline], pts: np.ndarray) -> np.ndarray:
    ring = dom.outer.array
    a = [ring, *(sl.array[:-1] for sl in slits)]
    b = [np.roll(ring, -1, axis=0), *(sl.array[1:] for sl in slits)]
    d, _ = points_to_segments(pts, np.vstack(a), np.vstack(b))
    return d.min(axis=1)


def perturb_slit(slit: Polyline, delta: float, rng: np.random.Generator) -> Polyline:
    """Move every vertex but the attachment point by at most ``delta``.

    Moving matched vertices by at most delta keeps the Fréchet distance at
    most delta.
    """
    arr = slit.array.copy()
    k = len(arr) - 1
    r = delta * np.sqrt(rng.uniform(0.0, 1.0, k))
    th = rng.uniform(0.0, 2 * np.pi, k)
    arr[1:] += np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    return Polyline(arr)


def slit_distance(g1: Polyline, g2: Polyline, delta: float) -> float:
    """Upper bound on the Fréchet distance, resolved finely enough to compare with ``delta``.

    Polylines with matching vertex counts are bounded by the largest vertex
    displacement (the linear reparametrization couples them).  Otherwise the
    discrete distance on samples delta/16 apart is used, less half a sample
    spacing.
    """
    a, b = g1.array, g2.array
    if a.shape == b.shape:
        return float(np.hypot(*(a - b).T).max())
    step = delta / 16.0
    return max(0.0, frechet_distance(g1, g2, step=step) - step / 2.0)


def equicontinuity_sweep(
    dom: ContinuousDomain,
    base: Polyline,
    perturbations: Iterable[tuple[float, Polyline]],
    tol: float = 1e-6,
) -> EquicontinuityTable:
    """|C(dom + base) - C(dom + perturbed)| for each (delta, perturbed slit).

    Each perturbed slit must lie within Fréchet distance ``delta`` of the
    base; the tip of each slit is the mark a of its domain.
    """
    base_dom = slit_domain(dom, base)
    m = build_triangle_map(base_dom, tol)
    base_val = cardy_value(m)
    acc = base_val.accuracy
    rows = []
    counters: dict = {}
    for delta, sl in perturbations:
        dist = slit_distance(base, sl, delta)
        if dist > delta * (1 + 1e-9):
            raise ValueError(f"perturbation at Fréchet distance {dist:.3g} exceeds delta {delta:.3g}")
        pm = build_triangle_map(slit_domain(dom, sl), tol)
        v = cardy_value(pm)
        acc = max(acc, v.accuracy)
        idx = counters.get(delta, 0)
        counters[delta] = idx + 1
        rows.append(SweepRow(float(delta), idx, float(dist), v.value, abs(v.value - base_val.value)))
    return EquicontinuityTable(base_val.value, float(acc), tuple(rows))


def perturbation_family(
    base: Polyline, deltas: Sequence[float], count: int, seed: int
) -> list[tuple[float, Polyline]]:
    """``count`` random perturbations of ``base`` for each delta, from one seeded generator."""
    rng = np.random.default_rng(seed)
    return [(float(d), perturb_slit(base, d, rng)) for d in deltas for _ in range(count)]
