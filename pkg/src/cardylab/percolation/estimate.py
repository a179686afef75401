"""Monte Carlo estimators over independent colourings.

Replica ``r`` of a run with seed ``s`` always sees the colouring hashed from
``(s, r)``.  Replicas are cut into fixed blocks that a thread pool evaluates
in any order; counts are summed afterwards, so the estimate does not depend
on the number of workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from ..domain_approx.discrete import DiscreteDomain
from ..geometry import Polygon
from ..lattice import Color, SiteCoord, annulus_sites, nearest_site
from ..rng import check_seed
from . import _kernels as K
from .events import CrossingSpec, EventProblem, event_problem

BLOCK = 2048
Z95 = float(norm.ppf(0.975))


class MissingProbe(ValueError):
    pass


class AnnulusTooThin(ValueError):
    pass


@dataclass(frozen=True)
class CrossingEstimate:
    value: float
    half_width: float
    samples: int
    seed: int
    successes: int = 0

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("estimate must be a probability")

    @property
    def lo(self) -> float:
        return wilson_interval(self.successes, self.samples)[0]

    @property
    def hi(self) -> float:
        return wilson_interval(self.successes, self.samples)[1]

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "half_width": self.half_width,
            "samples": self.samples,
            "seed": self.seed,
            "successes": self.successes,
        }


def wilson_interval(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0:
        return 0.0, 1.0
    p = k / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def make_estimate(k: int, n: int, seed: int) -> CrossingEstimate:
    lo, hi = wilson_interval(k, n)
    return CrossingEstimate(value=k / n, half_width=(hi - lo) / 2.0, samples=n, seed=seed, successes=k)


def worker_count(workers: Optional[int] = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("CARDYLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"CARDYLAB_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_replicas(
    dd: DiscreteDomain,
    mode: int,
    flip: bool,
    src: np.ndarray,
    tgt: np.ndarray,
    third: np.ndarray,
    probe: int,
    n: int,
    seed: int,
    workers: Optional[int] = None,
) -> np.ndarray:
    """Per-replica outcomes (bool array of length n) for replicas 0..n-1."""
    seed = check_seed(seed)
    uv = np.ascontiguousarray(dd.sites, dtype=np.int64)
    nbr = np.ascontiguousarray(dd.nbr, dtype=np.int64)
    src = np.ascontiguousarray(src, dtype=np.bool_)
    tgt = np.ascontiguousarray(tgt, dtype=np.bool_)
    third = np.ascontiguousarray(third, dtype=np.bool_)
    out = np.zeros(n, dtype=np.bool_)
    blocks = [(r0, min(BLOCK, n - r0)) for r0 in range(0, n, BLOCK)]

    def job(b):
        r0, cnt = b
        K.run_block(np.uint64(seed), np.int64(r0), cnt, flip, uv, nbr, mode, src, tgt, third, probe, out[r0 : r0 + cnt])

    w = min(worker_count(workers), max(1, len(blocks)))
    if w == 1:
        for b in blocks:
            job(b)
    else:
        with ThreadPoolExecutor(max_workers=w) as pool:
            list(pool.map(job, blocks))
    return out


def outcomes(dd: DiscreteDomain, spec: CrossingSpec, n: int, seed: int, workers: Optional[int] = None) -> np.ndarray:
    p: EventProblem = event_problem(dd, spec)
    return run_replicas(dd, p.mode, p.flip, p.src, p.tgt, p.third, p.probe, n, seed, workers)


def estimate_crossing(
    dd: DiscreteDomain, spec: CrossingSpec, n: int, seed: int, workers: Optional[int] = None
) -> CrossingEstimate:
    """Frequency of the crossing event over ``n`` independent fair colourings."""
    if n < 100:
        raise ValueError("at least 100 samples are required")
    res = outcomes(dd, spec, n, seed, workers)
    return make_estimate(int(res.sum()), n, check_seed(seed))


def estimate_cardy(dd: DiscreteDomain, n: int, seed: int, workers: Optional[int] = None) -> CrossingEstimate:
    """Blue crossing from the b-side of the probe on A to B (the Cardy event at d_eps)."""
    if dd.probe_vertex is None:
        raise MissingProbe("discrete domain has no probe vertex")
    return estimate_crossing(dd, CrossingSpec("U", Color.BLUE, vertex=dd.probe_vertex), n, seed, workers)


def snap_probe(dd: DiscreteDomain, point) -> SiteCoord:
    """Site whose tile contains the point (must be in the principal component)."""
    u, v = nearest_site(float(point[0]), float(point[1]), dd.scale)
    if not dd.contains_site((u, v)) or not dd.principal_mask[dd.index_of((u, v))]:
        raise MissingProbe(f"probe {tuple(point)} is not covered by the principal component")
    return SiteCoord(u, v)


# ---------------------------------------------------------------------- Harris rings
@dataclass(frozen=True)
class AnnulusFamily:
    """Nested squares, each half the size of the previous, around a point."""

    center: tuple
    squares: tuple

    @classmethod
    def dyadic(cls, center, half_size: float, levels: int) -> "AnnulusFamily":
        cx, cy = center
        sq = []
        for l in range(levels):
            h = half_size / 2 ** l
            sq.append(Polygon([(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)]))
        return cls((float(cx), float(cy)), tuple(sq))

    def __post_init__(self):
        for big, small in zip(self.squares, self.squares[1:]):
            if not (small.diameter() < big.diameter()):
                raise ValueError("squares must shrink")

    def half_size(self, level: int) -> float:
        arr = self.squares[level].array
        return float((arr[:, 0].max() - arr[:, 0].min()) / 2.0)


def harris_ring_probability(
    dd: DiscreteDomain,
    fam: AnnulusFamily,
    level: int,
    color: Color,
    n: int,
    seed: int,
    assist: Optional[Sequence[str]] = None,
    workers: Optional[int] = None,
    span: int = 1,
) -> CrossingEstimate:
    """Frequency of a circuit of ``color`` in the annulus between squares ``level`` and ``level + span``.

    With ``span`` fixed, the annuli of successive levels are scaled copies of
    each other (outer-to-inner ratio ``2**span``).  When the annulus meets the
    domain boundary, the arcs listed in ``assist`` may close the circuit;
    touching any other arc counts as escaping.
    """
    if span < 1:
        raise ValueError("span must be at least 1")
    if level + span >= len(fam.squares):
        raise ValueError("level + span must index an inner square")
    width = fam.half_size(level) - fam.half_size(level + span)
    if width < 4 * dd.scale.epsilon:
        raise AnnulusTooThin(f"annulus is {width / dd.scale.epsilon:.2f} tiles wide, need at least 4")
    ann = annulus_sites(dd, fam.squares[level + span], fam.squares[level], assist)
    pm = dd.principal_mask
    flip = Color(color) == Color.YELLOW
    res = run_replicas(dd, K.CIRCUIT, flip, ann.inner & pm, ann.targets & pm, ann.ring & pm, -1, n, seed, workers)
    return make_estimate(int(res.sum()), n, check_seed(seed))


# ---------------------------------------------------------------------- boundary decay
def boundary_decay_profile(
    dd: DiscreteDomain, probes: Sequence, n: int, seed: int, workers: Optional[int] = None
) -> list[CrossingEstimate]:
    """U/Blue estimates at probes ordered by decreasing distance to arc C.

    Each probe point is snapped to the site whose tile contains it.  All
    probes share the replica stream, so differences along the ray are
    measured with common colourings.
    """
    out = []
    for p in probes:
        s = p if isinstance(p, SiteCoord) else snap_probe(dd, p)
        out.append(estimate_crossing(dd, CrossingSpec("U", Color.BLUE, probe=s), n, seed, workers))
    return out
