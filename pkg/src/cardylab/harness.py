"""Experiment configuration, orchestration and machine-readable output.

A run is fully determined by its :class:`ExperimentConfig` and the domain
file it points at.  Each scale gets a child seed derived from the master
seed and the exact bits of the scale, so rows do not depend on which other
scales were requested, on thread counts, or on run order.  Wall-clock
timings are the one nondeterministic output and live in their own file.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .domain_approx import (
    ContinuousDomain,
    DomainApproxError,
    DomainParseError,
    canonical_approximation,
    check_interior_conditions,
    check_kernel_convergence,
    sup_assemble,
)
from .geometry import GeometryError, Polyline
from .lattice import Color, LatticeError, LatticeScale
from .percolation import AnnulusFamily, CrossingSpec, ProbeError, estimate_cardy, explore, harris_ring_probability
from .percolation.estimate import AnnulusTooThin, MissingProbe, Z95, boundary_decay_profile, outcomes
from .percolation.explore import well_organized_sides
from .rng import check_seed, derive_seed

KINDS = ("cardy_sweep", "boundary_decay", "harris_rings", "exploration", "equicontinuity", "approx_audit")
FORMATS = ("csv", "json", "plotdata")
DIGITS = 12

# kinds whose rows carry |C_eps - C_0| and can therefore be drawn as an error curve
PLOTTABLE = ("cardy_sweep", "boundary_decay")

EXIT_CODES = {
    "INTERNAL": 1,
    "CONFIG_INVALID": 2,
    "DOMAIN_PARSE": 3,
    "DOMAIN_APPROX": 4,
    "ORACLE": 5,
    "PERCOLATION": 6,
    "IO": 7,
    "FORMAT_UNSUPPORTED": 8,
}


class HarnessError(Exception):
    """An error with a stable code; the CLI prints it as JSON and exits nonzero."""

    def __init__(self, code: str, message: str):
        if code not in EXIT_CODES:
            raise ValueError(f"unknown error code {code}")
        super().__init__(message)
        self.code = code
        self.message = message

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.code]

    def to_dict(self) -> dict:
        return {"error": {"code": self.code, "message": self.message, "exit_code": self.exit_code}}


def classify(exc: BaseException) -> HarnessError:
    """Map an exception raised anywhere in the package to a coded error."""
    from .cardy_oracle import NoConvergence, ProbeOffArc, SlitNotSupported

    if isinstance(exc, HarnessError):
        return exc
    if isinstance(exc, DomainParseError):
        return HarnessError("DOMAIN_PARSE", str(exc))
    if isinstance(exc, (NoConvergence, ProbeOffArc, SlitNotSupported)):
        return HarnessError("ORACLE", f"{type(exc).__name__}: {exc}")
    if isinstance(exc, DomainApproxError):
        return HarnessError("DOMAIN_APPROX", f"{type(exc).__name__}: {exc}")
    if isinstance(exc, (ProbeError, MissingProbe, AnnulusTooThin, LatticeError)):
        return HarnessError("PERCOLATION", f"{type(exc).__name__}: {exc}")
    if isinstance(exc, GeometryError):
        return HarnessError("DOMAIN_PARSE", str(exc))
    if isinstance(exc, OSError):
        return HarnessError("IO", str(exc))
    return HarnessError("INTERNAL", f"{type(exc).__name__}: {exc}")


# ---------------------------------------------------------------------- numbers
def num(x: Any) -> Any:
    """Round floats to 12 significant digits; integers and other values pass through."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{DIGITS}g}")
    return x


def jsonable(obj: Any) -> Any:
    """Nested structure with numpy values converted and floats rounded."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, Color):
        return obj.name.lower()
    return num(obj)


def cell(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.{DIGITS}g}"
    if isinstance(x, (dict, list)):
        return json.dumps(x, sort_keys=True, separators=(",", ":"))
    return str(x)


# ---------------------------------------------------------------------- config
@dataclass(frozen=True)
class ExperimentConfig:
    domain: str
    scales: tuple
    samples: int
    seed: int
    kind: str
    out: str
    formats: Optional[tuple] = None
    options: dict = field(default_factory=dict)
    figures: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise HarnessError("CONFIG_INVALID", f"kind must be one of {', '.join(KINDS)}, got {self.kind!r}")
        try:
            scales = tuple(float(s) for s in self.scales)
        except (TypeError, ValueError):
            raise HarnessError("CONFIG_INVALID", "scales must be numbers") from None
        if any(not (s > 0 and math.isfinite(s)) for s in scales):
            raise HarnessError("CONFIG_INVALID", "scales must be positive")
        if any(b >= a for a, b in zip(scales, scales[1:])):
            raise HarnessError("CONFIG_INVALID", "scales must be strictly decreasing")
        object.__setattr__(self, "scales", scales)
        if isinstance(self.samples, bool) or not isinstance(self.samples, (int, np.integer)) or self.samples < 100:
            raise HarnessError("CONFIG_INVALID", "samples must be an integer of at least 100")
        try:
            object.__setattr__(self, "seed", check_seed(self.seed))
        except (TypeError, ValueError) as exc:
            raise HarnessError("CONFIG_INVALID", str(exc)) from None
        if self.formats is None:
            fmts = FORMATS if self.kind in PLOTTABLE else ("csv", "json")
        else:
            fmts = tuple(self.formats)
        bad = [f for f in fmts if f not in FORMATS]
        if bad:
            raise HarnessError("CONFIG_INVALID", f"unknown format(s) {bad}; choose from {', '.join(FORMATS)}")
        if "plotdata" in fmts and self.kind not in PLOTTABLE:
            raise HarnessError("FORMAT_UNSUPPORTED", f"plotdata needs an oracle error column; {self.kind} has none")
        object.__setattr__(self, "formats", fmts)
        if not isinstance(self.options, dict):
            raise HarnessError("CONFIG_INVALID", "options must be a mapping")

    def to_dict(self) -> dict:
        return {
            "domain": str(self.domain),
            "scales": list(self.scales),
            "samples": int(self.samples),
            "seed": int(self.seed),
            "kind": self.kind,
            "out": str(self.out),
            "formats": list(self.formats),
            "options": jsonable(self.options),
            "figures": bool(self.figures),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            return cls(
                domain=doc["domain"],
                scales=tuple(doc["scales"]),
                samples=doc["samples"],
                seed=doc["seed"],
                kind=doc["kind"],
                out=doc["out"],
                formats=tuple(doc["formats"]) if doc.get("formats") else None,
                options=dict(doc.get("options", {})),
                figures=bool(doc.get("figures", False)),
            )
        except KeyError as exc:
            raise HarnessError("CONFIG_INVALID", f"missing config field {exc}") from None

    def content_hash(self, domain_doc: dict) -> str:
        """SHA-256 over everything that determines the rows (not the output location)."""
        key = {
            "version": __version__,
            "kind": self.kind,
            "scales": [num(s) for s in self.scales],
            "samples": int(self.samples),
            "seed": int(self.seed),
            "options": jsonable(self.options),
            "domain": jsonable(domain_doc),
        }
        blob = json.dumps(key, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------- report
@dataclass
class SweepReport:
    kind: str
    version: str
    seed: int
    config_hash: str
    config: dict
    domain: dict
    columns: list
    rows: list
    oracle: Optional[dict] = None
    audits: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "version": self.version,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "config": self.config,
            "domain": self.domain,
            "oracle": self.oracle,
            "columns": list(self.columns),
            "rows": [dict(r) for r in self.rows],
            "audits": self.audits,
            "summary": self.summary,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepReport":
        return cls(
            kind=doc["kind"],
            version=doc["version"],
            seed=int(doc["seed"]),
            config_hash=doc["config_hash"],
            config=doc["config"],
            domain=doc["domain"],
            columns=list(doc["columns"]),
            rows=[dict(r) for r in doc["rows"]],
            oracle=doc.get("oracle"),
            audits=list(doc.get("audits", [])),
            summary=dict(doc.get("summary", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SweepReport":
        return cls.from_dict(json.loads(text))

    def column(self, name: str) -> list:
        return [r.get(name) for r in self.rows]


class _Clock:
    def __init__(self):
        self.stages: dict = {}

    def __call__(self, name: str):
        clock = self

        class _Stage:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                clock.stages[name] = clock.stages.get(name, 0.0) + time.perf_counter() - self.t0

        return _Stage()


# ---------------------------------------------------------------------- shared helpers
def _estimate_cols(prefix: str = "") -> list:
    return [f"{prefix}value", f"{prefix}half_width", f"{prefix}ci_lo", f"{prefix}ci_hi", "samples", "successes", "seed"]


def _estimate_row(est, prefix: str = "") -> dict:
    return {
        f"{prefix}value": num(est.value),
        f"{prefix}half_width": num(est.half_width),
        f"{prefix}ci_lo": num(est.lo),
        f"{prefix}ci_hi": num(est.hi),
        "samples": int(est.samples),
        "successes": int(est.successes),
        "seed": int(est.seed),
    }


def _error_band(lo: float, hi: float, c0: float) -> tuple[float, float]:
    """Range of |C - c0| as C runs over the confidence interval [lo, hi]."""
    far = max(abs(lo - c0), abs(hi - c0))
    near = 0.0 if lo <= c0 <= hi else min(abs(lo - c0), abs(hi - c0))
    return near, far


def trend_verdict(errors: Sequence[float], half_widths: Sequence[float], slack: float = 3.0) -> dict:
    """Monotone-envelope reading of an error sequence ordered by decreasing scale.

    Each step must go down or stay within ``slack`` half-widths (the larger
    of the two neighbouring ones).  The verdict is about finite-scale data;
    it makes no limit claim.
    """
    steps = []
    for k in range(1, len(errors)):
        allowed = errors[k - 1] + slack * max(half_widths[k - 1], half_widths[k])
        steps.append(bool(errors[k] <= allowed))
    return {
        "weakly_decreasing": all(steps),
        "steps": steps,
        "final_abs_err": num(errors[-1]) if len(errors) else None,
        "slack_half_widths": slack,
    }


def _scale_seed(cfg: ExperimentConfig, eps: float) -> int:
    return derive_seed(cfg.seed, "scale", float(eps))


def _point_list(value, name: str) -> list:
    try:
        pts = [(float(p[0]), float(p[1])) for p in value]
    except (TypeError, ValueError, IndexError):
        raise HarnessError("CONFIG_INVALID", f"option {name} must be a list of [x, y] points") from None
    if not pts:
        raise HarnessError("CONFIG_INVALID", f"option {name} is empty")
    return pts


# ---------------------------------------------------------------------- experiments
def _cardy_sweep(cfg, dom, clock):
    from .cardy_oracle import build_triangle_map, cardy_value, grid_cardy_value

    opts = cfg.options
    if "probe" in opts:
        dom = dom.with_probe(_point_list([opts["probe"]], "probe")[0])
    if dom.probe is None:
        raise HarnessError("CONFIG_INVALID", "cardy_sweep needs a probe d (in the domain file or option probe)")
    method = opts.get("oracle", "zipper")
    tol = float(opts.get("oracle_tol", 1e-6))
    with clock("oracle"):
        if method == "zipper":
            c0 = cardy_value(build_triangle_map(dom, tol))
        elif method == "grid":
            c0 = grid_cardy_value(dom)
        else:
            raise HarnessError("CONFIG_INVALID", f"oracle must be zipper or grid, got {method!r}")
    cols = ["epsilon", "probe", "probe_x", "probe_y"] + _estimate_cols() + ["c0", "abs_err", "err_lo", "err_hi", "n_sites"]
    rows, audits = [], []
    for eps in cfg.scales:
        with clock(f"approximate eps={eps:.6g}"):
            dd = canonical_approximation(dom, LatticeScale(eps))
            rep = check_interior_conditions(dd, dom)
        audits.append({"epsilon": num(eps), "report": jsonable(rep.to_dict()), "passed": rep.passed})
        with clock(f"estimate eps={eps:.6g}"):
            est = estimate_cardy(dd, cfg.samples, _scale_seed(cfg, eps))
        near, far = _error_band(est.lo, est.hi, c0.value)
        row = {"epsilon": num(eps), "probe": "d"}
        row["probe_x"], row["probe_y"] = num(dom.probe.point.x), num(dom.probe.point.y)
        row.update(_estimate_row(est))
        row.update(
            {
                "c0": num(c0.value),
                "abs_err": num(abs(est.value - c0.value)),
                "err_lo": num(near),
                "err_hi": num(far),
                "n_sites": int(dd.n_sites),
            }
        )
        rows.append(row)
    errs = [r["abs_err"] for r in rows]
    hws = [r["half_width"] for r in rows]
    summary = trend_verdict(errs, hws)
    summary["audits_passed"] = all(a["passed"] for a in audits)
    oracle = {"value": num(c0.value), "accuracy": num(c0.accuracy), "method": method}
    return cols, rows, oracle, audits, summary


def _ray_probes(dom: ContinuousDomain, spec: dict) -> list:
    try:
        origin = np.array(spec["origin"], dtype=float)
        direction = np.array(spec["direction"], dtype=float)
        distances = [float(t) for t in spec["distances"]]
    except (KeyError, TypeError, ValueError):
        raise HarnessError("CONFIG_INVALID", "ray needs origin, direction and distances") from None
    norm = float(np.hypot(*direction))
    if norm == 0:
        raise HarnessError("CONFIG_INVALID", "ray direction must be nonzero")
    pts = [tuple(origin + t * direction / norm) for t in sorted(distances, reverse=True)]
    return pts


def _boundary_decay(cfg, dom, clock):
    from .cardy_oracle import build_triangle_map

    opts = cfg.options
    if "probes" in opts:
        probes = _point_list(opts["probes"], "probes")
    elif "ray" in opts:
        probes = _ray_probes(dom, opts["ray"])
    else:
        raise HarnessError("CONFIG_INVALID", "boundary_decay needs option probes or ray")
    inside = dom.contains(np.array(probes))
    if not inside.all():
        raise HarnessError("CONFIG_INVALID", f"probe {probes[int(np.argmin(inside))]} is outside the domain")
    pts = np.array(probes)
    dist_c = _arc_distance(dom, pts, "C")
    oracle = None
    u0 = [None] * len(probes)
    if opts.get("oracle", True):
        with clock("oracle"):
            tmap = build_triangle_map(dom, float(opts.get("oracle_tol", 1e-6)), test_points=pts)
            u0 = [float(v) for v in tmap.u(pts)]
        oracle = {"values": [num(v) for v in u0], "accuracy": num(tmap.accuracy), "method": "zipper"}
    cols = ["epsilon", "probe", "probe_x", "probe_y", "dist_to_C"] + _estimate_cols() + ["c0", "abs_err", "err_lo", "err_hi"]
    rows, audits = [], []
    for eps in cfg.scales:
        with clock(f"approximate eps={eps:.6g}"):
            dd = canonical_approximation(dom, LatticeScale(eps))
        with clock(f"estimate eps={eps:.6g}"):
            ests = boundary_decay_profile(dd, probes, cfg.samples, _scale_seed(cfg, eps))
        for k, (p, est) in enumerate(zip(probes, ests)):
            row = {"epsilon": num(eps), "probe": k, "probe_x": num(p[0]), "probe_y": num(p[1]), "dist_to_C": num(dist_c[k])}
            row.update(_estimate_row(est))
            if u0[k] is not None:
                near, far = _error_band(est.lo, est.hi, u0[k])
                row.update({"c0": num(u0[k]), "abs_err": num(abs(est.value - u0[k])), "err_lo": num(near), "err_hi": num(far)})
            else:
                row.update({"c0": None, "abs_err": None, "err_lo": None, "err_hi": None})
            rows.append(row)
    finest = [r for r in rows if r["epsilon"] == num(cfg.scales[-1])]
    summary = {
        "closest_probe_value": finest[-1]["value"] if finest else None,
        "farthest_probe_value": finest[0]["value"] if finest else None,
    }
    return cols, rows, oracle, audits, summary


def _arc_distance(dom: ContinuousDomain, pts: np.ndarray, label: str) -> np.ndarray:
    from .geometry import points_to_segments

    arc = dom.arc_polyline(label)
    d, _ = points_to_segments(pts, arc[:-1], arc[1:])
    return d


def _harris_rings(cfg, dom, clock):
    opts = cfg.options
    try:
        center = _point_list([opts["center"]], "center")[0]
        half = float(opts["half_size"])
        levels = int(opts.get("levels", 4))
        span = int(opts.get("span", 1))
    except KeyError as exc:
        raise HarnessError("CONFIG_INVALID", f"harris_rings needs option {exc}") from None
    color = {"blue": Color.BLUE, "yellow": Color.YELLOW}.get(str(opts.get("color", "blue")).lower())
    if color is None:
        raise HarnessError("CONFIG_INVALID", "color must be blue or yellow")
    assist = opts.get("assist")
    if span < 1 or levels < span + 1:
        raise HarnessError("CONFIG_INVALID", "need span >= 1 and levels >= span + 1")
    fam = AnnulusFamily.dyadic(center, half, levels)
    cols = ["epsilon", "level", "outer_half", "inner_half", "tiles_wide"] + _estimate_cols()
    rows, skipped = [], []
    for eps in cfg.scales:
        with clock(f"approximate eps={eps:.6g}"):
            dd = canonical_approximation(dom, LatticeScale(eps))
        base = _scale_seed(cfg, eps)
        for lvl in range(levels - span):
            width = fam.half_size(lvl) - fam.half_size(lvl + span)
            try:
                with clock(f"estimate eps={eps:.6g}"):
                    est = harris_ring_probability(
                        dd, fam, lvl, color, cfg.samples, derive_seed(base, "level", lvl), assist=assist, span=span
                    )
            except AnnulusTooThin:
                skipped.append({"epsilon": num(eps), "level": lvl, "tiles_wide": num(width / eps)})
                continue
            row = {
                "epsilon": num(eps),
                "level": lvl,
                "outer_half": num(fam.half_size(lvl)),
                "inner_half": num(fam.half_size(lvl + span)),
                "tiles_wide": num(width / eps),
            }
            row.update(_estimate_row(est))
            rows.append(row)
    summary = {"skipped": skipped, "color": color.name.lower(), "assist": assist, "span": span}
    summary.update(plateau_verdict(rows))
    return cols, rows, None, [], summary


def plateau_verdict(rows: Sequence[dict], slack: float = 3.0) -> dict:
    """Pairwise agreement of circuit probabilities, within ``slack`` of the larger half-width."""
    worst = 0.0
    ok = True
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            gap = abs(rows[i]["value"] - rows[j]["value"])
            allowed = slack * max(rows[i]["half_width"], rows[j]["half_width"])
            ok = ok and gap <= allowed
            worst = max(worst, gap / allowed if allowed > 0 else math.inf if gap > 0 else 0.0)
    return {
        "mutually_consistent": ok,
        "worst_gap_in_half_widths": num(worst * slack) if math.isfinite(worst) else None,
        "min_value": num(min((r["value"] for r in rows), default=math.nan)),
        "min_ci_lo": num(min((r["ci_lo"] for r in rows), default=math.nan)),
    }


def _exploration(cfg, dom, clock):
    opts = cfg.options
    radius = float(opts.get("target_radius", 0.1 * dom.diameter))
    max_steps = opts.get("max_steps")
    check = bool(opts.get("well_organized", True))
    slit_samples = int(opts.get("slit_samples", 0))
    if 0 < slit_samples < 100:
        raise HarnessError("CONFIG_INVALID", "slit_samples must be 0 or at least 100")
    cols = ["epsilon", "trace", "seed", "steps", "stop_reason", "tip_x", "tip_y", "side_B", "side_C"]
    if slit_samples:
        cols += ["slit_value", "slit_half_width"]
    rows, audits = [], []
    for eps in cfg.scales:
        with clock(f"approximate eps={eps:.6g}"):
            dd = canonical_approximation(dom, LatticeScale(eps))
        base = _scale_seed(cfg, eps)
        for k in range(cfg.samples):
            s = derive_seed(base, "trace", k)
            with clock(f"explore eps={eps:.6g}"):
                res = explore(dd, s, max_steps=max_steps, target_radius=radius)
            tr = res.trace
            tip = tr.points(dd.scale)[-1]
            row = {
                "epsilon": num(eps),
                "trace": k,
                "seed": s,
                "steps": len(tr.left),
                "stop_reason": tr.stop_reason.value,
                "tip_x": num(tip[0]),
                "tip_y": num(tip[1]),
                "side_B": None,
                "side_C": None,
            }
            if check and len(tr.left):
                with clock(f"well-organized eps={eps:.6g}"):
                    sides = well_organized_sides(sup_assemble(dd, tr, strict=False), tr)
                for lab, res_side in sides.items():
                    if res_side is None:
                        row[f"side_{lab}"] = "skipped"
                        continue
                    ok, witness = res_side
                    row[f"side_{lab}"] = "pass" if ok else "fail"
                    if not ok:
                        audits.append({"epsilon": num(eps), "trace": k, "side": lab, "witness": jsonable(witness)})
            if slit_samples:
                try:
                    with clock(f"slit estimate eps={eps:.6g}"):
                        est = estimate_cardy(sup_assemble(dd, tr), slit_samples, derive_seed(s, "slit"))
                    row["slit_value"], row["slit_half_width"] = num(est.value), num(est.half_width)
                except DomainApproxError:
                    row["slit_value"], row["slit_half_width"] = None, None
            rows.append(row)
    evaluated = [r[f"side_{lab}"] for r in rows for lab in "BC" if r[f"side_{lab}"] in ("pass", "fail")]
    reasons: dict = {}
    for r in rows:
        reasons[r["stop_reason"]] = reasons.get(r["stop_reason"], 0) + 1
    summary = {
        "target_radius": num(radius),
        "stop_reasons": reasons,
        "sides_evaluated": len(evaluated),
        "sides_failed": sum(v == "fail" for v in evaluated),
        "traces_without_evaluated_side": sum(
            all(r[f"side_{lab}"] not in ("pass", "fail") for lab in "BC") for r in rows
        ),
    }
    return cols, rows, None, audits, summary


def _equicontinuity(cfg, dom, clock):
    from .cardy_oracle import equicontinuity_sweep, perturbation_family, slit_domain

    opts = cfg.options
    if "slit" not in opts:
        raise HarnessError("CONFIG_INVALID", "equicontinuity needs option slit (base polyline)")
    base = Polyline(_point_list(opts["slit"], "slit"))
    factors = [float(f) for f in opts.get("delta_factors", [1.0, 0.5, 0.25])]
    count = int(opts.get("count", 20))
    tol = float(opts.get("oracle_tol", 1e-6))
    if dom.probe is None:
        raise HarnessError("CONFIG_INVALID", "equicontinuity needs a probe d in the domain file")
    cols = [
        "epsilon", "delta", "index", "frechet", "base_value", "value", "diff", "diff_half_width",
        "samples", "seed", "c0_base", "c0", "c0_diff",
    ]
    rows = []
    oracle_tables = []
    for eps in cfg.scales:
        s = _scale_seed(cfg, eps)
        fam = perturbation_family(base, [f * eps for f in factors], count, derive_seed(s, "perturb") % 2 ** 63)
        with clock(f"oracle eps={eps:.6g}"):
            table = equicontinuity_sweep(dom, base, fam, tol)
        oracle_tables.append({"epsilon": num(eps), "table": jsonable(table.to_dict())})
        spec_seed = derive_seed(s, "colors")
        with clock(f"estimate eps={eps:.6g}"):
            base_dd = canonical_approximation(slit_domain(dom, base), LatticeScale(eps))
            o_base = _cardy_outcomes(base_dd, cfg.samples, spec_seed)
            for (delta, sl), orow in zip(fam, table.rows):
                dd = canonical_approximation(slit_domain(dom, sl), LatticeScale(eps))
                o = _cardy_outcomes(dd, cfg.samples, spec_seed)
                diff = o.astype(float) - o_base.astype(float)
                hw = Z95 * float(diff.std(ddof=1)) / math.sqrt(len(diff))
                rows.append(
                    {
                        "epsilon": num(eps),
                        "delta": num(delta),
                        "index": orow.index,
                        "frechet": num(orow.frechet),
                        "base_value": num(o_base.mean()),
                        "value": num(o.mean()),
                        "diff": num(diff.mean()),
                        "diff_half_width": num(hw),
                        "samples": int(cfg.samples),
                        "seed": spec_seed,
                        "c0_base": num(table.base_value),
                        "c0": num(orow.value),
                        "c0_diff": num(orow.value - table.base_value),
                    }
                )
    summary = {"envelopes": envelope_summary(rows)}
    return cols, rows, {"tables": oracle_tables, "accuracy": num(max(t["table"]["accuracy"] for t in oracle_tables))}, [], summary


def _cardy_outcomes(dd, n: int, seed: int) -> np.ndarray:
    if dd.probe_vertex is None:
        raise MissingProbe("discrete domain has no probe vertex")
    return outcomes(dd, CrossingSpec("U", Color.BLUE, vertex=dd.probe_vertex), n, seed)


def envelope_summary(rows: Sequence[dict], slack: float = 3.0) -> list:
    """Per scale: the largest |difference| for each delta, Monte Carlo and continuum side by side.

    ``monotone`` holds when the Monte Carlo envelope does not grow as delta
    shrinks beyond ``slack`` half-widths; ``consistent`` holds when each
    Monte Carlo envelope is within ``slack`` half-widths of the continuum
    envelope for the same delta.
    """
    out = []
    for eps in sorted({r["epsilon"] for r in rows}, reverse=True):
        env = []
        for delta in sorted({r["delta"] for r in rows if r["epsilon"] == eps}, reverse=True):
            sub = [r for r in rows if r["epsilon"] == eps and r["delta"] == delta]
            top = max(sub, key=lambda r: abs(r["diff"]))
            env.append(
                {
                    "delta": delta,
                    "mc": num(abs(top["diff"])),
                    "mc_half_width": num(max(r["diff_half_width"] for r in sub)),
                    "c0": num(max(abs(r["c0_diff"]) for r in sub)),
                }
            )
        monotone = all(
            b["mc"] <= a["mc"] + slack * max(a["mc_half_width"], b["mc_half_width"]) for a, b in zip(env, env[1:])
        )
        consistent = all(abs(e["mc"] - e["c0"]) <= slack * e["mc_half_width"] for e in env)
        out.append({"epsilon": eps, "envelope": env, "monotone": monotone, "consistent": consistent})
    return out


def _approx_audit(cfg, dom, clock):
    cols = ["epsilon", "condition", "passed", "witness"]
    rows, audits, seq = [], [], []
    for eps in cfg.scales:
        with clock(f"approximate eps={eps:.6g}"):
            dd = canonical_approximation(dom, LatticeScale(eps))
            rep = check_interior_conditions(dd, dom)
        seq.append(dd)
        audits.append({"epsilon": num(eps), "report": jsonable(rep.to_dict())})
        for name, res in rep.conditions.items():
            rows.append({"epsilon": num(eps), "condition": name, "passed": bool(res.passed), "witness": jsonable(res.witness)})
    if len(seq) >= 3:
        with clock("kernel"):
            krep = check_kernel_convergence(seq, dom)
        audits.append({"epsilon": "sequence", "report": jsonable(krep.to_dict())})
        for name, res in krep.conditions.items():
            rows.append(
                {"epsilon": num(cfg.scales[-1]), "condition": name, "passed": bool(res.passed), "witness": jsonable(res.witness)}
            )
    summary = {"all_passed": all(r["passed"] for r in rows), "failed": [(r["epsilon"], r["condition"]) for r in rows if not r["passed"]]}
    summary["kernel_checked"] = len(seq) >= 3
    return cols, rows, None, audits, jsonable(summary)


_RUNNERS = {
    "cardy_sweep": _cardy_sweep,
    "boundary_decay": _boundary_decay,
    "harris_rings": _harris_rings,
    "exploration": _exploration,
    "equicontinuity": _equicontinuity,
    "approx_audit": _approx_audit,
}


# ---------------------------------------------------------------------- run / emit
def load_domain(path) -> ContinuousDomain:
    return ContinuousDomain.load(path)


def run(config: ExperimentConfig, write: bool = True) -> SweepReport:
    """Execute the experiment, write the requested files (unless ``write`` is false) and return the report.

    Any failure is re-raised as a :class:`HarnessError` with a stable code.
    """
    clock = _Clock()
    try:
        with clock("load"):
            dom = load_domain(config.domain)
        domain_doc = jsonable(dom.to_dict())
        cols, rows, oracle, audits, summary = _RUNNERS[config.kind](config, dom, clock)
    except Exception as exc:  # noqa: BLE001 - every failure leaves with a code
        raise classify(exc) from exc
    report = SweepReport(
        kind=config.kind,
        version=__version__,
        seed=int(config.seed),
        config_hash=config.content_hash(domain_doc),
        config={k: v for k, v in config.to_dict().items() if k not in ("out", "figures")},
        domain=domain_doc,
        columns=list(cols),
        rows=[jsonable(r) for r in rows],
        oracle=jsonable(oracle),
        audits=jsonable(audits),
        summary=jsonable(summary),
        timings=dict(clock.stages),
    )
    if write:
        write_outputs(report, config)
    return report


def write_outputs(report: SweepReport, config: ExperimentConfig) -> list:
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [emit(report, fmt, out) for fmt in config.formats]
        t = out / "timings.json"
        t.write_text(json.dumps({"config_hash": report.config_hash, "seconds": report.timings}, indent=1, sort_keys=True) + "\n")
        paths.append(t)
        if config.figures:
            from .figures import render

            paths.extend(render(report, out))
    except OSError as exc:
        raise HarnessError("IO", str(exc)) from exc
    return paths


FILE_NAMES = {"csv": "report.csv", "json": "report.json", "plotdata": "plotdata.tsv"}


def provenance(report: SweepReport) -> str:
    return f"cardylab {report.version} kind={report.kind} config_hash={report.config_hash} seed={report.seed}"


def render_csv(report: SweepReport) -> str:
    buf = io.StringIO()
    buf.write(f"# {provenance(report)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for r in report.rows:
        w.writerow([cell(r.get(c)) for c in report.columns])
    return buf.getvalue()


def plot_rows(report: SweepReport) -> list:
    """(log_eps, abs_err, ci_lo, ci_hi, probe) for every row with an oracle value."""
    out = []
    for r in report.rows:
        if r.get("abs_err") is None:
            continue
        out.append((num(math.log(r["epsilon"])), r["abs_err"], r["err_lo"], r["err_hi"], r["probe"]))
    return out


def render_plotdata(report: SweepReport) -> str:
    if report.kind not in PLOTTABLE:
        raise HarnessError("FORMAT_UNSUPPORTED", f"plotdata needs an oracle error column; {report.kind} has none")
    lines = [f"# {provenance(report)}", "# ci_lo/ci_hi bound |C_eps - C_0| over the 95% Wilson interval", "log_eps\tabs_err\tci_lo\tci_hi\tprobe"]
    for row in plot_rows(report):
        lines.append("\t".join(cell(x) for x in row))
    return "\n".join(lines) + "\n"


def emit(report: SweepReport, fmt: str, out_dir) -> Path:
    """Write one output format into ``out_dir`` and return its path."""
    renderers = {"csv": render_csv, "json": SweepReport.to_json, "plotdata": render_plotdata}
    if fmt not in renderers:
        raise HarnessError("CONFIG_INVALID", f"unknown format {fmt!r}")
    text = renderers[fmt](report)
    path = Path(out_dir) / FILE_NAMES[fmt]
    try:
        path.write_text(text)
    except OSError as exc:
        raise HarnessError("IO", str(exc)) from exc
    return path


def read_report(path) -> SweepReport:
    try:
        return SweepReport.from_json(Path(path).read_text())
    except OSError as exc:
        raise HarnessError("IO", str(exc)) from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise HarnessError("CONFIG_INVALID", f"not a report file: {exc}") from exc
