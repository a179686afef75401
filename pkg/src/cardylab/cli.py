"""Command line front end: ``cardylab <subcommand> --domain FILE --scales ... --samples N --seed S --out DIR``.

Errors are printed to stderr as one JSON object with a stable code, and the
process exits with that code's number.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import __version__
from .harness import FORMATS, ExperimentConfig, HarnessError, classify, run

SUBCOMMANDS = {
    "sweep": ("cardy_sweep", "Cardy value at the probe d across lattice scales, against the conformal oracle"),
    "decay": ("boundary_decay", "crossing function along probes approaching arc C"),
    "rings": ("harris_rings", "monochromatic circuit probabilities in dyadic square annuli"),
    "explore": ("exploration", "seeded exploration traces and the well-organized test on their sides"),
    "equicont": ("equicontinuity", "Cardy values under small perturbations of a slit, Monte Carlo and continuum"),
    "audit": ("approx_audit", "approximation conditions of the canonical hexagonal approximations"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 and free text; keep the JSON contract instead
        raise HarnessError("CONFIG_INVALID", message)


def parse_scales(text: str) -> tuple:
    """Comma-separated scales; fractions such as ``1/16`` are accepted."""
    try:
        return tuple(float(Fraction(t.strip())) for t in text.split(",") if t.strip())
    except (ValueError, ZeroDivisionError):
        raise HarnessError("CONFIG_INVALID", f"cannot parse scales {text!r}") from None


def parse_point(text: str) -> list:
    try:
        x, y = (float(t) for t in text.split(","))
    except ValueError:
        raise HarnessError("CONFIG_INVALID", f"expected x,y, got {text!r}") from None
    return [x, y]


def parse_set(items: Sequence[str]) -> dict:
    out = {}
    for it in items:
        key, sep, val = it.partition("=")
        if not sep or not key:
            raise HarnessError("CONFIG_INVALID", f"--set expects key=value, got {it!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cardylab", description="Cardy crossing probabilities via critical site percolation.")
    p.add_argument("--version", action="version", version=f"cardylab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (kind, help_text) in SUBCOMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--domain", required=True, help="domain JSON file")
        sp.add_argument("--scales", required=True, type=parse_scales, help="strictly decreasing, e.g. 1/16,1/32,1/64")
        sp.add_argument("--samples", type=int, default=10000, help="replicas per scale (traces for explore); at least 100")
        sp.add_argument("--seed", type=int, default=0, help="unsigned 64-bit master seed")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument(
            "--format", action="append", choices=FORMATS, dest="formats",
            help="repeatable; default csv and json, plus plotdata where an oracle exists",
        )
        sp.add_argument("--figures", action="store_true", help="also write figure.png")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=JSON", help="extra experiment option")
        sp.add_argument("--quiet", action="store_true", help="do not print the summary")
        if kind in ("cardy_sweep", "boundary_decay", "equicontinuity"):
            sp.add_argument("--oracle-tol", type=float, help="conformal map refinement tolerance")
        if kind == "cardy_sweep":
            sp.add_argument("--probe", type=parse_point, help="override the probe d (x,y on arc A)")
            sp.add_argument("--oracle", choices=("zipper", "grid"), help="conformal back end")
        if kind == "boundary_decay":
            sp.add_argument("--probes", type=str, help="JSON list of [x,y] probes, farthest from arc C first")
        if kind == "harris_rings":
            sp.add_argument("--center", type=parse_point, required=True)
            sp.add_argument("--half-size", type=float, required=True)
            sp.add_argument("--levels", type=int, default=4, help="number of nested squares, halving each time")
            sp.add_argument("--span", type=int, default=1, help="annulus joins squares l and l+span (ratio 2**span)")
            sp.add_argument("--color", choices=("blue", "yellow"), default="blue")
            sp.add_argument("--assist", type=str, help="comma-separated arcs that may close a circuit, e.g. A,B")
        if kind == "exploration":
            sp.add_argument("--target-radius", type=float, help="stop within this distance of c (default diameter/10)")
            sp.add_argument("--slit-samples", type=int, help="Cardy replicas on each cut domain (0 to skip)")
        if kind == "equicontinuity":
            sp.add_argument("--slit", type=str, help="JSON list of [x,y] points, attachment point first")
            sp.add_argument("--count", type=int, help="perturbations per delta")
        sp.set_defaults(kind=kind)
    return p


def options_from(ns: argparse.Namespace) -> dict:
    opts = parse_set(ns.set)
    simple = {
        "oracle_tol": "oracle_tol",
        "probe": "probe",
        "oracle": "oracle",
        "center": "center",
        "half_size": "half_size",
        "levels": "levels",
        "span": "span",
        "color": "color",
        "target_radius": "target_radius",
        "slit_samples": "slit_samples",
        "count": "count",
    }
    for attr, key in simple.items():
        val = getattr(ns, attr, None)
        if val is not None:
            opts[key] = val
    for attr in ("probes", "slit"):
        val = getattr(ns, attr, None)
        if val is not None:
            try:
                opts[attr] = json.loads(val)
            except json.JSONDecodeError:
                raise HarnessError("CONFIG_INVALID", f"--{attr} must be a JSON list of points") from None
    if getattr(ns, "assist", None):
        opts["assist"] = [a.strip() for a in ns.assist.split(",") if a.strip()]
    return opts


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        cfg = ExperimentConfig(
            domain=ns.domain,
            scales=ns.scales,
            samples=ns.samples,
            seed=ns.seed,
            kind=ns.kind,
            out=ns.out,
            formats=tuple(ns.formats) if ns.formats else None,
            options=options_from(ns),
            figures=ns.figures,
        )
        report = run(cfg)
    except Exception as exc:  # noqa: BLE001 - the contract is a coded JSON error
        err = classify(exc)
        sys.stderr.write(json.dumps(err.to_dict(), sort_keys=True) + "\n")
        return err.exit_code
    if not ns.quiet:
        sys.stdout.write(json.dumps({"kind": report.kind, "config_hash": report.config_hash, "summary": report.summary}, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
