"""Continuum Cardy values: conformal map onto the triangle plus independent cross-checks."""

from .closed_form import cardy_rectangle
from .grid_bvp import SlitNotSupported, grid_cardy_value
from .sweep import EquicontinuityTable, equicontinuity_sweep, perturb_slit, perturbation_family, slit_domain
from .triangle import (
    CardyValue,
    NoConvergence,
    ProbeOffArc,
    TriangleMap,
    barycentric,
    build_triangle_map,
    cardy_value,
)

__all__ = [
    "CardyValue",
    "EquicontinuityTable",
    "NoConvergence",
    "ProbeOffArc",
    "SlitNotSupported",
    "TriangleMap",
    "barycentric",
    "build_triangle_map",
    "cardy_rectangle",
    "cardy_value",
    "equicontinuity_sweep",
    "grid_cardy_value",
    "perturb_slit",
    "perturbation_family",
    "slit_domain",
]
