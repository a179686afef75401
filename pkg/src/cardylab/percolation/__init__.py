"""Monte Carlo engine: crossing events, estimators, Harris rings and exploration."""

from ..trace import CurveTrace, StopReason
from .estimate import (
    AnnulusFamily,
    AnnulusTooThin,
    CrossingEstimate,
    MissingProbe,
    boundary_decay_profile,
    estimate_cardy,
    estimate_crossing,
    harris_ring_probability,
    wilson_interval,
)
from .events import CrossingSpec, ProbeError, boundary_event_dual, crossing_event, crossing_event_direct
from .explore import ExplorationResult, explore, slit_cardy_after_exploration

__all__ = [
    "AnnulusFamily",
    "AnnulusTooThin",
    "CrossingEstimate",
    "CrossingSpec",
    "CurveTrace",
    "ExplorationResult",
    "MissingProbe",
    "ProbeError",
    "StopReason",
    "boundary_decay_profile",
    "boundary_event_dual",
    "crossing_event",
    "crossing_event_direct",
    "estimate_cardy",
    "estimate_crossing",
    "explore",
    "harris_ring_probability",
    "slit_cardy_after_exploration",
    "wilson_interval",
]
