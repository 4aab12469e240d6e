"""Range-fault injection and hazard-class reporting.

Hazard classification is diagnostic output only; it never gates the
detection logic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

RAMP = "ramp"
JUMP = "jump"

DEFAULT_BALISE_SPACING = 2000.0  # m, typical spacing of consecutive balises
DEFAULT_FAILURE_LEVEL = 20.0  # m, positioning-failure level


@dataclass(frozen=True)
class FaultProfile:
    """A ramp or jump range fault on one satellite."""

    kind: str = RAMP
    satellite: str = "G08"
    start: float = 5000.0  # s
    rate: float = 0.1  # m/s, ramp slope
    magnitude: float = 0.0  # m, jump size

    def __post_init__(self):
        if self.kind not in (RAMP, JUMP):
            raise ParameterError(f"fault kind must be '{RAMP}' or '{JUMP}', got {self.kind!r}")
        if self.start < 0.0:
            raise ParameterError(f"fault start must be >= 0, got {self.start}")
        if self.rate < 0.0:
            raise ParameterError(f"ramp rate must be >= 0, got {self.rate}")
        if self.magnitude < 0.0:
            raise ParameterError(f"jump magnitude must be >= 0, got {self.magnitude}")


def fault_bias(profile: FaultProfile, t: float) -> float:
    """Injected range error [m] on the designated satellite at time t [s]."""
    if t < 0.0:
        raise ParameterError(f"t must be >= 0, got {t}")
    if profile.kind == RAMP:
        return max(0.0, t - profile.start) * profile.rate
    return profile.magnitude if t >= profile.start else 0.0


def fault_bias_series(profile: FaultProfile, times) -> np.ndarray:
    """fault_bias evaluated over an array of epochs."""
    t = np.asarray(times, dtype=float)
    if np.any(t < 0.0):
        raise ParameterError("times must be >= 0")
    if profile.kind == RAMP:
        return np.maximum(0.0, t - profile.start) * profile.rate
    return np.where(t >= profile.start, profile.magnitude, 0.0)


class HazardClass(enum.Enum):
    """Taxonomy of position-solution hazards for balise detection."""

    VB1A = "VB1A"  # one-epoch jump across more than one balise interval
    VB1B = "VB1B"  # one-epoch jump beyond the failure level within one interval
    VB2 = "VB2"  # slow drift reaching the failure level
    NONE = "none"

    def __str__(self) -> str:
        return self.value


def classify_hazard(
    along_error_trace,
    balise_spacing: float = DEFAULT_BALISE_SPACING,
    jump_threshold: float = DEFAULT_FAILURE_LEVEL,
    failure_level: float = DEFAULT_FAILURE_LEVEL,
) -> HazardClass:
    """Classify an along-track position-error trace.

    A single-epoch error change beyond `balise_spacing` can cross multiple
    balise intervals at once (VB1A); a change beyond `jump_threshold` but
    within the spacing is an excessive single-balise crossing (VB1B); reaching
    `failure_level` without any such jump is a slow drift (VB2).
    """
    if balise_spacing <= 0.0:
        raise ParameterError(f"balise_spacing must be > 0, got {balise_spacing}")
    trace = np.asarray(along_error_trace, dtype=float)
    if trace.size == 0:
        raise ParameterError("empty along-track error trace")
    steps = np.abs(np.diff(trace))
    max_step = float(steps.max()) if steps.size else 0.0
    if max_step > balise_spacing:
        return HazardClass.VB1A
    if max_step > jump_threshold:
        return HazardClass.VB1B
    if float(np.abs(trace).max()) >= failure_level:
        return HazardClass.VB2
    return HazardClass.NONE
