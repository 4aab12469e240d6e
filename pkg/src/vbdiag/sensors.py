"""Odometry displacement and track-geometry (map) reference models."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .gm_noise import Gm1Params, gm1_discrete_coeffs


@dataclass(frozen=True)
class OdometerModel:
    """Combined odometer: white displacement noise at a fixed measurement rate."""

    sigma_v: float = 0.05  # m/s
    rate: float = 1.0  # Hz

    def __post_init__(self):
        if self.sigma_v < 0.0:
            raise ParameterError(f"sigma_v must be >= 0, got {self.sigma_v}")
        if self.rate <= 0.0:
            raise ParameterError(f"rate must be > 0, got {self.rate}")

    @property
    def displacement_sigma(self) -> float:
        """One-sigma error [m] of a single displacement measurement."""
        return self.sigma_v / self.rate


def odometer_delta(model: OdometerModel, true_delta: float, gaussian_draw: float) -> float:
    """Measured displacement over one epoch: truth plus white noise.

    Errors are independent across epochs (no accumulated bias is modelled).
    """
    return true_delta + model.displacement_sigma * gaussian_draw


@dataclass(frozen=True)
class TrackMapModel:
    """Cross-track / vertical coordinate error of the surveyed track map.

    Modelled as GM1 per axis: survey and interpolation errors are spatially,
    hence at constant speed temporally, correlated.  Axes are independent and
    identically distributed.
    """

    sigma_map: float = 1.0  # m
    tau_map: float = 300.0  # s

    def __post_init__(self):
        if self.sigma_map < 0.0:
            raise ParameterError(f"sigma_map must be >= 0, got {self.sigma_map}")
        if self.tau_map <= 0.0:
            raise ParameterError(f"tau_map must be > 0, got {self.tau_map}")

    def gm1_params(self) -> Gm1Params:
        return Gm1Params(self.sigma_map**2, self.tau_map)


def map_coordinate_error(
    model: TrackMapModel, state: float, gaussian_draw: float, dt: float = 1.0
) -> float:
    """Advance one map axis error state by one epoch and return the new value [m].

    The caller owns one independent state per axis (cross, vertical).
    """
    phi, noise_var = gm1_discrete_coeffs(model.gm1_params(), dt)
    return phi * state + math.sqrt(noise_var) * gaussian_draw
