"""First-order Gauss-Markov (GM1) range-error models.

Each range-error source carried by a satellite (ionosphere, troposphere,
orbit/clock, user multipath+noise) is a discrete GM1 process with stationary
variance R(0) and correlation time tau, so the lag-k autocorrelation is
exp(-k*dt/tau).  Ionosphere and troposphere stationary sigmas depend on the
satellite elevation; orbit/clock and user sigmas are fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import ParameterError

#: order of the per-satellite error sources everywhere in the package
SOURCES = ("iono", "tropo", "orbit_clock", "user")

#: constants of the substituted elevation-dependent variance models
DEFAULT_IONO_VERTICAL_SIGMA = 0.4  # m, one-sigma vertical delay residual
DEFAULT_TROPO_ZENITH_SIGMA = 0.12  # m, one-sigma zenith delay residual
EARTH_RADIUS_KM = 6378.0
IONO_SHELL_HEIGHT_KM = 350.0


@dataclass(frozen=True)
class Gm1Params:
    """Stationary variance R(0) [m^2] and correlation time tau [s] of a GM1 process."""

    variance_r0: float
    tau: float

    def __post_init__(self):
        if self.variance_r0 < 0.0:
            raise ParameterError(f"variance_r0 must be >= 0, got {self.variance_r0}")
        if self.tau <= 0.0:
            raise ParameterError(f"tau must be > 0, got {self.tau}")


def gm1_discrete_coeffs(params: Gm1Params, dt: float) -> tuple[float, float]:
    """Exact discretization of a GM1 process over a step of dt seconds.

    Returns (phi, process_noise_var) with phi = exp(-dt/tau) and driving-noise
    variance R(0)*(1 - phi^2), so the recursion

        state' = phi*state + sqrt(process_noise_var)*w,   w ~ N(0, 1)

    has stationary variance R(0) and lag-k autocorrelation exp(-k*dt/tau).
    dt = 0 degenerates to the identity (phi = 1, zero driving noise).
    """
    if dt < 0.0:
        raise ParameterError(f"dt must be >= 0, got {dt}")
    phi = math.exp(-dt / params.tau)
    return phi, params.variance_r0 * (1.0 - phi * phi)


@dataclass
class Gm1Process:
    """Scalar GM1 state machine advanced by externally supplied N(0,1) draws.

    A plain value type: one instance per Monte Carlo worker, no shared state.
    """

    params: Gm1Params
    state: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        phi, noise_var = gm1_discrete_coeffs(self.params, self.dt)
        self._phi = phi
        self._noise_sigma = math.sqrt(noise_var)

    def step(self, gaussian_draw: float) -> float:
        """Advance one epoch and return the new error value [m]."""
        self.state = self._phi * self.state + self._noise_sigma * gaussian_draw
        return self.state


def gm1_step(process: Gm1Process, gaussian_draw: float) -> float:
    """Advance `process` by one epoch; deterministic given (state, draw)."""
    return process.step(gaussian_draw)


def simulate_gm1(params: Gm1Params, dt: float, draws, initial_state: float = 0.0) -> np.ndarray:
    """Run the GM1 recursion over a whole sequence of N(0,1) draws at once.

    Equivalent to stepping a Gm1Process once per draw; returns the state after
    each step (the initial state is not included).  Used by the epoch engine
    and by long statistical checks where scalar stepping would be too slow.
    """
    phi, noise_var = gm1_discrete_coeffs(params, dt)
    scaled = math.sqrt(noise_var) * np.asarray(draws, dtype=float)
    out, _ = lfilter([1.0], [1.0, -phi], scaled, zi=np.array([phi * initial_state]))
    return out


def _check_elevation(elevation_deg: float) -> None:
    if not 0.0 < elevation_deg <= 90.0:
        raise ParameterError(f"elevation must be in (0, 90] deg, got {elevation_deg}")


def tropo_sigma(elevation_deg: float, zenith_sigma: float = DEFAULT_TROPO_ZENITH_SIGMA) -> float:
    """One-sigma tropospheric range error [m] at an elevation.

    Zenith sigma scaled by the mapping 1.001/sqrt(0.002001 + sin^2 El);
    strictly positive and non-increasing with elevation.
    """
    _check_elevation(elevation_deg)
    s = math.sin(math.radians(elevation_deg))
    return zenith_sigma * 1.001 / math.sqrt(0.002001 + s * s)


def iono_sigma(elevation_deg: float, vertical_sigma: float = DEFAULT_IONO_VERTICAL_SIGMA) -> float:
    """One-sigma residual ionospheric range error [m] at an elevation.

    Fixed vertical sigma scaled by the thin-shell obliquity
    F_pp(El) = (1 - (Re*cos(El)/(Re+hI))^2)^(-1/2).
    """
    _check_elevation(elevation_deg)
    ratio = EARTH_RADIUS_KM / (EARTH_RADIUS_KM + IONO_SHELL_HEIGHT_KM)
    c = ratio * math.cos(math.radians(elevation_deg))
    return vertical_sigma / math.sqrt(1.0 - c * c)


@dataclass(frozen=True)
class ErrorBudgetParams:
    """Configurable parameters of the four per-satellite error sources."""

    iono_tau: float = 360.0
    iono_vertical_sigma: float = DEFAULT_IONO_VERTICAL_SIGMA
    tropo_tau: float = 1800.0
    tropo_zenith_sigma: float = DEFAULT_TROPO_ZENITH_SIGMA
    orbit_clock: Gm1Params = Gm1Params(0.3, 3600.0)
    user: Gm1Params = Gm1Params(1.5, 100.0)

    def __post_init__(self):
        for name in ("iono_tau", "tropo_tau"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"{name} must be > 0")
        for name in ("iono_vertical_sigma", "tropo_zenith_sigma"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"{name} must be >= 0")

    def source_params(self, elevation_deg: float) -> tuple[Gm1Params, ...]:
        """GM1 parameters of (iono, tropo, orbit_clock, user) at an elevation."""
        return (
            Gm1Params(iono_sigma(elevation_deg, self.iono_vertical_sigma) ** 2, self.iono_tau),
            Gm1Params(tropo_sigma(elevation_deg, self.tropo_zenith_sigma) ** 2, self.tropo_tau),
            self.orbit_clock,
            self.user,
        )

    def total_variance(self, elevation_deg: float) -> float:
        """Stationary variance [m^2] of the summed range error at an elevation."""
        return sum(p.variance_r0 for p in self.source_params(elevation_deg))


@dataclass
class RangeErrorBudget:
    """The four GM1 error components carried by one satellite."""

    iono: Gm1Process
    tropo: Gm1Process
    orbit_clock: Gm1Process
    user: Gm1Process

    @property
    def processes(self) -> tuple[Gm1Process, ...]:
        return (self.iono, self.tropo, self.orbit_clock, self.user)

    def total(self) -> float:
        """Current summed range error [m] of the four components."""
        return sum(p.state for p in self.processes)


def build_budget(
    params: ErrorBudgetParams,
    elevation_deg: float,
    dt: float = 1.0,
    initial_draws=None,
) -> RangeErrorBudget:
    """Build one satellite's budget at an elevation.

    With `initial_draws` (four N(0,1) values) the component states start from
    their stationary distribution N(0, R(0)); otherwise they start at zero.
    """
    source_params = params.source_params(elevation_deg)
    if initial_draws is None:
        states = (0.0, 0.0, 0.0, 0.0)
    else:
        states = tuple(
            d * math.sqrt(p.variance_r0) for d, p in zip(initial_draws, source_params)
        )
    procs = [Gm1Process(p, state=s, dt=dt) for p, s in zip(source_params, states)]
    return RangeErrorBudget(*procs)


def sample_range_errors(budgets, gaussian_draws) -> np.ndarray:
    """Step every component of every budget; return per-satellite total errors [m].

    `gaussian_draws` has shape (n_satellites, 4), drawn for the sources in
    SOURCES order.
    """
    draws = np.asarray(gaussian_draws, dtype=float)
    if draws.shape != (len(budgets), len(SOURCES)):
        raise ParameterError(
            f"expected draws of shape {(len(budgets), len(SOURCES))}, got {draws.shape}"
        )
    out = np.empty(len(budgets))
    for i, budget in enumerate(budgets):
        out[i] = sum(p.step(d) for p, d in zip(budget.processes, draws[i]))
    return out
