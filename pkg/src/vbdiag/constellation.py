"""Static satellite skyplots and the least-squares error geometry.

A skyplot is a fixed set of azimuth/elevation positions (geometry does not
evolve during a run).  Per-satellite range errors map into along-track /
cross-track / vertical position errors through a weighted least-squares
solution matrix and a heading-dependent track-frame rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GeometryError, ParameterError, SkyplotFormatError

GPS = "GPS"
GALILEO = "GALILEO"
CONSTELLATIONS = (GPS, GALILEO)

DEFAULT_MASK_ANGLE = 5.0  # deg

#: condition-number guard for the weighted normal matrix
_MAX_CONDITION = 1e10


@dataclass(frozen=True)
class SatelliteState:
    """One satellite of a static skyplot."""

    sat_id: str
    constellation: str
    azimuth: float  # deg, clockwise from north, [0, 360)
    elevation: float  # deg, (0, 90]

    def __post_init__(self):
        if self.constellation not in CONSTELLATIONS:
            raise ParameterError(f"unknown constellation {self.constellation!r}")
        if not 0.0 <= self.azimuth < 360.0:
            raise ParameterError(f"azimuth must be in [0, 360), got {self.azimuth}")
        if not 0.0 < self.elevation <= 90.0:
            raise ParameterError(f"elevation must be in (0, 90], got {self.elevation}")

    def line_of_sight(self) -> np.ndarray:
        """Unit ENU line-of-sight vector from the receiver to the satellite."""
        az = math.radians(self.azimuth)
        el = math.radians(self.elevation)
        return np.array(
            [math.cos(el) * math.sin(az), math.cos(el) * math.cos(az), math.sin(el)]
        )


@dataclass(frozen=True)
class Skyplot:
    """A fixed satellite geometry with one designated fault-bearing satellite."""

    satellites: tuple[SatelliteState, ...]
    faulty_id: str

    def __post_init__(self):
        object.__setattr__(self, "satellites", tuple(self.satellites))
        ids = [s.sat_id for s in self.satellites]
        if len(set(ids)) != len(ids):
            raise GeometryError("duplicate satellite ids in skyplot")
        if self.faulty_id not in ids:
            raise GeometryError(f"faulty satellite {self.faulty_id!r} not in skyplot")
        if len(self.satellites) < self.n_params:
            raise GeometryError(
                f"under-determined geometry: {len(self.satellites)} satellites "
                f"for {self.n_params} estimated parameters"
            )

    @property
    def is_dual(self) -> bool:
        return len({s.constellation for s in self.satellites}) == 2

    @property
    def n_params(self) -> int:
        # 3 position states + one clock state per constellation present
        return 5 if self.is_dual else 4

    @property
    def faulty_index(self) -> int:
        return self.index_of(self.faulty_id)

    def index_of(self, sat_id: str) -> int:
        for i, sat in enumerate(self.satellites):
            if sat.sat_id == sat_id:
                return i
        raise GeometryError(f"satellite {sat_id!r} not in skyplot")

    @property
    def faulty_satellite(self) -> SatelliteState:
        return self.satellites[self.faulty_index]

    def elevations(self) -> np.ndarray:
        return np.array([s.elevation for s in self.satellites])


def load_skyplot(path, faulty_id: str, mask_angle: float = DEFAULT_MASK_ANGLE) -> Skyplot:
    """Read a skyplot file and drop satellites at or below the mask angle.

    File format: one satellite per line, `constellation,id,azimuth_deg,
    elevation_deg`; `#` starts a comment.
    """
    path = Path(path)
    satellites = []
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise SkyplotFormatError(
                f"{path}:{lineno}: expected 'constellation,id,azimuth,elevation'"
            )
        constellation, sat_id = parts[0], parts[1]
        try:
            azimuth, elevation = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise SkyplotFormatError(f"{path}:{lineno}: {exc}") from None
        try:
            sat = SatelliteState(sat_id, constellation, azimuth, elevation)
        except ParameterError as exc:
            raise SkyplotFormatError(f"{path}:{lineno}: {exc}") from None
        if sat.elevation > mask_angle:
            satellites.append(sat)
    return Skyplot(tuple(satellites), faulty_id)


def write_skyplot(path, satellites, header: str = "") -> None:
    """Write satellites in the plain-text skyplot format."""
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.append("# constellation,id,azimuth_deg,elevation_deg")
    for sat in satellites:
        lines.append(
            f"{sat.constellation},{sat.sat_id},{sat.azimuth:.2f},{sat.elevation:.2f}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def geometry_matrix(skyplot: Skyplot) -> np.ndarray:
    """Design matrix of the linearized range equations (n_sats x n_params).

    Row i is [-e_east, -e_north, -e_up, 1] with e the unit line of sight; a
    fifth column flags Galileo satellites (second clock state) when both
    constellations are present.
    """
    n_params = skyplot.n_params
    n_sats = len(skyplot.satellites)
    if n_sats < n_params:
        raise GeometryError(
            f"under-determined geometry: {n_sats} satellites for {n_params} parameters"
        )
    G = np.zeros((n_sats, n_params))
    for i, sat in enumerate(skyplot.satellites):
        G[i, :3] = -sat.line_of_sight()
        G[i, 3] = 1.0
        if n_params == 5 and sat.constellation == GALILEO:
            G[i, 4] = 1.0
    return G


@dataclass(frozen=True)
class SolutionMatrix:
    """Spatial (east, north, up) rows of the weighted least-squares estimator."""

    spatial: np.ndarray  # (3, n_sats), m/m
    n_params: int

    def __post_init__(self):
        object.__setattr__(self, "spatial", np.asarray(self.spatial, dtype=float))


def solution_matrix(geometry: np.ndarray, weights) -> SolutionMatrix:
    """Weighted least-squares estimator S = (G'WG)^-1 G'W, spatial rows only.

    `weights` holds one inverse variance per satellite.  A (near-)singular
    normal matrix raises GeometryError; the run cannot continue without a
    position solution.
    """
    G = np.asarray(geometry, dtype=float)
    w = np.asarray(weights, dtype=float)
    if w.shape != (G.shape[0],):
        raise ParameterError(f"expected {G.shape[0]} weights, got shape {w.shape}")
    if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
        raise ParameterError("weights must be positive and finite")
    weighted = G * w[:, None]
    normal = G.T @ weighted
    if np.linalg.cond(normal) > _MAX_CONDITION:
        raise GeometryError("singular normal matrix: geometry does not support a solution")
    full = np.linalg.solve(normal, weighted.T)
    return SolutionMatrix(spatial=full[:3], n_params=G.shape[1])


@dataclass(frozen=True)
class TrackFrame:
    """Track frame fixed by the along-track azimuth [deg, clockwise from north]."""

    heading: float

    def __post_init__(self):
        if not 0.0 <= self.heading < 360.0:
            raise ParameterError(f"heading must be in [0, 360), got {self.heading}")


def enu_to_track(frame: TrackFrame) -> np.ndarray:
    """Rotation taking ENU vectors into (along, cross, vertical) coordinates."""
    h = math.radians(frame.heading)
    return np.array(
        [
            [math.sin(h), math.cos(h), 0.0],
            [math.cos(h), -math.sin(h), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )


def position_error(S: SolutionMatrix, frame: TrackFrame, range_errors) -> np.ndarray:
    """Track-frame position error (along, cross, vertical) [m] for one epoch's
    per-satellite range errors."""
    rho = np.asarray(range_errors, dtype=float)
    if rho.shape != (S.spatial.shape[1],):
        raise ParameterError(
            f"expected {S.spatial.shape[1]} range errors, got shape {rho.shape}"
        )
    return enu_to_track(frame) @ (S.spatial @ rho)
