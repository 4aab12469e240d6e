"""GNSS virtual-balise fault diagnostics.

Simulates a train-borne GNSS positioning fault monitor: per-satellite
Gauss-Markov range errors mapped through a fixed skyplot geometry into
track-frame position errors, watched by banks of raw and EWMA differential
monitors fed from odometry and track-geometry references, with ramp/jump
fault injection and a Monte Carlo missed-detection study engine.
"""

from .constellation import (
    SatelliteState,
    Skyplot,
    SolutionMatrix,
    TrackFrame,
    enu_to_track,
    geometry_matrix,
    load_skyplot,
    position_error,
    solution_matrix,
    write_skyplot,
)
from .errors import (
    CalibrationError,
    GeometryError,
    NoFailedRunsError,
    ParameterError,
    ScenarioError,
    SkyplotFormatError,
    VbdiagError,
)
from .faults import FaultProfile, HazardClass, classify_hazard, fault_bias
from .gm_noise import (
    ErrorBudgetParams,
    Gm1Params,
    Gm1Process,
    RangeErrorBudget,
    gm1_discrete_coeffs,
    gm1_step,
    iono_sigma,
    sample_range_errors,
    tropo_sigma,
)
from .monitors import (
    BANK_ALPHAS,
    DIRECTIONS,
    DetectionOutcome,
    MonitorBank,
    NoiseModels,
    ThresholdRegression,
    detect,
    ewma_update,
    fit_threshold_regression,
    monitor_sigma,
    raw_monitor_along,
    raw_monitor_lateral,
    threshold,
)
from .sensors import OdometerModel, TrackMapModel, map_coordinate_error, odometer_delta
from .sim import (
    PmdCurve,
    RunRecord,
    ScenarioConfig,
    expected_times,
    pmd_curve,
    run_monte_carlo,
    run_once,
)

__version__ = "0.1.0"
