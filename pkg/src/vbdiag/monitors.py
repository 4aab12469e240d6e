"""Differential monitors, EWMA banks, analytic sigmas, thresholds, detection.

Each direction (along, cross, vertical) carries a bank of four monitors: the
raw epoch-difference monitor (alpha = 1) and EWMA-averaged copies with
alpha in {0.1, 0.01, 0.001}.  Thresholds are k_T * sigma with k_T the
two-sided normal quantile of the per-monitor false-alarm probability, and
sigma the analytic fault-free standard deviation of the monitor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter
from scipy.stats import norm

from .constellation import Skyplot, TrackFrame, enu_to_track, geometry_matrix, solution_matrix
from .errors import CalibrationError, ParameterError
from .gm_noise import ErrorBudgetParams, gm1_discrete_coeffs
from .sensors import OdometerModel, TrackMapModel

DIRECTIONS = ("along", "cross", "vertical")
BANK_ALPHAS = (1.0, 0.1, 0.01, 0.001)
DEFAULT_P_FA = 1e-7

#: a monitor is treated as settled after 10/alpha updates
WARMUP_UPDATES_FACTOR = 10.0


@dataclass(frozen=True)
class NoiseModels:
    """Fault-free error-model summary used for analytic monitor calibration."""

    budget: ErrorBudgetParams = ErrorBudgetParams()
    odometer: OdometerModel = OdometerModel()
    track_map: TrackMapModel = TrackMapModel()


def raw_monitor_along(delta_gnss: float, delta_odo: float) -> float:
    """Along-track raw monitor: GNSS displacement minus odometer displacement."""
    return delta_gnss - delta_odo


def raw_monitor_lateral(delta_gnss: float, delta_map: float, direction: str) -> float:
    """Cross-track or vertical raw monitor: GNSS displacement minus the
    displacement of the map-projected coordinate."""
    if direction not in ("cross", "vertical"):
        raise ParameterError(f"direction must be 'cross' or 'vertical', got {direction!r}")
    return delta_gnss - delta_map


def ewma_update(prev: float, raw: float, alpha: float) -> float:
    """One EWMA step: alpha*raw + (1-alpha)*prev.  alpha = 1 is the raw monitor."""
    _check_alpha(alpha)
    return alpha * raw + (1.0 - alpha) * prev


def ewma_series(values, alpha: float, initial: float = 0.0) -> np.ndarray:
    """The EWMA recursion applied to a whole series (vectorized equivalent of
    repeated ewma_update calls)."""
    _check_alpha(alpha)
    arr = np.asarray(values, dtype=float)
    out, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], arr, zi=np.array([(1.0 - alpha) * initial]))
    return out


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ParameterError(f"alpha must be in (0, 1], got {alpha}")


def warmup_updates(alpha: float) -> int:
    """Number of updates a monitor needs before its detections stop being
    flagged as warm-up."""
    _check_alpha(alpha)
    return int(round(WARMUP_UPDATES_FACTOR / alpha))


def ewma_variance(alpha: float, gm_terms, white_variance: float = 0.0) -> float:
    """Steady-state variance of an EWMA fed by differenced GM1 noise plus
    per-epoch white noise.

    `gm_terms` is an iterable of (coef_sq, variance, phi): each term stands for
    coefficient * (g(k) - g(k-1)) in the raw input, with g a stationary GM1
    process of the given variance and per-step decay phi.  The raw input
    autocovariance then is

        C(0) = sum coef_sq*2*var*(1-phi) + white_variance
        C(l) = -sum coef_sq*var*(1-phi)^2*phi^(l-1),   l >= 1

    and propagating it through the EWMA weights alpha*(1-alpha)^i gives

        Var = alpha/(2-alpha) * (C(0) + 2*sum_{l>=1} (1-alpha)^l * C(l))

    where the lag sum is the closed-form geometric series used below.
    alpha = 1 reduces to the raw-monitor variance C(0).
    """
    _check_alpha(alpha)
    beta = 1.0 - alpha
    lag0 = float(white_variance)
    tail = 0.0
    for coef_sq, var, phi in gm_terms:
        one_minus = 1.0 - phi
        lag0 += coef_sq * 2.0 * var * one_minus
        tail -= coef_sq * var * one_minus * one_minus * beta / (1.0 - beta * phi)
    return alpha / (2.0 - alpha) * (lag0 + 2.0 * tail)


def satellite_weights(budget: ErrorBudgetParams, skyplot: Skyplot) -> np.ndarray:
    """Least-squares weights: inverse stationary range-error variance per satellite."""
    return np.array([1.0 / budget.total_variance(s.elevation) for s in skyplot.satellites])


def track_solution(skyplot: Skyplot, budget: ErrorBudgetParams, heading: float) -> np.ndarray:
    """Track-frame solution rows (3 x n_sats): row d maps per-satellite range
    errors to the (along, cross, vertical)[d] position error."""
    G = geometry_matrix(skyplot)
    S = solution_matrix(G, satellite_weights(budget, skyplot))
    return enu_to_track(TrackFrame(heading)) @ S.spatial


def along_gnss_sigma(models: NoiseModels, skyplot: Skyplot, heading: float) -> float:
    """Standard deviation [m] of the along-track GNSS position error under the
    nominal (fault-free) model; the predictor of the threshold regression."""
    a = track_solution(skyplot, models.budget, heading)[0]
    var = sum(
        coef * coef * models.budget.total_variance(sat.elevation)
        for coef, sat in zip(a, skyplot.satellites)
    )
    return math.sqrt(var)


def monitor_sigma(
    models: NoiseModels,
    alpha: float,
    direction: str,
    skyplot: Skyplot,
    heading: float,
    dt: float = 1.0,
) -> float:
    """Fault-free steady-state standard deviation [m] of one bank monitor.

    Propagates the GM1 autocovariances of every satellite error source through
    the epoch differencing and the EWMA recursion; the odometer contributes
    white noise to the along channel and the track map a differenced GM1 term
    to the lateral channels.
    """
    if direction not in DIRECTIONS:
        raise ParameterError(f"unknown direction {direction!r}")
    row = track_solution(skyplot, models.budget, heading)[DIRECTIONS.index(direction)]
    terms = []
    for coef, sat in zip(row, skyplot.satellites):
        for params in models.budget.source_params(sat.elevation):
            phi, _ = gm1_discrete_coeffs(params, dt)
            terms.append((coef * coef, params.variance_r0, phi))
    if direction == "along":
        white = models.odometer.displacement_sigma**2
    else:
        white = 0.0
        map_params = models.track_map.gm1_params()
        phi, _ = gm1_discrete_coeffs(map_params, dt)
        terms.append((1.0, map_params.variance_r0, phi))
    return math.sqrt(ewma_variance(alpha, terms, white))


def empirical_monitor_sigma(raw_inputs, alpha: float, discard: int | None = None) -> float:
    """Monte Carlo fallback calibrator: sample sigma of the EWMA of observed
    fault-free raw-monitor inputs, with the spin-up prefix discarded."""
    series = ewma_series(raw_inputs, alpha)
    if discard is None:
        discard = warmup_updates(alpha)
    settled = series[discard:]
    if settled.size < 2:
        raise CalibrationError("not enough samples beyond the warm-up window")
    return float(np.std(settled, ddof=1))


def false_alarm_quantile(p_fa: float) -> float:
    """Two-sided standard-normal quantile k_T for a per-monitor false-alarm
    probability."""
    if not 0.0 < p_fa < 1.0:
        raise ParameterError(f"p_fa must be in (0, 1), got {p_fa}")
    return float(norm.ppf(1.0 - p_fa / 2.0))


def threshold(sigma: float, p_fa: float = DEFAULT_P_FA) -> float:
    """Detection threshold T = k_T * sigma."""
    if sigma <= 0.0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    return false_alarm_quantile(p_fa) * sigma


@dataclass
class MonitorBank:
    """Raw + EWMA monitors of one direction with their analytic thresholds.

    A per-run value: one set of three banks per Monte Carlo worker.
    """

    direction: str
    sigmas: tuple[float, ...]
    thresholds: tuple[float, ...]
    alphas: tuple[float, ...] = BANK_ALPHAS
    states: list[float] = field(default_factory=list)
    updates: int = 0

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ParameterError(f"unknown direction {self.direction!r}")
        if not (len(self.sigmas) == len(self.thresholds) == len(self.alphas)):
            raise ParameterError("sigmas, thresholds and alphas must align")
        if not self.states:
            self.states = [0.0] * len(self.alphas)

    @classmethod
    def from_model(
        cls,
        models: NoiseModels,
        direction: str,
        skyplot: Skyplot,
        heading: float,
        p_fa: float = DEFAULT_P_FA,
        dt: float = 1.0,
    ) -> "MonitorBank":
        sigmas = tuple(
            monitor_sigma(models, alpha, direction, skyplot, heading, dt)
            for alpha in BANK_ALPHAS
        )
        thresholds = tuple(threshold(s, p_fa) for s in sigmas)
        return cls(direction=direction, sigmas=sigmas, thresholds=thresholds)

    def update(self, raw: float) -> None:
        """Feed one raw-monitor value to every member of the bank."""
        self.states = [
            ewma_update(prev, raw, alpha) for prev, alpha in zip(self.states, self.alphas)
        ]
        self.updates += 1

    def settled(self, index: int) -> bool:
        """Whether member `index` is past its warm-up window."""
        return self.updates >= warmup_updates(self.alphas[index])


@dataclass(frozen=True)
class DetectionOutcome:
    """Result of one detection decision over a set of banks."""

    detected: bool
    t: float
    direction: str | None
    alpha: float | None
    exceed_ratio: float
    warmup: bool


def detect(banks, t: float = 0.0, settled_only: bool = False) -> DetectionOutcome:
    """OR-decision over every monitor in the given banks.

    Detected iff at least one monitor exceeds its threshold in magnitude; the
    outcome reports the monitor with the largest |value|/threshold ratio and
    whether that monitor is still inside its warm-up window.  With
    `settled_only`, monitors in warm-up are excluded from the decision.
    """
    best_ratio = 0.0
    best = None
    for bank in banks:
        for i, (state, thr, alpha) in enumerate(
            zip(bank.states, bank.thresholds, bank.alphas)
        ):
            if settled_only and not bank.settled(i):
                continue
            ratio = abs(state) / thr
            if best is None or ratio > best_ratio:
                best_ratio = ratio
                best = (bank.direction, alpha, not bank.settled(i))
    if best is None or best_ratio <= 1.0:
        return DetectionOutcome(False, t, None, None, best_ratio, False)
    return DetectionOutcome(True, t, best[0], best[1], best_ratio, best[2])


@dataclass(frozen=True)
class ThresholdRegression:
    """OLS line predicting a monitor sigma from the along-track GNSS sigma."""

    slope: float
    intercept: float
    residual_rms: float

    def predict(self, along_sigma: float) -> float:
        return self.slope * along_sigma + self.intercept


def fit_threshold_regression(calibration_pairs) -> ThresholdRegression:
    """Fit the threshold-vs-geometry line from (along_gnss_sigma, monitor_sigma)
    calibration points gathered over headings/skyplots."""
    pairs = list(calibration_pairs)
    if len(pairs) < 2:
        raise CalibrationError(f"need at least 2 calibration points, got {len(pairs)}")
    x = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs], dtype=float)
    if np.ptp(x) == 0.0:
        raise CalibrationError("zero variance in the predictor; cannot fit a line")
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    return ThresholdRegression(
        slope=float(slope),
        intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(residuals**2))),
    )
