"""Epoch-loop engine, Monte Carlo campaigns, and detection-time statistics.

Runs are independent and fully determined by (config, heading, run seed):
every random draw comes from a per-run generator, so campaigns produce
identical record sets for any worker count or execution order.
"""

from __future__ import annotations

import csv
import importlib.resources
import math
import multiprocessing
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from . import monitors
from .constellation import Skyplot, load_skyplot
from .errors import NoFailedRunsError, ParameterError, ScenarioError
from .faults import FaultProfile, HazardClass, classify_hazard, fault_bias_series
from .gm_noise import gm1_discrete_coeffs
from .monitors import BANK_ALPHAS, DIRECTIONS, NoiseModels, warmup_updates

DEFAULT_HEADINGS = (0.0, 15.0, 30.0, 45.0, 60.0, 75.0)
DEFAULT_SKYPLOT = "gps24.skyplot"
BUNDLED_SKYPLOTS = ("gps24.skyplot", "dual54.skyplot")


def bundled_skyplot_path(name: str) -> Path:
    """Filesystem path of a skyplot file shipped with the package."""
    resource = importlib.resources.files("vbdiag").joinpath("data", name)
    path = Path(str(resource))
    if not path.exists():
        raise ScenarioError(f"no bundled skyplot named {name!r}")
    return path


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one Monte Carlo experiment."""

    skyplot: str = DEFAULT_SKYPLOT
    heading_list: tuple[float, ...] = DEFAULT_HEADINGS
    fault: FaultProfile = FaultProfile()
    duration: float = 15000.0  # s
    dt: float = 1.0  # s
    reps: int = 10000
    failure_threshold: float = 20.0  # m
    p_fa: float = 1e-7
    master_seed: int = 0
    heading_relative_to_fault: bool = True
    use_track_map: bool = True
    speed: float = 83.3  # m/s; cancels out of the monitors, kept configurable
    balise_spacing: float = 2000.0  # m
    mask_angle: float = 5.0  # deg
    noise: NoiseModels = NoiseModels()
    tdsf_grid_min: float = -500.0
    tdsf_grid_max: float = 500.0
    tdsf_grid_step: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "heading_list", tuple(float(h) for h in self.heading_list))
        if self.reps < 1:
            raise ParameterError(f"reps must be >= 1, got {self.reps}")
        if self.dt <= 0.0:
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if self.duration <= self.fault.start:
            raise ParameterError(
                f"duration ({self.duration}) must exceed fault start ({self.fault.start})"
            )
        if self.failure_threshold <= 0.0:
            raise ParameterError(f"failure_threshold must be > 0, got {self.failure_threshold}")
        if not 0.0 < self.p_fa < 1.0:
            raise ParameterError(f"p_fa must be in (0, 1), got {self.p_fa}")
        if self.master_seed < 0:
            raise ParameterError(f"master_seed must be >= 0, got {self.master_seed}")
        if not self.heading_list:
            raise ParameterError("heading_list must not be empty")
        for h in self.heading_list:
            if not 0.0 <= h < 360.0:
                raise ParameterError(f"headings must be in [0, 360), got {h}")
        if self.speed < 0.0:
            raise ParameterError(f"speed must be >= 0, got {self.speed}")
        if self.balise_spacing <= 0.0:
            raise ParameterError(f"balise_spacing must be > 0, got {self.balise_spacing}")
        if not 0.0 <= self.mask_angle < 90.0:
            raise ParameterError(f"mask_angle must be in [0, 90), got {self.mask_angle}")
        if self.tdsf_grid_step <= 0.0:
            raise ParameterError(f"tdsf_grid_step must be > 0, got {self.tdsf_grid_step}")
        if self.tdsf_grid_max < self.tdsf_grid_min:
            raise ParameterError("tdsf_grid_max must be >= tdsf_grid_min")

    @property
    def n_steps(self) -> int:
        return int(self.duration / self.dt + 1e-9)

    def resolve_skyplot_path(self) -> Path:
        path = Path(self.skyplot)
        if path.exists():
            return path
        try:
            return bundled_skyplot_path(self.skyplot)
        except ScenarioError:
            raise ScenarioError(f"skyplot file not found: {self.skyplot!r}") from None

    def load_skyplot(self) -> Skyplot:
        return load_skyplot(
            self.resolve_skyplot_path(), self.fault.satellite, self.mask_angle
        )

    def tdsf_grid(self) -> np.ndarray:
        return np.arange(
            self.tdsf_grid_min, self.tdsf_grid_max + self.tdsf_grid_step / 2.0,
            self.tdsf_grid_step,
        )


@dataclass(frozen=True)
class RunRecord:
    """Fault, failure and detection times of one Monte Carlo run."""

    run_index: int
    heading: float
    t_fault: float
    t_failure: float | None
    t_detect: float | None
    direction: str | None
    alpha: float | None
    warmup: bool
    hazard: HazardClass

    @property
    def t_d(self) -> float | None:
        """Fault-to-detection time; None when the run was never detected."""
        if self.t_detect is None:
            return None
        return self.t_detect - self.t_fault

    @property
    def t_dsf(self) -> float | None:
        """Failure-to-detection time; negative when detection came first."""
        if self.t_detect is None or self.t_failure is None:
            return None
        return self.t_detect - self.t_failure


@dataclass(frozen=True)
class _RunContext:
    """Per-(config, heading) quantities shared by every run."""

    skyplot: Skyplot
    heading_abs: float
    track_rows: np.ndarray  # (3, n_sats)
    source_phis: np.ndarray  # (4,)
    stationary_sigmas: np.ndarray  # (n_sats, 4)
    noise_sigmas: np.ndarray  # (n_sats, 4)
    map_phi: float
    map_noise_sigma: float
    map_sigma: float
    directions: tuple[str, ...]
    thresholds: dict  # direction -> tuple per alpha
    bias: np.ndarray  # (n_steps + 1,)
    times: np.ndarray  # (n_steps + 1,)


@lru_cache(maxsize=32)
def _build_context(config: ScenarioConfig, heading: float) -> _RunContext:
    skyplot = config.load_skyplot()
    if config.heading_relative_to_fault:
        heading_abs = (skyplot.faulty_satellite.azimuth + heading) % 360.0
    else:
        heading_abs = heading
    budget = config.noise.budget
    track_rows = monitors.track_solution(skyplot, budget, heading_abs)

    n_sats = len(skyplot.satellites)
    source_phis = np.empty(4)
    stationary = np.empty((n_sats, 4))
    for j, sat in enumerate(skyplot.satellites):
        for s, params in enumerate(budget.source_params(sat.elevation)):
            source_phis[s], _ = gm1_discrete_coeffs(params, config.dt)
            stationary[j, s] = math.sqrt(params.variance_r0)
    noise_sigmas = stationary * np.sqrt(1.0 - source_phis[None, :] ** 2)

    map_params = config.noise.track_map.gm1_params()
    map_phi, map_noise_var = gm1_discrete_coeffs(map_params, config.dt)

    directions = DIRECTIONS if config.use_track_map else ("along",)
    thresholds = {}
    for direction in directions:
        sigmas = tuple(
            monitors.monitor_sigma(
                config.noise, alpha, direction, skyplot, heading_abs, config.dt
            )
            for alpha in BANK_ALPHAS
        )
        thresholds[direction] = tuple(monitors.threshold(s, config.p_fa) for s in sigmas)

    times = np.arange(config.n_steps + 1) * config.dt
    bias = fault_bias_series(config.fault, times)
    return _RunContext(
        skyplot=skyplot,
        heading_abs=heading_abs,
        track_rows=track_rows,
        source_phis=source_phis,
        stationary_sigmas=stationary,
        noise_sigmas=noise_sigmas,
        map_phi=map_phi,
        map_noise_sigma=math.sqrt(map_noise_var),
        map_sigma=config.noise.track_map.sigma_map,
        directions=directions,
        thresholds=thresholds,
        bias=bias,
        times=times,
    )


def _propagate(ctx: _RunContext, config: ScenarioConfig, rng) -> tuple[np.ndarray, dict]:
    """Simulate one run's error evolution.

    Returns the track-frame position-error history (n_steps+1, 3) and the raw
    monitor inputs per direction (n_steps each).  The true displacement
    cancels identically between the GNSS and sensor differences, so only
    error terms appear here and results are independent of train speed.
    """
    n_steps = config.n_steps
    n_sats = len(ctx.skyplot.satellites)

    # draw order is part of the determinism contract; see README
    init_gm = rng.standard_normal((n_sats, 4))
    gm_w = rng.standard_normal((n_steps, n_sats, 4))
    if config.use_track_map:
        init_map = rng.standard_normal(2)
        map_w = rng.standard_normal((n_steps, 2))
    odo_w = rng.standard_normal(n_steps)

    states0 = ctx.stationary_sigmas * init_gm  # stationary from epoch 0
    range_err = np.zeros((n_steps + 1, n_sats))
    range_err[0] = states0.sum(axis=1)
    for s in range(4):
        scaled = gm_w[:, :, s] * ctx.noise_sigmas[None, :, s]
        series, _ = lfilter(
            [1.0], [1.0, -ctx.source_phis[s]], scaled, axis=0,
            zi=(ctx.source_phis[s] * states0[:, s])[None, :],
        )
        range_err[1:] += series

    range_err[:, ctx.skyplot.faulty_index] += ctx.bias
    p = range_err @ ctx.track_rows.T  # (n_steps + 1, 3)

    dp = np.diff(p, axis=0)
    q = {"along": dp[:, 0] - config.noise.odometer.displacement_sigma * odo_w}
    if config.use_track_map:
        for axis, direction in enumerate(("cross", "vertical")):
            m0 = ctx.map_sigma * init_map[axis]
            series, _ = lfilter(
                [1.0], [1.0, -ctx.map_phi], ctx.map_noise_sigma * map_w[:, axis],
                zi=np.array([ctx.map_phi * m0]),
            )
            m_full = np.concatenate(([m0], series))
            q[direction] = dp[:, axis + 1] - np.diff(m_full)
    return p, q


def _first_fault_update(config: ScenarioConfig) -> int:
    """Index of the first monitor update at or after the fault onset."""
    return max(1, int(math.ceil(config.fault.start / config.dt - 1e-9)))


def _scan_detection(ctx: _RunContext, config: ScenarioConfig, q: dict):
    """First detection of the fault over the 12 (or 4) monitors.

    Monitor exceedances before the fault onset are false alarms, not the
    fault's detection, so the scan starts at the onset epoch (RunRecord
    times never precede t_fault).  The reported monitor is the one with the
    largest exceed ratio at the detection epoch; `warmup` says whether that
    monitor was still inside its warm-up window (fewer than 10/alpha
    updates).  Warm-up detections are reported, not suppressed; the flag is
    carried into the output for transparency.
    """
    k_min = _first_fault_update(config)
    series_by_monitor = {}
    k_detect = None
    for direction in ctx.directions:
        for alpha, thr in zip(BANK_ALPHAS, ctx.thresholds[direction]):
            series = monitors.ewma_series(q[direction], alpha)
            series_by_monitor[(direction, alpha)] = (series, thr)
            exceed = np.flatnonzero(np.abs(series[k_min - 1 :]) > thr)
            if exceed.size:
                first = int(exceed[0]) + k_min
                if k_detect is None or first < k_detect:
                    k_detect = first
    if k_detect is None:
        return None, None, None, False

    best = None
    for (direction, alpha), (series, thr) in series_by_monitor.items():
        ratio = abs(series[k_detect - 1]) / thr
        if ratio > 1.0 and (best is None or ratio > best[0]):
            best = (ratio, direction, alpha)
    _, direction, alpha = best
    warmup = k_detect < warmup_updates(alpha)
    return k_detect, direction, alpha, warmup


def run_once(
    config: ScenarioConfig,
    heading: float,
    run_seed,
    run_index: int = 0,
) -> RunRecord:
    """Simulate one run; deterministic for fixed (config, heading, run_seed)."""
    ctx = _build_context(config, float(heading))
    rng = np.random.default_rng(run_seed)
    p, q = _propagate(ctx, config, rng)

    along = p[:, 0]
    k_min = _first_fault_update(config)
    failure_mask = np.abs(along[k_min:]) > config.failure_threshold
    t_failure = None
    if failure_mask.any():
        t_failure = float(ctx.times[int(np.argmax(failure_mask)) + k_min])

    k_detect, direction, alpha, warmup = _scan_detection(ctx, config, q)
    t_detect = None if k_detect is None else float(k_detect * config.dt)

    hazard = classify_hazard(
        along,
        balise_spacing=config.balise_spacing,
        jump_threshold=config.failure_threshold,
        failure_level=config.failure_threshold,
    )
    return RunRecord(
        run_index=run_index,
        heading=float(heading),
        t_fault=float(config.fault.start),
        t_failure=t_failure,
        t_detect=t_detect,
        direction=direction,
        alpha=alpha,
        warmup=warmup,
        hazard=hazard,
    )


def run_seed(master_seed: int, heading_index: int, run_index: int) -> tuple[int, int, int]:
    """Seed material of one run; feeds numpy's SeedSequence unchanged."""
    return (master_seed, heading_index, run_index)


def _campaign_task(args):
    config, heading, heading_index, run_index = args
    seed = run_seed(config.master_seed, heading_index, run_index)
    return run_once(config, heading, seed, run_index=run_index)


def run_monte_carlo(config: ScenarioConfig, workers: int = 1) -> list[RunRecord]:
    """Run reps x headings independent runs.

    The record list is a pure function of (config, master_seed): per-run seeds
    mix (master_seed, heading_index, run_index), so any worker count yields
    the identical result in the identical order.
    """
    tasks = [
        (config, heading, h_idx, r)
        for h_idx, heading in enumerate(config.heading_list)
        for r in range(config.reps)
    ]
    if workers <= 1:
        return [_campaign_task(t) for t in tasks]
    chunk = max(1, len(tasks) // (workers * 8))
    with multiprocessing.get_context("fork").Pool(workers) as pool:
        return pool.map(_campaign_task, tasks, chunksize=chunk)


@dataclass(frozen=True)
class PmdCurve:
    """Missed-detection probability over a grid of times since failure."""

    grid: np.ndarray
    pmd: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        object.__setattr__(self, "pmd", np.asarray(self.pmd, dtype=float))

    def value_at(self, t_dsf: float) -> float:
        i = int(np.flatnonzero(np.isclose(self.grid, t_dsf))[0])
        return float(self.pmd[i])


def pmd_curve(records, grid=None) -> PmdCurve:
    """P_md(g): fraction of failed runs not yet detected g seconds after failure.

    Only runs that reached the failure level enter the curve; a run counts as
    missed at grid point g when it was never detected or its t_dsf exceeds g.
    """
    if grid is None:
        grid = np.arange(-500.0, 501.0, 1.0)
    grid = np.asarray(grid, dtype=float)
    failed = [r for r in records if r.t_failure is not None]
    if not failed:
        raise NoFailedRunsError("no run reached the positioning-failure level")
    tdsf = np.array(
        [r.t_dsf if r.t_dsf is not None else np.inf for r in failed], dtype=float
    )
    pmd = (tdsf[None, :] > grid[:, None]).mean(axis=1)
    return PmdCurve(grid=grid, pmd=pmd)


@dataclass(frozen=True)
class HeadingStats:
    """Detection-time statistics of one heading's record set."""

    heading: float
    e_td: float | None
    e_tdsf: float | None
    detected: int
    censored: int


def expected_times(records) -> list[HeadingStats]:
    """Mean T_d and T_dsf per heading, with censored (undetected) run counts.

    Means run over detected runs only; with zero detections they are None
    rather than a number.
    """
    by_heading: dict[float, list[RunRecord]] = {}
    for r in records:
        by_heading.setdefault(r.heading, []).append(r)
    stats = []
    for heading in sorted(by_heading):
        group = by_heading[heading]
        td = [r.t_d for r in group if r.t_d is not None]
        tdsf = [r.t_dsf for r in group if r.t_dsf is not None]
        stats.append(
            HeadingStats(
                heading=heading,
                e_td=float(np.mean(td)) if td else None,
                e_tdsf=float(np.mean(tdsf)) if tdsf else None,
                detected=len(td),
                censored=len(group) - len(td),
            )
        )
    return stats


# ---------------------------------------------------------------------------
# CSV reports


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, HazardClass):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


RECORDS_HEADER = (
    "run,heading_deg,t_fault_s,t_failure_s,t_detect_s,direction,alpha,"
    "t_d_s,t_dsf_s,warmup_flag,hazard_class"
)


def write_records_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORDS_HEADER.split(","))
        for r in records:
            writer.writerow(
                [
                    _fmt(r.run_index),
                    _fmt(r.heading),
                    _fmt(r.t_fault),
                    _fmt(r.t_failure),
                    _fmt(r.t_detect),
                    _fmt(r.direction),
                    _fmt(r.alpha),
                    _fmt(r.t_d),
                    _fmt(r.t_dsf),
                    _fmt(r.warmup),
                    _fmt(r.hazard),
                ]
            )


def write_pmd_csv(path, curves_by_heading) -> None:
    """`curves_by_heading`: iterable of (heading, PmdCurve)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["heading_deg", "t_dsf_s", "pmd"])
        for heading, curve in curves_by_heading:
            for g, p in zip(curve.grid, curve.pmd):
                writer.writerow([_fmt(float(heading)), _fmt(float(g)), _fmt(float(p))])


def write_summary_csv(path, stats, config: ScenarioConfig, skyplot: Skyplot) -> None:
    constellation = "GPS+GALILEO" if skyplot.is_dual else skyplot.satellites[0].constellation
    rate = config.fault.rate if config.fault.kind == "ramp" else None
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["heading_deg", "rate_mps", "constellation", "e_td_s", "e_tdsf_s", "censored_count"]
        )
        for s in stats:
            writer.writerow(
                [
                    _fmt(s.heading),
                    _fmt(rate),
                    constellation,
                    _fmt(s.e_td),
                    _fmt(s.e_tdsf),
                    _fmt(s.censored),
                ]
            )


def simulate_monitor_inputs(
    config: ScenarioConfig, heading: float, seed, n_epochs: int | None = None
) -> dict:
    """Fault-free raw-monitor inputs per direction, for calibration and
    statistical verification.  Returns arrays of length n_epochs."""
    fault = replace(config.fault, start=0.0, rate=0.0, magnitude=0.0)
    cfg = replace(config, fault=fault)
    if n_epochs is not None:
        cfg = replace(cfg, duration=n_epochs * config.dt)
    ctx = _build_context(cfg, float(heading))
    rng = np.random.default_rng(seed)
    _, q = _propagate(ctx, cfg, rng)
    return q
