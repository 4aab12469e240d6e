"""Command line front end: scenario parsing, campaign dispatch, CSV reports.

Scenario files are flat `key = value` text with dotted section keys
(`fault.rate`, `odometer.sigma_v`); `#` starts a comment.  Unset keys take
the default values of ScenarioConfig.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import monitors, sim
from .errors import ScenarioError, VbdiagError
from .faults import FaultProfile, classify_hazard
from .gm_noise import ErrorBudgetParams, Gm1Params
from .monitors import BANK_ALPHAS, NoiseModels
from .sensors import OdometerModel, TrackMapModel
from .sim import ScenarioConfig


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_heading_list(text: str) -> tuple[float, ...]:
    items = [part.strip() for part in text.split(",") if part.strip()]
    if not items:
        raise ValueError("heading_list must not be empty")
    return tuple(float(item) for item in items)


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return str(value)


#: scenario key -> (parser, getter); the getter pulls the current value out of
#: a ScenarioConfig so that serialize/parse round-trip exactly.
SCENARIO_KEYS = {
    "skyplot": (str, lambda c: c.skyplot),
    "heading_list": (_parse_heading_list, lambda c: c.heading_list),
    "duration": (float, lambda c: c.duration),
    "dt": (float, lambda c: c.dt),
    "reps": (int, lambda c: c.reps),
    "failure_threshold": (float, lambda c: c.failure_threshold),
    "p_fa": (float, lambda c: c.p_fa),
    "master_seed": (int, lambda c: c.master_seed),
    "heading_relative_to_fault": (_parse_bool, lambda c: c.heading_relative_to_fault),
    "use_track_map": (_parse_bool, lambda c: c.use_track_map),
    "speed": (float, lambda c: c.speed),
    "balise_spacing": (float, lambda c: c.balise_spacing),
    "mask_angle": (float, lambda c: c.mask_angle),
    "tdsf_grid.min": (float, lambda c: c.tdsf_grid_min),
    "tdsf_grid.max": (float, lambda c: c.tdsf_grid_max),
    "tdsf_grid.step": (float, lambda c: c.tdsf_grid_step),
    "fault.kind": (str, lambda c: c.fault.kind),
    "fault.satellite": (str, lambda c: c.fault.satellite),
    "fault.start": (float, lambda c: c.fault.start),
    "fault.rate": (float, lambda c: c.fault.rate),
    "fault.magnitude": (float, lambda c: c.fault.magnitude),
    "odometer.sigma_v": (float, lambda c: c.noise.odometer.sigma_v),
    "odometer.rate": (float, lambda c: c.noise.odometer.rate),
    "track_map.sigma": (float, lambda c: c.noise.track_map.sigma_map),
    "track_map.tau": (float, lambda c: c.noise.track_map.tau_map),
    "gm.iono.tau": (float, lambda c: c.noise.budget.iono_tau),
    "gm.iono.vertical_sigma": (float, lambda c: c.noise.budget.iono_vertical_sigma),
    "gm.tropo.tau": (float, lambda c: c.noise.budget.tropo_tau),
    "gm.tropo.zenith_sigma": (float, lambda c: c.noise.budget.tropo_zenith_sigma),
    "gm.orbit_clock.variance": (float, lambda c: c.noise.budget.orbit_clock.variance_r0),
    "gm.orbit_clock.tau": (float, lambda c: c.noise.budget.orbit_clock.tau),
    "gm.user.variance": (float, lambda c: c.noise.budget.user.variance_r0),
    "gm.user.tau": (float, lambda c: c.noise.budget.user.tau),
}


def parse_scenario_text(text: str, source: str = "<scenario>") -> ScenarioConfig:
    """Parse scenario text into a fully populated configuration."""
    values: dict[str, tuple[object, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"{source}: expected 'key = value'", line=lineno)
        key, _, value_text = line.partition("=")
        key = key.strip()
        value_text = value_text.strip()
        if key not in SCENARIO_KEYS:
            raise ScenarioError(f"{source}: unknown key {key!r}", line=lineno)
        if key in values:
            raise ScenarioError(f"{source}: duplicate key {key!r}", line=lineno)
        parser = SCENARIO_KEYS[key][0]
        try:
            values[key] = (parser(value_text), lineno)
        except ValueError as exc:
            raise ScenarioError(f"{source}: bad value for {key!r}: {exc}", line=lineno) from None
    return _assemble_config(values, source)


def parse_scenario(path) -> ScenarioConfig:
    """Read and parse a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from None
    return parse_scenario_text(text, source=str(path))


def _get(values, key, default):
    return values[key][0] if key in values else default


def _line_of(values, *keys):
    for key in keys:
        if key in values:
            return values[key][1]
    return None


def _assemble_config(values, source) -> ScenarioConfig:
    defaults = ScenarioConfig()
    try:
        fault = FaultProfile(
            kind=_get(values, "fault.kind", defaults.fault.kind),
            satellite=_get(values, "fault.satellite", defaults.fault.satellite),
            start=_get(values, "fault.start", defaults.fault.start),
            rate=_get(values, "fault.rate", defaults.fault.rate),
            magnitude=_get(values, "fault.magnitude", defaults.fault.magnitude),
        )
        noise = NoiseModels(
            budget=ErrorBudgetParams(
                iono_tau=_get(values, "gm.iono.tau", defaults.noise.budget.iono_tau),
                iono_vertical_sigma=_get(
                    values, "gm.iono.vertical_sigma", defaults.noise.budget.iono_vertical_sigma
                ),
                tropo_tau=_get(values, "gm.tropo.tau", defaults.noise.budget.tropo_tau),
                tropo_zenith_sigma=_get(
                    values, "gm.tropo.zenith_sigma", defaults.noise.budget.tropo_zenith_sigma
                ),
                orbit_clock=Gm1Params(
                    _get(values, "gm.orbit_clock.variance",
                         defaults.noise.budget.orbit_clock.variance_r0),
                    _get(values, "gm.orbit_clock.tau", defaults.noise.budget.orbit_clock.tau),
                ),
                user=Gm1Params(
                    _get(values, "gm.user.variance", defaults.noise.budget.user.variance_r0),
                    _get(values, "gm.user.tau", defaults.noise.budget.user.tau),
                ),
            ),
            odometer=OdometerModel(
                sigma_v=_get(values, "odometer.sigma_v", defaults.noise.odometer.sigma_v),
                rate=_get(values, "odometer.rate", defaults.noise.odometer.rate),
            ),
            track_map=TrackMapModel(
                sigma_map=_get(values, "track_map.sigma", defaults.noise.track_map.sigma_map),
                tau_map=_get(values, "track_map.tau", defaults.noise.track_map.tau_map),
            ),
        )
        config = ScenarioConfig(
            skyplot=_get(values, "skyplot", defaults.skyplot),
            heading_list=_get(values, "heading_list", defaults.heading_list),
            fault=fault,
            duration=_get(values, "duration", defaults.duration),
            dt=_get(values, "dt", defaults.dt),
            reps=_get(values, "reps", defaults.reps),
            failure_threshold=_get(values, "failure_threshold", defaults.failure_threshold),
            p_fa=_get(values, "p_fa", defaults.p_fa),
            master_seed=_get(values, "master_seed", defaults.master_seed),
            heading_relative_to_fault=_get(
                values, "heading_relative_to_fault", defaults.heading_relative_to_fault
            ),
            use_track_map=_get(values, "use_track_map", defaults.use_track_map),
            speed=_get(values, "speed", defaults.speed),
            balise_spacing=_get(values, "balise_spacing", defaults.balise_spacing),
            mask_angle=_get(values, "mask_angle", defaults.mask_angle),
            noise=noise,
            tdsf_grid_min=_get(values, "tdsf_grid.min", defaults.tdsf_grid_min),
            tdsf_grid_max=_get(values, "tdsf_grid.max", defaults.tdsf_grid_max),
            tdsf_grid_step=_get(values, "tdsf_grid.step", defaults.tdsf_grid_step),
        )
    except VbdiagError as exc:
        # attribute the violation to the most plausible offending line
        raise ScenarioError(f"{source}: {exc}", line=_violating_line(values, str(exc))) from None
    try:
        config.resolve_skyplot_path()
    except ScenarioError:
        raise ScenarioError(
            f"{source}: skyplot file not found: {config.skyplot!r}",
            line=_line_of(values, "skyplot"),
        ) from None
    return config


_CONSTRAINT_KEYS = {
    "reps": ("reps",),
    "dt": ("dt",),
    "duration": ("duration", "fault.start"),
    "failure_threshold": ("failure_threshold",),
    "p_fa": ("p_fa",),
    "master_seed": ("master_seed",),
    "heading": ("heading_list",),
    "speed": ("speed",),
    "balise_spacing": ("balise_spacing",),
    "mask_angle": ("mask_angle",),
    "tdsf_grid": ("tdsf_grid.step", "tdsf_grid.max", "tdsf_grid.min"),
    "fault": ("fault.kind", "fault.start", "fault.rate", "fault.magnitude"),
    "sigma_v": ("odometer.sigma_v",),
    "rate must": ("odometer.rate",),
    "sigma_map": ("track_map.sigma",),
    "tau_map": ("track_map.tau",),
    "tau": ("gm.iono.tau", "gm.tropo.tau", "gm.orbit_clock.tau", "gm.user.tau"),
    "variance_r0": ("gm.orbit_clock.variance", "gm.user.variance"),
}


def _violating_line(values, message):
    for marker, keys in _CONSTRAINT_KEYS.items():
        if marker in message:
            line = _line_of(values, *keys)
            if line is not None:
                return line
    return None


def serialize_scenario(config: ScenarioConfig) -> str:
    """Write a configuration back to scenario text (parse round-trips exactly)."""
    lines = ["# vbdiag scenario"]
    for key, (_, getter) in SCENARIO_KEYS.items():
        lines.append(f"{key} = {_fmt_value(getter(config))}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def _load_config(args) -> ScenarioConfig:
    if args.scenario is not None:
        config = parse_scenario(args.scenario)
    else:
        config = ScenarioConfig()
    if getattr(args, "seed", None) is not None:
        config = replace(config, master_seed=args.seed)
    if getattr(args, "reps", None) is not None:
        config = replace(config, reps=args.reps)
    return config


def _cmd_run(args) -> int:
    config = _load_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    skyplot = config.load_skyplot()

    records = sim.run_monte_carlo(config, workers=args.workers)
    sim.write_records_csv(out_dir / "records.csv", records)

    curves = []
    grid = config.tdsf_grid()
    for heading in config.heading_list:
        subset = [r for r in records if r.heading == heading]
        try:
            curves.append((heading, sim.pmd_curve(subset, grid)))
        except VbdiagError:
            pass  # no failed runs at this heading: nothing to plot
    sim.write_pmd_csv(out_dir / "pmd.csv", curves)

    stats = sim.expected_times(records)
    sim.write_summary_csv(out_dir / "summary.csv", stats, config, skyplot)
    print(f"wrote {out_dir / 'records.csv'}, {out_dir / 'pmd.csv'}, {out_dir / 'summary.csv'}")
    return 0


def _cmd_validate(args) -> int:
    config = _load_config(args)
    skyplot = config.load_skyplot()  # raises on geometry violations
    monitors.track_solution(skyplot, config.noise.budget, config.heading_list[0])
    n = len(skyplot.satellites)
    kind = "dual" if skyplot.is_dual else "single"
    print(
        f"scenario OK: {n} satellites ({kind} constellation), "
        f"fault on {skyplot.faulty_id}, {config.reps} reps x {len(config.heading_list)} headings"
    )
    return 0


def _cmd_calibrate(args) -> int:
    config = _load_config(args)
    skyplot = config.load_skyplot()
    headings = config.heading_list
    if len(headings) < 2:
        raise ScenarioError("calibration needs at least 2 headings in heading_list")

    def absolute(h):
        if config.heading_relative_to_fault:
            return (skyplot.faulty_satellite.azimuth + h) % 360.0
        return h

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "calibration.csv"
    directions = monitors.DIRECTIONS if config.use_track_map else ("along",)
    with open(out_path, "w", newline="") as fh:
        fh.write("direction,alpha,sigma,threshold,slope,intercept,residual_rms\n")
        for direction in directions:
            for alpha in BANK_ALPHAS:
                pairs = []
                for h in headings:
                    h_abs = absolute(h)
                    pairs.append(
                        (
                            monitors.along_gnss_sigma(config.noise, skyplot, h_abs),
                            monitors.monitor_sigma(
                                config.noise, alpha, direction, skyplot, h_abs, config.dt
                            ),
                        )
                    )
                fit = monitors.fit_threshold_regression(pairs)
                sigma = pairs[0][1]
                thr = monitors.threshold(sigma, config.p_fa)
                fh.write(
                    f"{direction},{alpha!r},{sigma!r},{thr!r},"
                    f"{fit.slope!r},{fit.intercept!r},{fit.residual_rms!r}\n"
                )
    print(f"wrote {out_path}")
    return 0


def _cmd_hazard_classify(args) -> int:
    path = Path(args.trace)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ScenarioError(f"cannot read trace file: {exc}") from None
    trace = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if lineno == 1 and parts and not _is_number(parts[-1]):
            continue  # header row
        if len(parts) != 2:
            raise ScenarioError(f"{path}: expected 't,along_error_m'", line=lineno)
        try:
            trace.append(float(parts[1]))
        except ValueError:
            raise ScenarioError(f"{path}: bad along_error_m value", line=lineno) from None
    hazard = classify_hazard(trace, balise_spacing=args.spacing)
    print(hazard.value)
    return 0


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vbdiag",
        description="GNSS virtual-balise fault-diagnostic simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=None):
        p.add_argument("--scenario", metavar="PATH", help="scenario file (defaults apply if omitted)")
        p.add_argument("--seed", type=int, metavar="U64", help="override master_seed")
        p.add_argument("--reps", type=int, metavar="N", help="override repetition count")
        if out_default is not None:
            p.add_argument("--out", metavar="DIR", default=out_default, help="output directory")

    p_run = sub.add_parser("run", help="run the Monte Carlo campaign and write CSV reports")
    common(p_run, out_default="out")
    p_run.add_argument("--workers", type=int, default=1, metavar="N", help="parallel workers")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="check scenario and skyplot invariants without simulating")
    common(p_val)
    p_val.set_defaults(func=_cmd_validate)

    p_cal = sub.add_parser("calibrate", help="fit the threshold-vs-geometry regression")
    common(p_cal, out_default="out")
    p_cal.set_defaults(func=_cmd_calibrate)

    p_haz = sub.add_parser("hazard-classify", help="classify an along-track error trace CSV")
    p_haz.add_argument("--trace", required=True, metavar="PATH", help="CSV with t,along_error_m")
    p_haz.add_argument("--spacing", type=float, default=2000.0, metavar="M", help="balise spacing")
    p_haz.set_defaults(func=_cmd_hazard_classify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VbdiagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
