"""Generate the bundled reference skyplots (gps24.skyplot, dual54.skyplot).

Satellite positions come from idealized Walker constellations on circular
orbits, viewed from a fixed mid-latitude site at a fixed epoch:

  GPS:     24 satellites, 55 deg inclination, 6 planes x 4, a = 26560 km
  Galileo: 30 satellites, 56 deg inclination, 3 planes x 10, a = 29600 km

At the epoch t every satellite has advanced along its orbit by its mean
motion and the Earth has rotated under the constellation.  The epoch was
scanned once so that satellite G08 -- the designated fault carrier -- is
visible at a mid/low elevation in both files and carries a usable along-track
solution coefficient.  Both files share the same GPS geometry so single- and
dual-constellation campaigns see the identical fault.

Run from the repository root:  python tools/make_skyplots.py [--scan]
"""

import argparse
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from vbdiag.constellation import GALILEO, GPS, SatelliteState, Skyplot, write_skyplot
from vbdiag.gm_noise import ErrorBudgetParams
from vbdiag.monitors import track_solution

SITE_LAT = 45.0  # deg N
SITE_LON = 5.0  # deg E
EARTH_RADIUS = 6371.0  # km
MU_EARTH = 398600.4418  # km^3/s^2
SIDEREAL_DAY = 86164.0905  # s

#: generation horizon: rail sites sit low, with terrain and structures
#: obstructing much of the sky, so the reference files keep only well-visible
#: satellites.  The runtime mask (default 5 deg) never filters these.
MASK_ANGLE = 25.0  # deg

#: Galileo plane orientation relative to GPS at the epoch (a free choice;
#: the real inter-constellation RAAN offset drifts over the years)
GAL_RAAN0_DEG = 210.0

#: epoch chosen by the --scan mode (see module docstring)
CHOSEN_EPOCH_S = 19200.0

GPS_A = 26560.0  # km, semi-major axis
GAL_A = 29600.0  # km


def orbital_period(semi_major):
    return 2.0 * math.pi * math.sqrt(semi_major**3 / MU_EARTH)


def walker(n_sats, n_planes, phasing, inclination_deg, semi_major, raan0_deg, epoch_s):
    """ECI positions of a Walker delta constellation at the epoch."""
    per_plane = n_sats // n_planes
    inc = math.radians(inclination_deg)
    mean_motion_deg = 360.0 / orbital_period(semi_major)
    out = []
    for p in range(n_planes):
        raan = math.radians(raan0_deg + 360.0 / n_planes * p)
        for s in range(per_plane):
            u = math.radians(
                360.0 / per_plane * s
                + 360.0 * phasing / n_sats * p
                + mean_motion_deg * epoch_s
            )
            in_plane = np.array([math.cos(u), math.sin(u), 0.0])
            rot_inc = np.array(
                [[1, 0, 0], [0, math.cos(inc), -math.sin(inc)], [0, math.sin(inc), math.cos(inc)]]
            )
            rot_raan = np.array(
                [
                    [math.cos(raan), -math.sin(raan), 0],
                    [math.sin(raan), math.cos(raan), 0],
                    [0, 0, 1],
                ]
            )
            out.append(semi_major * (rot_raan @ rot_inc @ in_plane))
    return np.array(out)


def site_ecef():
    lat, lon = math.radians(SITE_LAT), math.radians(SITE_LON)
    return EARTH_RADIUS * np.array(
        [math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)]
    )


def az_el(sat_pos, site):
    """Azimuth/elevation of a satellite seen from the site (spherical Earth)."""
    lat, lon = math.radians(SITE_LAT), math.radians(SITE_LON)
    east = np.array([-math.sin(lon), math.cos(lon), 0.0])
    north = np.array(
        [-math.sin(lat) * math.cos(lon), -math.sin(lat) * math.sin(lon), math.cos(lat)]
    )
    up = site / np.linalg.norm(site)
    los = sat_pos - site
    los /= np.linalg.norm(los)
    e, n, u = los @ east, los @ north, los @ up
    az = math.degrees(math.atan2(e, n)) % 360.0
    el = math.degrees(math.asin(u))
    return az, el


def visible_satellites(epoch_s):
    """All satellites above the mask at the given epoch."""
    site = site_ecef()
    rot = -2.0 * math.pi * epoch_s / SIDEREAL_DAY  # ECI -> ECEF spin
    spin = np.array(
        [[math.cos(rot), -math.sin(rot), 0], [math.sin(rot), math.cos(rot), 0], [0, 0, 1]]
    )
    sats = []
    gps = walker(24, 6, 1, 55.0, GPS_A, raan0_deg=0.0, epoch_s=epoch_s)
    gal = walker(30, 3, 1, 56.0, GAL_A, raan0_deg=GAL_RAAN0_DEG, epoch_s=epoch_s)
    for i, pos in enumerate(gps):
        az, el = az_el(spin @ pos, site)
        if el > MASK_ANGLE:
            sats.append(SatelliteState(f"G{i + 1:02d}", GPS, round(az, 2) % 360.0, round(el, 2)))
    for i, pos in enumerate(gal):
        az, el = az_el(spin @ pos, site)
        if el > MASK_ANGLE:
            sats.append(SatelliteState(f"E{i + 1:02d}", GALILEO, round(az, 2) % 360.0, round(el, 2)))
    return sats


def geometry_report(epoch_s):
    """Key quality numbers of a candidate epoch, or None when G08 is not usable."""
    sats = visible_satellites(epoch_s)
    gps_sats = [s for s in sats if s.constellation == GPS]
    ids = {s.sat_id for s in gps_sats}
    if "G08" not in ids:
        return None
    g08 = next(s for s in gps_sats if s.sat_id == "G08")
    if not MASK_ANGLE + 3.0 <= g08.elevation <= 50.0:
        return None
    if len(gps_sats) < 5 or len(sats) < 7:
        return None
    budget = ErrorBudgetParams()
    report = {"epoch": epoch_s, "el": g08.elevation, "n_gps": len(gps_sats), "n_dual": len(sats)}
    for name, plot_sats in (("gps", gps_sats), ("dual", sats)):
        plot = Skyplot(tuple(plot_sats), "G08")
        rows0 = track_solution(plot, budget, g08.azimuth)  # heading toward G08
        rows75 = track_solution(plot, budget, (g08.azimuth + 75.0) % 360.0)
        f = plot.faulty_index
        report[f"s_along0_{name}"] = rows0[0, f]
        report[f"s_along75_{name}"] = rows75[0, f]
        report[f"s_vert_{name}"] = rows0[2, f]
    return report


def scan():
    print(" epoch  el(G08)  nGPS nDual  s_f0(gps) s_f75(gps)  s_f0(dual) s_f75(dual)")
    for epoch in np.arange(0.0, 2.0 * SIDEREAL_DAY, 300.0):
        r = geometry_report(epoch)
        if r is None:
            continue
        print(
            f"{r['epoch']:6.0f} {r['el']:8.2f} {r['n_gps']:5d} {r['n_dual']:5d} "
            f"{r['s_along0_gps']:10.3f} {r['s_along75_gps']:10.3f} "
            f"{r['s_along0_dual']:11.3f} {r['s_along75_dual']:10.3f}"
        )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scan", action="store_true", help="print candidate epochs instead of writing")
    parser.add_argument("--epoch", type=float, default=CHOSEN_EPOCH_S)
    args = parser.parse_args()
    if args.scan:
        scan()
        return

    data_dir = Path(__file__).resolve().parents[1] / "src" / "vbdiag" / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    sats = visible_satellites(args.epoch)
    gps_sats = [s for s in sats if s.constellation == GPS]
    header = (
        f"reference skyplot: Walker constellations, site {SITE_LAT:.1f}N {SITE_LON:.1f}E, "
        f"epoch {args.epoch:.0f} s, mask {MASK_ANGLE:.0f} deg"
    )
    write_skyplot(data_dir / "gps24.skyplot", gps_sats, header="gps24 " + header)
    write_skyplot(data_dir / "dual54.skyplot", sats, header="dual54 " + header)
    report = geometry_report(args.epoch)
    print(f"wrote {data_dir / 'gps24.skyplot'} ({len(gps_sats)} sats)")
    print(f"wrote {data_dir / 'dual54.skyplot'} ({len(sats)} sats)")
    print(report)


if __name__ == "__main__":
    main()
