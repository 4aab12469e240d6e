import numpy as np
import pytest

from vbdiag.constellation import SatelliteState, Skyplot
from vbdiag.monitors import NoiseModels
from vbdiag.sim import bundled_skyplot_path
from vbdiag import load_skyplot


@pytest.fixture(scope="session")
def gps_skyplot():
    return load_skyplot(bundled_skyplot_path("gps24.skyplot"), faulty_id="G08")


@pytest.fixture(scope="session")
def dual_skyplot():
    return load_skyplot(bundled_skyplot_path("dual54.skyplot"), faulty_id="G08")


@pytest.fixture(scope="session")
def noise_models():
    return NoiseModels()


def random_skyplot(rng, n_sats=None, dual=False):
    """A random valid skyplot for property tests."""
    if n_sats is None:
        n_sats = int(rng.integers(6, 13))
    sats = []
    for i in range(n_sats):
        constellation = "GALILEO" if dual and i % 2 else "GPS"
        prefix = "E" if constellation == "GALILEO" else "G"
        sats.append(
            SatelliteState(
                sat_id=f"{prefix}{i + 1:02d}",
                constellation=constellation,
                azimuth=float(rng.uniform(0.0, 360.0)),
                elevation=float(rng.uniform(8.0, 90.0)),
            )
        )
    return Skyplot(tuple(sats), faulty_id=sats[0].sat_id)
