import numpy as np
import pytest
from numpy.testing import assert_allclose

from vbdiag.errors import ParameterError
from vbdiag.faults import (
    FaultProfile,
    HazardClass,
    classify_hazard,
    fault_bias,
    fault_bias_series,
)


class TestFaultProfile:
    def test_defaults(self):
        profile = FaultProfile()
        assert profile.kind == "ramp"
        assert profile.start == 5000.0

    def test_validation(self):
        with pytest.raises(ParameterError):
            FaultProfile(kind="step")
        with pytest.raises(ParameterError):
            FaultProfile(start=-1.0)
        with pytest.raises(ParameterError):
            FaultProfile(rate=-0.1)
        with pytest.raises(ParameterError):
            FaultProfile(kind="jump", magnitude=-5.0)


class TestFaultBias:
    def test_ramp_onset(self):
        profile = FaultProfile(kind="ramp", rate=0.1, start=5000.0)
        assert fault_bias(profile, 5000.0) == 0.0

    def test_ramp_linear(self):
        profile = FaultProfile(kind="ramp", rate=0.1, start=5000.0)
        assert_allclose(fault_bias(profile, 6000.0), 100.0, rtol=1e-12)

    def test_jump_step(self):
        profile = FaultProfile(kind="jump", magnitude=50.0, start=5000.0)
        assert fault_bias(profile, 4999.0) == 0.0
        assert fault_bias(profile, 5001.0) == 50.0
        assert fault_bias(profile, 5000.0) == 50.0

    def test_negative_time_rejected(self):
        with pytest.raises(ParameterError):
            fault_bias(FaultProfile(), -1.0)

    @pytest.mark.parametrize(
        "profile",
        [
            FaultProfile(kind="ramp", rate=0.37, start=120.0),
            FaultProfile(kind="jump", magnitude=8.0, start=120.0),
        ],
    )
    def test_non_decreasing_and_zero_before_start(self, profile):
        times = np.linspace(0.0, 500.0, 2001)
        series = fault_bias_series(profile, times)
        assert np.all(np.diff(series) >= 0.0)
        assert np.all(series[times < profile.start] == 0.0)

    def test_series_matches_scalar(self):
        profile = FaultProfile(kind="ramp", rate=0.2, start=50.0)
        times = np.arange(0.0, 200.0, 1.0)
        series = fault_bias_series(profile, times)
        scalar = [fault_bias(profile, t) for t in times]
        assert_allclose(series, scalar, rtol=1e-15)


class TestClassifyHazard:
    def test_all_zero_trace(self):
        assert classify_hazard(np.zeros(100)) is HazardClass.NONE

    def test_multi_balise_jump(self):
        trace = np.concatenate([np.zeros(10), np.full(10, 4500.0)])
        assert classify_hazard(trace, balise_spacing=2000.0) is HazardClass.VB1A

    def test_single_balise_jump(self):
        trace = np.concatenate([np.zeros(10), np.full(10, 300.0)])
        assert classify_hazard(trace, balise_spacing=2000.0) is HazardClass.VB1B

    def test_slow_drift_to_failure_level(self):
        trace = 0.1 * np.arange(0.0, 201.0)  # reaches 20 m over 200 s
        assert classify_hazard(trace) is HazardClass.VB2

    def test_drift_below_failure_level(self):
        trace = 0.05 * np.arange(0.0, 201.0)  # tops out at 10 m
        assert classify_hazard(trace) is HazardClass.NONE

    def test_negative_drift_counts_by_magnitude(self):
        trace = -0.1 * np.arange(0.0, 201.0)
        assert classify_hazard(trace) is HazardClass.VB2

    def test_scale_consistency_for_jumps(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            jump = float(rng.uniform(25.0, 5000.0))
            spacing = float(rng.uniform(100.0, 3000.0))
            trace = np.concatenate([np.zeros(5), np.full(5, jump)])
            before = classify_hazard(trace, balise_spacing=spacing)
            if before not in (HazardClass.VB1A, HazardClass.VB1B):
                continue
            after = classify_hazard(2.0 * trace, balise_spacing=2.0 * spacing)
            assert after is before

    def test_empty_trace(self):
        with pytest.raises(ParameterError):
            classify_hazard([])

    def test_spacing_validated(self):
        with pytest.raises(ParameterError):
            classify_hazard([0.0, 1.0], balise_spacing=0.0)
