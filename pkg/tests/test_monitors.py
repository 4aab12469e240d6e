import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vbdiag.errors import CalibrationError, ParameterError
from vbdiag.gm_noise import gm1_discrete_coeffs
from vbdiag.monitors import (
    BANK_ALPHAS,
    DIRECTIONS,
    MonitorBank,
    NoiseModels,
    along_gnss_sigma,
    detect,
    empirical_monitor_sigma,
    ewma_series,
    ewma_update,
    ewma_variance,
    false_alarm_quantile,
    fit_threshold_regression,
    monitor_sigma,
    raw_monitor_along,
    raw_monitor_lateral,
    threshold,
    warmup_updates,
)
from vbdiag.sim import ScenarioConfig, simulate_monitor_inputs


class TestRawMonitors:
    def test_along_equal_displacements(self):
        assert raw_monitor_along(0.5, 0.5) == 0.0

    def test_along_subtraction(self):
        assert_allclose(raw_monitor_along(1.2, 0.9), 0.3, rtol=1e-12)

    def test_lateral(self):
        assert raw_monitor_lateral(0.2, 0.2, "cross") == 0.0
        assert_allclose(raw_monitor_lateral(-0.4, 0.1, "vertical"), -0.5, rtol=1e-12)

    def test_lateral_direction_checked(self):
        with pytest.raises(ParameterError):
            raw_monitor_lateral(0.0, 0.0, "along")

    def test_fault_free_along_variance_matches_analytic(self, gps_skyplot, noise_models):
        # simulated raw-monitor variance vs the analytic differenced-GM value
        config = ScenarioConfig(skyplot="gps24.skyplot")
        q = simulate_monitor_inputs(config, 0.0, seed=5, n_epochs=10**6)
        heading = (gps_skyplot.faulty_satellite.azimuth + 0.0) % 360.0
        analytic = monitor_sigma(noise_models, 1.0, "along", gps_skyplot, heading)
        assert abs(np.var(q["along"]) / analytic**2 - 1.0) < 0.05

    def test_fault_free_lateral_variance_matches_analytic(self, gps_skyplot, noise_models):
        config = ScenarioConfig(skyplot="gps24.skyplot")
        q = simulate_monitor_inputs(config, 0.0, seed=6, n_epochs=10**6)
        heading = (gps_skyplot.faulty_satellite.azimuth + 0.0) % 360.0
        for direction in ("cross", "vertical"):
            analytic = monitor_sigma(noise_models, 1.0, direction, gps_skyplot, heading)
            assert abs(np.var(q[direction]) / analytic**2 - 1.0) < 0.05


class TestEwma:
    def test_alpha_one_returns_raw(self):
        assert ewma_update(3.7, 1.5, 1.0) == 1.5

    def test_geometric_series_on_constant_input(self):
        c = 2.0
        state = 0.0
        for k in range(1, 30):
            state = ewma_update(state, c, 0.2)
            assert_allclose(state, c * (1.0 - 0.8**k), rtol=1e-12)

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 1.0001, 2.0])
    def test_alpha_domain(self, alpha):
        with pytest.raises(ParameterError):
            ewma_update(0.0, 1.0, alpha)
        with pytest.raises(ParameterError):
            ewma_series([1.0], alpha)

    @pytest.mark.parametrize("alpha", BANK_ALPHAS)
    def test_sequential_equals_batch(self, alpha):
        # batch oracle: FFT convolution with the exponential weight sequence
        from scipy.signal import fftconvolve

        rng = np.random.default_rng(31)
        raw = rng.standard_normal(10**4)
        initial = 0.6
        seq = ewma_series(raw, alpha, initial=initial)
        n = len(raw)
        weights = alpha * (1.0 - alpha) ** np.arange(n)
        batch = fftconvolve(raw, weights)[:n]
        batch += initial * (1.0 - alpha) ** np.arange(1, n + 1)
        assert np.max(np.abs(seq - batch)) < 1e-12

    def test_series_matches_scalar_updates(self):
        rng = np.random.default_rng(13)
        raw = rng.standard_normal(200)
        for alpha in BANK_ALPHAS:
            state = 0.0
            scalar = []
            for value in raw:
                state = ewma_update(state, value, alpha)
                scalar.append(state)
            assert_allclose(ewma_series(raw, alpha), scalar, atol=1e-14)

    def test_output_is_convex_combination(self):
        rng = np.random.default_rng(41)
        raw = rng.uniform(-3.0, 5.0, 1000)
        for alpha in BANK_ALPHAS:
            out = ewma_series(raw, alpha, initial=0.0)
            lo = min(raw.min(), 0.0)
            hi = max(raw.max(), 0.0)
            assert np.all(out >= lo - 1e-12)
            assert np.all(out <= hi + 1e-12)

    def test_warmup_updates(self):
        assert warmup_updates(1.0) == 10
        assert warmup_updates(0.1) == 100
        assert warmup_updates(0.01) == 1000
        assert warmup_updates(0.001) == 10000


class TestEwmaVariance:
    def test_white_raw(self):
        assert_allclose(ewma_variance(1.0, [], white_variance=1.0), 1.0, rtol=1e-12)

    def test_white_alpha_point_one(self):
        got = math.sqrt(ewma_variance(0.1, [], white_variance=1.0))
        assert_allclose(got, math.sqrt(0.1 / 1.9), rtol=1e-12)
        assert round(got, 4) == 0.2294

    def test_phi_one_terms_are_inert(self):
        # dt = 0 gives phi = 1: the differenced process vanishes
        got = ewma_variance(0.3, [(2.0, 5.0, 1.0)], white_variance=0.7)
        assert_allclose(got, 0.3 / 1.7 * 0.7, rtol=1e-12)

    @pytest.mark.parametrize("alpha", [1.0, 0.1, 0.01])
    def test_against_monte_carlo_differenced_gm(self, alpha):
        # one GM term, coefficient 1: build the differenced series directly
        from vbdiag.gm_noise import Gm1Params, simulate_gm1

        var, tau, dt = 1.5, 100.0, 1.0
        rng = np.random.default_rng(77)
        g = simulate_gm1(Gm1Params(var, tau), dt, rng.standard_normal(4 * 10**5),
                         initial_state=rng.standard_normal() * math.sqrt(var))
        q = np.diff(g)
        phi, _ = gm1_discrete_coeffs(Gm1Params(var, tau), dt)
        analytic = ewma_variance(alpha, [(1.0, var, phi)])
        sample = np.var(ewma_series(q, alpha)[warmup_updates(alpha):])
        assert abs(sample / analytic - 1.0) < 0.08


class TestMonitorSigma:
    def test_ewma_members_are_ordered(self, gps_skyplot, noise_models):
        for direction in DIRECTIONS:
            sigmas = [
                monitor_sigma(noise_models, alpha, direction, gps_skyplot, 30.0)
                for alpha in BANK_ALPHAS
            ]
            assert sigmas[0] > sigmas[1] > sigmas[2] > sigmas[3] > 0.0

    def test_direction_checked(self, gps_skyplot, noise_models):
        with pytest.raises(ParameterError):
            monitor_sigma(noise_models, 0.1, "sideways", gps_skyplot, 0.0)

    def test_matches_monte_carlo_fallback(self, gps_skyplot, noise_models):
        # alpha=0.01 with GM-correlated inputs on the reference skyplot
        config = ScenarioConfig(skyplot="gps24.skyplot")
        heading = gps_skyplot.faulty_satellite.azimuth
        q = simulate_monitor_inputs(config, 0.0, seed=3, n_epochs=10**5)
        analytic = monitor_sigma(noise_models, 0.01, "along", gps_skyplot, heading)
        empirical = empirical_monitor_sigma(q["along"], 0.01)
        assert abs(empirical / analytic - 1.0) < 0.05

    def test_along_gnss_sigma_positive_and_heading_dependent(self, gps_skyplot, noise_models):
        values = {h: along_gnss_sigma(noise_models, gps_skyplot, h) for h in (0.0, 45.0, 90.0)}
        assert all(v > 0.0 for v in values.values())
        assert len({round(v, 9) for v in values.values()}) > 1


class TestThreshold:
    def test_quantile_value(self):
        assert_allclose(false_alarm_quantile(1e-7), 5.326723886278398, atol=1e-6)
        assert_allclose(threshold(1.0, 1e-7), 5.3267, atol=1e-4)

    def test_linear_in_sigma(self):
        assert_allclose(threshold(2.0, 1e-7), 2.0 * threshold(1.0, 1e-7), rtol=1e-12)

    def test_relaxed_quantile(self):
        assert_allclose(threshold(1.0, 0.0027), 3.000, atol=1e-3)

    def test_validation(self):
        with pytest.raises(ParameterError):
            threshold(0.0, 1e-7)
        with pytest.raises(ParameterError):
            threshold(1.0, 0.0)
        with pytest.raises(ParameterError):
            threshold(1.0, 1.0)


def _bank(direction, sigmas=(1.0, 0.5, 0.25, 0.1)):
    thresholds = tuple(threshold(s, 1e-7) for s in sigmas)
    return MonitorBank(direction=direction, sigmas=sigmas, thresholds=thresholds)


class TestDetect:
    def test_all_quiet(self):
        banks = [_bank(d) for d in DIRECTIONS]
        outcome = detect(banks, t=12.0)
        assert not outcome.detected
        assert outcome.direction is None
        assert outcome.t == 12.0

    def test_single_exceedance_reported(self):
        banks = [_bank(d) for d in DIRECTIONS]
        banks[0].update(6.0)  # raw threshold is 5.33
        outcome = detect(banks, t=1.0)
        assert outcome.detected
        assert outcome.direction == "along"
        assert outcome.alpha == 1.0
        assert outcome.exceed_ratio > 1.0

    def test_larger_ratio_wins(self):
        for order in ((6.0, 20.0), (20.0, 6.0)):
            banks = [_bank("along"), _bank("cross"), _bank("vertical")]
            banks[0].update(order[0])
            banks[1].update(order[1])
            outcome = detect(banks)
            expected = "along" if order[0] > order[1] else "cross"
            assert outcome.direction == expected

    def test_threshold_ties_do_not_detect(self):
        banks = [_bank("along")]
        banks[0].states = [banks[0].thresholds[0], 0.0, 0.0, 0.0]
        assert not detect(banks).detected

    def test_or_decision_is_monotone(self):
        # removing a non-triggering bank never converts detection to silence
        rng = np.random.default_rng(4)
        for _ in range(50):
            banks = [_bank(d) for d in DIRECTIONS]
            for bank in banks:
                bank.update(float(rng.uniform(-8.0, 8.0)))
            full = detect(banks)
            if not full.detected:
                continue
            triggering = [
                b for b in banks
                if any(abs(s) > t for s, t in zip(b.states, b.thresholds))
            ]
            assert detect(triggering).detected

    def test_warmup_flag_and_settled_only(self):
        banks = [_bank("along")]
        banks[0].update(6.0)  # first update: every member still warming up
        outcome = detect(banks, t=1.0)
        assert outcome.detected and outcome.warmup
        assert not detect(banks, settled_only=True).detected
        for _ in range(10):
            banks[0].update(6.0)
        settled = detect(banks, settled_only=True)
        assert settled.detected and settled.alpha == 1.0 and not settled.warmup

    def test_bank_invariants(self, gps_skyplot, noise_models):
        bank = MonitorBank.from_model(noise_models, "along", gps_skyplot, 30.0)
        kt = false_alarm_quantile(1e-7)
        assert_allclose(bank.thresholds, [kt * s for s in bank.sigmas], rtol=1e-12)
        rng = np.random.default_rng(9)
        inputs = rng.standard_normal(100)
        for value in inputs:
            bank.update(float(value))
        assert max(abs(s) for s in bank.states) <= np.max(np.abs(inputs)) + 1e-12


class TestThresholdRegression:
    def test_exact_line_through_origin(self):
        fit = fit_threshold_regression([(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)])
        assert_allclose((fit.slope, fit.intercept), (2.0, 0.0), atol=1e-12)
        assert fit.residual_rms < 1e-12

    def test_exact_affine_line(self):
        pts = [(x, 0.5 * x + 0.1) for x in (0.5, 1.0, 1.5, 2.0)]
        fit = fit_threshold_regression(pts)
        assert_allclose((fit.slope, fit.intercept), (0.5, 0.1), atol=1e-12)
        assert_allclose(fit.predict(3.0), 1.6, atol=1e-12)

    def test_too_few_points(self):
        with pytest.raises(CalibrationError):
            fit_threshold_regression([(1.0, 2.0)])

    def test_zero_predictor_variance(self):
        with pytest.raises(CalibrationError):
            fit_threshold_regression([(1.0, 2.0), (1.0, 3.0)])

    def test_predicts_monitor_sigma_across_headings(
        self, gps_skyplot, dual_skyplot, noise_models
    ):
        # calibration set spanning 6 headings x 2 skyplots; the line is fitted
        # per skyplot (mixing constellation families has no linear relation)
        headings = (0.0, 15.0, 30.0, 45.0, 60.0, 75.0)
        for plot in (gps_skyplot, dual_skyplot):
            for direction in DIRECTIONS:
                for alpha in BANK_ALPHAS:
                    pairs = [
                        (
                            along_gnss_sigma(noise_models, plot, h),
                            monitor_sigma(noise_models, alpha, direction, plot, h),
                        )
                        for h in headings
                    ]
                    fit = fit_threshold_regression(pairs)
                    for x, y in pairs:
                        assert abs(fit.predict(x) - y) <= 0.10 * y
