import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decoyqkd import channel, keyrate
from decoyqkd.channel import ChannelModel
from decoyqkd.decoy import EstimateMethod, SinglePhotonEstimate
from decoyqkd.errors import MissingEstimateError, NoCrossingError
from decoyqkd.keyrate import Method, RateInputs, RateSettings

LOSSLESS = ChannelModel(alpha=0.0, eta_bob=1.0, y0=0.0, e_detector=0.0)


def decoy_rate_oracle(distance, mu, alpha=0.21, eta_bob=0.045, y0=1.7e-6, ed=0.033, f=1.22):
    """Practical decoy rate computed from scratch at 40 digits."""
    with mpmath.workdps(40):
        mp = mpmath.mpf
        eta = mp(eta_bob) * mp(10) ** (-mp(alpha) * mp(distance) / 10)
        mu, y0, ed = mp(mu), mp(y0), mp(ed)
        q = 1 - (1 - y0) * mpmath.e ** (-eta * mu)
        e = (ed * (1 - mpmath.e ** (-eta * mu)) + y0 / 2) / q
        y1 = eta + y0 - eta * y0
        e1 = (ed * eta + y0 / 2) / y1

        def h(p):
            return -p * mpmath.log(p, 2) - (1 - p) * mpmath.log(1 - p, 2)

        return float(-q * f * h(e) + y1 * mu * mpmath.e ** -mu * (1 - h(e1)))


def estimate(y1, e1):
    return SinglePhotonEstimate(EstimateMethod.EXACT, y0=0.0, y1=y1, e1=e1)


class TestRateDecoy:
    def test_noiseless_single_photon_limit(self):
        mu, q_mu = 0.5, 1e-3
        y1 = q_mu / (mu * math.exp(-mu))
        r = keyrate.rate_decoy(RateInputs(mu, q_mu, 0.0, estimate(y1, 0.0), f_ec=1.22, q_protocol=0.5))
        assert r.rate == pytest.approx(0.5 * q_mu, rel=1e-14)
        assert r.method is Method.DECOY

    def test_random_single_photon_errors_give_nothing(self):
        r = keyrate.rate_decoy(RateInputs(0.5, 1e-3, 0.03, estimate(1e-3, 0.5)))
        assert r.rate == 0.0
        assert r.raw < 0.0

    def test_missing_estimate(self):
        with pytest.raises(MissingEstimateError):
            keyrate.rate_decoy(RateInputs(0.5, 1e-3, 0.03, None))
        with pytest.raises(MissingEstimateError):
            keyrate.rate_decoy(RateInputs(0.5, 1e-3, 0.03, SinglePhotonEstimate(EstimateMethod.GLLP, omega_bound=0.9)))

    def test_gys_100km(self, gys_model, gys_settings):
        inputs = keyrate.inputs_from_model(gys_model, 100.0, 0.48, Method.DECOY, gys_settings)
        r = keyrate.rate_decoy(inputs)
        assert r.rate > 0.0
        assert r.rate == pytest.approx(decoy_rate_oracle(100.0, 0.48), rel=1e-9)

    def test_f_ec_validation(self):
        with pytest.raises(ValueError):
            RateInputs(0.5, 1e-3, 0.03, None, f_ec=0.9)


class TestRateGllpOnly:
    def test_small_mu_limit_matches_decoy_form(self, gys_model):
        mu = 1e-6
        eta = channel.transmittance(gys_model, 0.0).eta
        q = channel.gain(gys_model, eta, mu)
        e = channel.qber_mu(gys_model, eta, mu)
        gllp = keyrate.rate_gllp_only(RateInputs(mu, q, e, f_ec=1.0)).raw
        ideal = keyrate.rate_ideal(RateInputs(mu, q, e, estimate(q / (mu * math.exp(-mu)), e))).raw
        assert gllp == pytest.approx(ideal, rel=1e-4)

    def test_zero_omega(self):
        from decoyqkd.decoy import multi_photon_probability

        p = multi_photon_probability(0.5)
        r = keyrate.rate_gllp_only(RateInputs(0.5, p, 0.02, f_ec=1.0))
        assert r.components["omega"] == 0.0
        assert r.rate == 0.0

    def test_dead_at_50km(self, gys_model, gys_settings):
        _, r = keyrate.optimize_mu(gys_model, 50.0, Method.GLLP, settings=gys_settings)
        assert r.rate == 0.0

    def test_ratio_above_half_kills_single_photon_term(self):
        r = keyrate.rate_gllp_only(RateInputs(0.9, 0.3, 0.3, f_ec=1.0))
        assert not r.components["single_photon_term_valid"]


class TestRateIdeal:
    def test_equals_decoy_at_unit_inefficiency(self, gys_model):
        inputs = keyrate.inputs_from_model(gys_model, 60.0, 0.5, Method.DECOY, RateSettings(f_ec=1.0))
        assert keyrate.rate_ideal(inputs).rate == keyrate.rate_decoy(inputs).rate

    @pytest.mark.parametrize("e", [0.05, 0.1, 0.11, 0.12, 0.2])
    def test_all_single_photon(self, e):
        q, mu = 1e-3, 0.5
        r = keyrate.rate_ideal(RateInputs(mu, q, e, estimate(q / (mu * math.exp(-mu)), e)))
        assert (r.rate > 0.0) == (keyrate.binary_entropy(e) < 0.5)
        if r.rate > 0.0:
            assert r.rate == pytest.approx(q * (1 - 2 * keyrate.binary_entropy(e)), rel=1e-12)

    def test_dominates_practical(self, gys_model, gys_settings):
        for d in np.arange(0.0, 160.0, 10.0):
            for mu in (0.1, 0.3, 0.5, 0.8):
                inputs = keyrate.inputs_from_model(gys_model, d, mu, Method.DECOY, gys_settings)
                assert keyrate.rate_ideal(inputs).rate >= keyrate.rate_decoy(inputs).rate


class TestInvariants:
    def test_decoy_dominates_gllp(self, gys_model):
        s = RateSettings(f_ec=1.22, gllp_f_ec=1.22)
        for d in np.arange(0.0, 221.0, 10.0):
            for mu in np.concatenate([np.logspace(-4, 0, 15), [1.5, 2.0]]):
                inputs = keyrate.inputs_from_model(gys_model, d, mu, Method.DECOY, s)
                assert keyrate.rate_decoy(inputs).rate >= keyrate.rate_gllp_only(inputs).rate

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.0, 250.0), st.floats(1e-4, 2.0), st.sampled_from(list(Method)))
    def test_audit_and_clamp(self, distance, mu, method):
        from decoyqkd.config import gys

        prof = gys()
        inputs = keyrate.inputs_from_model(prof.channel, distance, mu, method, prof.settings)
        r = keyrate.key_rate(inputs, method)
        assert r.rate >= 0.0
        assert r.audit() == pytest.approx(r.raw, rel=1e-12, abs=1e-300)
        assert r.rate == max(0.0, r.raw)

    @pytest.mark.parametrize("method", list(Method))
    def test_vectorised_curve_matches_scalar_path(self, gys_model, gys_settings, method):
        for d in (0.0, 25.0, 90.0, 180.0):
            eta = channel.transmittance(gys_model, d).eta
            mus = np.array([1e-4, 3e-3, 0.05, 0.48, 1.3, 2.0])
            curve = keyrate.rate_curve(gys_model, eta, mus, method, gys_settings)
            scalar = [keyrate.key_rate(keyrate.inputs_from_model(gys_model, d, m, method, gys_settings), method).raw
                      for m in mus]
            np.testing.assert_allclose(curve, scalar, rtol=1e-9, atol=1e-13)


class TestOptimizeMu:
    def test_decoy_mid_range(self, gys_model, gys_settings):
        mu, r = keyrate.optimize_mu(gys_model, 40.0, Method.DECOY, settings=gys_settings)
        assert mu == pytest.approx(0.5, abs=0.1)
        assert r.secure

    def test_gllp_order_eta(self, gys_model, gys_settings):
        mu, r = keyrate.optimize_mu(gys_model, 20.0, Method.GLLP, settings=gys_settings)
        assert 0.0 < mu < 0.05
        assert r.secure

    def test_lossless_noiseless(self):
        mu, r = keyrate.optimize_mu(LOSSLESS, 0.0, Method.DECOY)
        # brute-force oracle over the scalar path at 1e-3 resolution
        grid = np.arange(1e-3, 2.0, 1e-3)
        brute = [keyrate.rate_decoy(keyrate.inputs_from_model(LOSSLESS, 0.0, m)).rate for m in grid[::10]]
        assert 0.0 < mu < 2.0
        assert mu == pytest.approx(grid[::10][int(np.argmax(brute))], abs=1e-2)
        assert r.rate >= max(brute)
        assert r.rate == pytest.approx(1 / math.e, rel=1e-9)

    def test_beats_brute_force_scan(self, gys_model, gys_settings):
        for method, d in ((Method.DECOY, 120.0), (Method.GLLP, 30.0)):
            _, r = keyrate.optimize_mu(gys_model, d, method, settings=gys_settings)
            grid = np.linspace(1e-4, 2.0, 400)
            brute = max(keyrate.key_rate(keyrate.inputs_from_model(gys_model, d, m, method, gys_settings), method).rate
                        for m in grid)
            assert r.rate >= brute

    def test_deterministic(self, gys_model, gys_settings):
        a = keyrate.optimize_mu(gys_model, 77.7, Method.DECOY, settings=gys_settings)
        b = keyrate.optimize_mu(gys_model, 77.7, Method.DECOY, settings=gys_settings)
        assert a[0] == b[0]
        assert a[1].rate == b[1].rate

    def test_no_secure_rate_sentinel(self, gys_model, gys_settings):
        mu, r = keyrate.optimize_mu(gys_model, 100.0, Method.GLLP, settings=gys_settings)
        assert mu == 0.0
        assert r.rate == 0.0 and not r.secure

    def test_range_validation(self, gys_model):
        with pytest.raises(ValueError):
            keyrate.optimize_mu(gys_model, 10.0, Method.DECOY, mu_range=(0.0, 3.0))


class TestDistances:
    def test_decoy_beyond_140(self, gys_model, gys_settings):
        assert keyrate.max_secure_distance(gys_model, Method.DECOY, gys_settings) > 140.0

    def test_gllp_regression(self, gys_model, gys_settings):
        # frozen from this implementation; the published figure reads ~30 km
        assert keyrate.max_secure_distance(gys_model, Method.GLLP, gys_settings) == pytest.approx(43.79, abs=0.1)

    def test_lossless_hits_cap(self):
        assert keyrate.max_secure_distance(LOSSLESS, Method.DECOY) == 500.0
        assert keyrate.max_secure_distance(LOSSLESS, Method.DECOY, RateSettings(distance_cap_km=80.0)) == 80.0

    def test_dead_at_zero_distance(self):
        noisy = ChannelModel(alpha=0.21, eta_bob=0.045, y0=1.7e-6, e_detector=0.2)
        assert keyrate.max_secure_distance(noisy, Method.DECOY) == 0.0

    def test_rate_positive_just_inside(self, gys_model, gys_settings):
        d = keyrate.max_secure_distance(gys_model, Method.DECOY, gys_settings)
        assert keyrate.optimize_mu(gys_model, d - 0.2, Method.DECOY, settings=gys_settings)[1].secure
        assert not keyrate.optimize_mu(gys_model, d + 0.2, Method.DECOY, settings=gys_settings)[1].secure

    def test_ceiling(self, gys_model):
        c = keyrate.intercept_resend_ceiling(gys_model)
        assert c == pytest.approx(208.0, abs=3.0)
        eta = channel.transmittance(gys_model, c).eta
        assert channel.qber_n(gys_model, eta, 1) == pytest.approx(0.25, abs=1e-8)

    def test_ceiling_closed_form(self, gys_model):
        # e_1 = 1/4 solved for eta by hand: eta = Y0/4 / (1/4 - e_d - Y0/4)
        m = gys_model
        eta = 0.25 * m.y0 / (0.25 - m.e_detector - 0.25 * m.y0)
        expected = -10.0 / m.alpha * math.log10(eta / m.eta_bob)
        assert keyrate.intercept_resend_ceiling(m) == pytest.approx(expected, abs=1e-4)

    def test_no_background_no_crossing(self):
        with pytest.raises(NoCrossingError):
            keyrate.intercept_resend_ceiling(ChannelModel(alpha=0.21, eta_bob=0.045, y0=0.0, e_detector=0.033))

    def test_detector_error_at_quarter(self):
        m = ChannelModel(alpha=0.21, eta_bob=0.045, y0=1.7e-6, e_detector=0.25)
        assert keyrate.intercept_resend_ceiling(m) == 0.0

    def test_ceiling_above_achievable(self, gys_model, gys_settings):
        assert keyrate.max_secure_distance(gys_model, Method.DECOY, gys_settings) < keyrate.intercept_resend_ceiling(gys_model)


class TestScan:
    def test_row_order_and_fields(self, gys_model, gys_settings):
        rows = keyrate.scan(gys_model, [40.0, 0.0], [Method.GLLP, Method.DECOY], gys_settings)
        assert [(r.distance_km, r.method.value) for r in rows] == [
            (0.0, "decoy-gllp"), (0.0, "gllp-only"), (40.0, "decoy-gllp"), (40.0, "gllp-only")]
        for r in rows:
            assert r.rate > 0.0
            assert 0.0 <= r.omega <= 1.0

    def test_zero_rate_row(self, gys_model, gys_settings):
        (row,) = keyrate.scan(gys_model, [80.0], [Method.GLLP], gys_settings)
        assert row.rate == 0.0 and row.mu == 0.0

    def test_fixed_mu(self, gys_model, gys_settings):
        (row,) = keyrate.scan(gys_model, [10.0], [Method.DECOY], gys_settings, mu=0.3)
        assert row.mu == 0.3
