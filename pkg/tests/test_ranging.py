import numpy as np
import pytest

from roverloc.ranging import (
    SPEED_OF_LIGHT,
    ClockModel,
    NegativeTof,
    NonPositiveInterval,
    RangeNoiseModel,
    RangeQuality,
    TwrExchange,
    measure_range,
    sds_twr_tof,
    simulate_exchange,
)


class TestSdsTwrTof:
    def test_symmetric_exchange(self):
        # t_round = 2*tof + t_reply with tof = 1
        e = TwrExchange(t_round1=4, t_reply1=2, t_round2=4, t_reply2=2)
        assert sds_twr_tof(e) == pytest.approx(1.0)

    def test_asymmetric_replies(self):
        # forward-simulated from tof = 10: rounds are 2*10 + reply
        e = TwrExchange(t_round1=120, t_reply1=100, t_round2=320, t_reply2=300)
        assert sds_twr_tof(e) == pytest.approx(10.0)

    def test_zero_flight_time(self):
        e = TwrExchange(t_round1=2, t_reply1=2, t_round2=2, t_reply2=2)
        assert sds_twr_tof(e) == 0.0

    def test_rejects_non_positive_interval(self):
        with pytest.raises(NonPositiveInterval):
            sds_twr_tof(TwrExchange(4, 0, 4, 2))

    def test_rejects_negative_numerator(self):
        with pytest.raises(NegativeTof):
            sds_twr_tof(TwrExchange(1, 2, 1, 2))


class TestSimulateExchange:
    def test_zero_distance(self):
        e = simulate_exchange(0.0, ClockModel(), ClockModel(), 1e-3, 1e-3)
        assert sds_twr_tof(e) == pytest.approx(0.0, abs=1e-18)

    def test_round_trip_recovers_tof(self):
        # 100 ns of flight
        e = simulate_exchange(29.9792458, ClockModel(), ClockModel(), 1e-3, 1e-3)
        assert sds_twr_tof(e) == pytest.approx(100e-9, abs=1e-15)

    def test_offsets_never_enter(self):
        a = simulate_exchange(15.0, ClockModel(offset=0.0), ClockModel(offset=0.0),
                              5e-4, 7e-4)
        b = simulate_exchange(15.0, ClockModel(offset=123.4), ClockModel(offset=-9.9),
                              5e-4, 7e-4)
        assert a == b

    def test_drift_error_below_5mm(self):
        # the cancellation property SDS-TWR exists for
        rng = np.random.default_rng(1)
        tag = ClockModel(drift=20e-6)
        anchor = ClockModel(drift=-20e-6)
        worst = 0.0
        for _ in range(1000):
            d = float(rng.uniform(0.1, 30.0))
            e = simulate_exchange(
                d, tag, anchor,
                float(rng.uniform(1e-4, 1e-3)),
                float(rng.uniform(1e-4, 1e-3)),
            )
            err = abs(sds_twr_tof(e) * SPEED_OF_LIGHT - d)
            worst = max(worst, err)
        assert worst < 5e-3

    def test_clock_model_rejects_excess_drift(self):
        with pytest.raises(ValueError):
            ClockModel(drift=200e-6)

    def test_rejects_negative_distance(self):
        with pytest.raises(ValueError):
            simulate_exchange(-1.0, ClockModel(), ClockModel(), 1e-3, 1e-3)


class TestMeasureRange:
    def test_noiseless_identity(self):
        noise = RangeNoiseModel(bias=0.0, sigma=0.0, dropout_probability=0.0)
        m = measure_range(7.5, noise, np.random.default_rng(0))
        assert m.distance == pytest.approx(7.5)
        assert m.quality is RangeQuality.OK

    def test_pure_bias(self):
        noise = RangeNoiseModel(bias=0.5, sigma=0.0, dropout_probability=0.0)
        m = measure_range(10.0, noise, np.random.default_rng(0))
        assert m.distance == pytest.approx(10.5)

    def test_default_noise_matches_observed_band(self):
        # mean absolute error in [0.4, 0.7] m, overestimation on average
        noise = RangeNoiseModel()
        rng = np.random.default_rng(42)
        errors = []
        for _ in range(10_000):
            m = measure_range(10.0, noise, rng)
            if m.quality is RangeQuality.OK:
                errors.append(m.distance - 10.0)
        errors = np.array(errors)
        assert 0.4 <= np.mean(np.abs(errors)) <= 0.7
        assert np.mean(errors) > 0

    def test_dropout(self):
        noise = RangeNoiseModel(dropout_probability=1.0)
        m = measure_range(10.0, noise, np.random.default_rng(0))
        assert m.quality is RangeQuality.REJECTED

    def test_clamps_to_zero(self):
        noise = RangeNoiseModel(bias=-5.0, sigma=0.0, dropout_probability=0.0)
        m = measure_range(1.0, noise, np.random.default_rng(0))
        assert m.distance == 0.0

    def test_invalid_model_rejected(self):
        with pytest.raises(ValueError):
            RangeNoiseModel(sigma=-1.0)
        with pytest.raises(ValueError):
            RangeNoiseModel(dropout_probability=1.5)
