import numpy as np
import pytest

from app.dsp.afdm import DaftSymbolVector, TimeSignal, add_cpp, daft_matrix, idaft
from app.dsp.channel import apply_time_domain, effective_matrix, identity_channel, sample_channel
from app.dsp.iqi import NO_IQI, add_awgn, apply_iqi, iqi_from_db
from app.detection.compensation import (CompensationConfig, cascaded_receive, compensate_rx, compensate_tx,
                                        swapped_order_residual)
from app.detection.detectors import ZfDetector
from app.errors import CompensationError, InvalidArgumentError

TX = iqi_from_db(1.0, 3.0)
RX = iqi_from_db(1.5, 3.5)


def _transmit(x, params, chan, tx=TX, rx=RX):
    s_bar = apply_iqi(add_cpp(idaft(DaftSymbolVector(x), params), params), tx)
    return apply_iqi(apply_time_domain(s_bar, chan, params), rx)


class TestCompensateRx:
    def test_inverts_apply_iqi(self, rng):
        r = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        assert np.max(np.abs(compensate_rx(apply_iqi(r, RX), RX) - r)) < 1e-12

    def test_keeps_time_signal(self):
        out = compensate_rx(TimeSignal(np.ones(4), has_cpp=True), RX)
        assert isinstance(out, TimeSignal) and out.has_cpp

    def test_degenerate_denominator(self, mocker):
        iqi = mocker.Mock(denominator=0.0, amp_db=3.0, phase_deg=90.0)
        with pytest.raises(CompensationError):
            compensate_rx(np.ones(4), iqi)


class TestCompensateTx:
    def test_inverts_tx_mirror(self, table1_params, qpsk, rng):
        A = daft_matrix(table1_params)
        x = qpsk.points[rng.integers(0, 4, 64)]
        x_tilde = TX.mu * x + TX.upsilon * (A @ A.T @ np.conj(x))
        assert np.max(np.abs(compensate_tx(x_tilde, TX, table1_params).values - x)) < 1e-12

    def test_unconjugated_form_does_not_restore(self, table1_params, qpsk, rng):
        A = daft_matrix(table1_params)
        x = qpsk.points[rng.integers(0, 4, 64)]
        x_tilde = TX.mu * x + TX.upsilon * (A @ A.T @ np.conj(x))
        out = compensate_tx(x_tilde, TX, table1_params, unconjugated=True)
        assert np.max(np.abs(out.values - x)) > 1e-3

    def test_identity_without_iqi(self, params, rng):
        x = rng.standard_normal(params.N) + 0j
        assert np.allclose(compensate_tx(x, NO_IQI, params).values, x)

    def test_length_check(self, params):
        with pytest.raises(InvalidArgumentError):
            compensate_tx(np.ones(3), TX, params)


class TestCascade:
    def test_noiseless_identity_channel_is_exact(self, table1_params, qpsk, rng):
        x = qpsk.points[rng.integers(0, 4, 64)]
        r_bar = _transmit(x, table1_params, identity_channel())
        config = CompensationConfig(True, True, TX, RX)
        out = cascaded_receive(r_bar, effective_matrix(identity_channel(), table1_params), config, 1e-12,
                               table1_params, qpsk, detector=ZfDetector())
        assert np.max(np.abs(out.soft_symbols - x)) < 1e-9

    def test_recovers_through_dsc_at_high_snr(self, params, qpsk, rng):
        chan = sample_channel(2, 1, 1, "integer", rng)
        x = qpsk.points[rng.integers(0, 4, params.N)]
        r_bar = apply_iqi(add_awgn(apply_time_domain(
            apply_iqi(add_cpp(idaft(DaftSymbolVector(x), params), params), TX), chan, params), 1e-8, rng), RX)
        config = CompensationConfig(True, True, TX, RX)
        out = cascaded_receive(r_bar, effective_matrix(chan, params), config, 1e-8, params, qpsk)
        assert np.allclose(out.hard_symbols, x)

    def test_disabled_compensation_returns_inner_result(self, params, qpsk, rng, mocker):
        x = qpsk.points[rng.integers(0, 4, params.N)]
        r_bar = _transmit(x, params, identity_channel(), NO_IQI, NO_IQI)
        spy = mocker.spy(ZfDetector, "detect")
        out = cascaded_receive(r_bar, effective_matrix(identity_channel(), params), CompensationConfig(),
                               0.1, params, qpsk, detector=ZfDetector())
        assert spy.call_count == 1
        assert np.allclose(out.hard_symbols, x)

    def test_inner_variance_scaled_without_rx_compensation(self, params, qpsk, rng, mocker):
        x = qpsk.points[rng.integers(0, 4, params.N)]
        r_bar = _transmit(x, params, identity_channel(), NO_IQI, RX)
        detector = mocker.Mock()
        detector.detect.return_value = mocker.Mock(soft_symbols=x)
        config = CompensationConfig(False, False, NO_IQI, RX)
        cascaded_receive(r_bar, effective_matrix(identity_channel(), params), config, 0.1, params, qpsk,
                         detector=detector)
        assert detector.detect.call_args.args[1] == pytest.approx(RX.power_gain * 0.1)

    def test_inner_detector_must_be_linear(self):
        with pytest.raises(InvalidArgumentError):
            CompensationConfig(inner_detector="ml")

    def test_swapped_order_fails(self, table1_params, qpsk, rng):
        x = qpsk.points[rng.integers(0, 4, 64)]
        assert swapped_order_residual(x, TX, TX, table1_params) > 1e-3

    def test_swapped_order_harmless_without_iqi(self, table1_params, qpsk, rng):
        x = qpsk.points[rng.integers(0, 4, 64)]
        assert swapped_order_residual(x, NO_IQI, NO_IQI, table1_params) < 1e-10
