"""少数フレームで確かめる、IQI の強さと受信処理による BER の大小関係。

同じシードとフレーム番号からはチャネル・ビット・雑音が同じになるので、
受信処理どうしの比較は同じ実現値の上で行われる。
"""
import pytest

from app.analysis.bounds import abep_bound
from app.config.link_config import AfdmSection, ChannelSection, CompensationSection, IqiSweepSection
from app.dsp.constellation import get_constellation
from app.dsp.iqi import IqImbalance
from app.sim.link import build_context, fixed_geometry, simulate_frame
from app.sim.results import BerPoint
from app.sim.runner import SimulationRunner

MILD = IqImbalance(1.0, 3.0)
STRONG_TX = IqImbalance(1.5, 5.0)
STRONG_RX = IqImbalance(2.0, 6.0)
CASCADE = CompensationSection(rx_enabled=True, tx_enabled=True)
SMALL_FRAME = AfdmSection(N=4, nu_max=1, tau_max=1, zeta_nu=0)


def _point(config, sigma2, frames):
    ctx = build_context(config)
    outcomes = [simulate_frame(ctx, sigma2, 0, k) for k in range(frames)]
    return BerPoint(0.0, sum(o.bit_errors for o in outcomes), sum(o.bits for o in outcomes), frames)


@pytest.fixture
def impaired(link_config):
    return link_config.replace(tx_iqi=STRONG_TX, rx_iqi=STRONG_RX)


@pytest.fixture
def small_ml(link_config):
    return link_config.replace(afdm=SMALL_FRAME, channel=ChannelSection(paths=2, fixed_geometry=True),
                               detector="ml", tx_iqi=MILD, rx_iqi=MILD)


class TestErrorFloor:
    def test_uncompensated_mmse_floors(self, impaired):
        at_30db = _point(impaired, 1e-3, 200)
        at_40db = _point(impaired, 1e-4, 200)
        assert at_40db.ber > 5e-3
        assert at_40db.ber > 0.5 * at_30db.ber

    def test_cascade_removes_the_floor(self, impaired):
        uncompensated = _point(impaired, 1e-4, 200)
        cascade = _point(impaired.replace(compensation=CASCADE), 1e-4, 200)
        assert cascade.ber < 0.2 * uncompensated.ber


class TestReceiverOrdering:
    def test_cascade_then_wl_mmse_then_uncompensated(self, impaired):
        cascade = _point(impaired.replace(compensation=CASCADE), 1e-4, 200)
        wl_mmse = _point(impaired.replace(detector="wl_mmse"), 1e-4, 200)
        uncompensated = _point(impaired, 1e-4, 200)
        assert cascade.ber < wl_mmse.ber < uncompensated.ber

    def test_ml_not_worse_than_mmse(self, small_ml):
        ml = _point(small_ml, 0.05, 400)
        mmse = _point(small_ml.replace(detector="mmse"), 0.05, 400)
        cascade = _point(small_ml.replace(detector="mmse", compensation=CASCADE), 0.05, 400)
        assert ml.ber <= mmse.ber
        assert ml.ber <= cascade.ber + 2 * cascade.standard_error


class TestBoundAgainstSimulation:
    def test_abep_not_below_ml_ber(self, small_ml):
        sigma2 = 0.1
        ml = _point(small_ml, sigma2, 1000)
        bound = abep_bound(get_constellation("QPSK"), fixed_geometry(small_ml), MILD, MILD, sigma2,
                           small_ml.params())
        assert ml.bit_errors > 0
        assert ml.ber <= bound.bound + 3 * ml.standard_error


class TestSweepSides:
    def test_rx_imbalance_hurts_more_than_tx(self, qapp, small_ml):
        config = small_ml.replace(min_bit_errors=300, max_frames=3000, batch_frames=50,
                                  iqi_sweep=IqiSweepSection(snr_db=12.0, points=((2.0, 6.0),),
                                                            fixed_other=(1.0, 3.0)))
        runner = SimulationRunner(workers=2)
        tx_side = runner.run_iqi_sweep(config, sweep_axis="tx")
        rx_side = runner.run_iqi_sweep(config, sweep_axis="rx")
        assert rx_side.simulated_ber[0] > tx_side.simulated_ber[0]
