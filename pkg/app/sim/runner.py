"""モンテカルロ BER スイープ、IQI スイープ、上界スイープ、波形比較。

フレームは (seed, SNR 番号, フレーム番号) だけで乱数が決まるので、
バッチを並列に処理してもフレーム順に集計すれば結果は並列度によらない。
"""
from __future__ import annotations

import dataclasses
import logging
import math

import numpy as np
from PySide6.QtCore import QObject, Signal

from app.analysis.bounds import abep_bound
from app.config.link_config import CompensationSection, LinkConfig
from app.constants import ML_MAX_SEARCH_BITS, WAVEFORM_MODES
from app.core.frame_pool import FramePool
from app.dsp.channel import ChannelGeometry
from app.dsp.constellation import get_constellation
from app.dsp.iqi import IqImbalance
from app.errors import InvalidArgumentError, SearchSpaceError
from app.sim.link import LinkContext, build_context, fixed_geometry, noise_variance, simulate_frame
from app.sim.results import BerCurve, BerPoint, BoundCurve, CompareResult, CompareRow, IqiSweepResult

log = logging.getLogger(__name__)


def config_record(config: LinkConfig) -> dict:
    """結果ファイルに埋め込む設定 (並列度は含めない)。"""
    data = config.to_dict()
    data.pop("workers", None)
    return data


def crossing_snr(curve: BerCurve, target_ber: float) -> float | None:
    """BER が target_ber を下回る SNR を (SNR, log10 BER) の線形補間で求める。

    誤りゼロの点は半ビット分の誤り (0.5 / bits) として扱う。グリッドの先頭で
    すでに下回っている場合は交点を挟めないので nan、最後まで届かなければ None。
    """
    log_target = math.log10(target_ber)
    prev = None
    for p in curve.points:
        ber = p.ber if p.bit_errors > 0 else 0.5 / p.bits
        cur = (p.snr_db, math.log10(ber))
        if cur[1] <= log_target:
            if prev is None:
                log.warning(f"curve '{curve.label}' is already below BER {target_ber:g} at {cur[0]} dB; "
                            f"crossing is not bracketed by the SNR grid")
                return math.nan
            (s0, l0), (s1, l1) = prev, cur
            if l1 == l0:
                return s1
            return s0 + (log_target - l0) * (s1 - s0) / (l1 - l0)
        prev = cur
    return None


def snr_loss(ideal: BerCurve, impaired: BerCurve, target_ber: float) -> tuple[float, bool]:
    """目標 BER での 2 曲線の水平距離 [dB]。どちらかの交点が求まらなければ (nan, False)。"""
    s_ideal = crossing_snr(ideal, target_ber)
    s_impaired = crossing_snr(impaired, target_ber)
    if s_ideal is None or s_impaired is None or math.isnan(s_ideal) or math.isnan(s_impaired):
        return float("nan"), False
    return s_impaired - s_ideal, True


def _bound_inputs(config: LinkConfig):
    """上界の評価に使うパス形状とチャネル共分散。"""
    if config.channel.awgn_only:
        return ChannelGeometry((0,), (0.0,)), np.ones((1, 1))
    return fixed_geometry(config), config.channel.covariance_matrix()


class SimulationRunner(QObject):
    """
    スイープを実行し、各点の完了と全体の完了を Qt シグナルで通知するクラス。
    """
    point_finished = Signal(object)
    sweep_finished = Signal(object)

    def __init__(self, workers: int | None = None, parent=None):
        super().__init__(parent)
        self.workers = workers

    def _pool(self, config: LinkConfig) -> FramePool:
        return FramePool(self.workers if self.workers is not None else config.workers)

    def run_point(self, ctx: LinkContext, pool: FramePool, snr_index: int, snr_db: float) -> BerPoint:
        """min_bit_errors に達したフレームで止める。max_frames で打ち切った点は truncated。"""
        cfg = ctx.config
        sigma2 = noise_variance(snr_db, cfg.snr_convention, ctx.constellation.N_b)
        errors = bits = frames = 0
        while frames < cfg.max_frames:
            n = min(cfg.batch_frames, cfg.max_frames - frames)
            outcomes = pool.map(simulate_frame, [(ctx, sigma2, snr_index, frames + k) for k in range(n)])
            for outcome in outcomes:
                errors += outcome.bit_errors
                bits += outcome.bits
                frames += 1
                if errors >= cfg.min_bit_errors:
                    log.debug(f"SNR {snr_db} dB: {errors} errors in {frames} frames")
                    return BerPoint(snr_db, errors, bits, frames)
        log.warning(f"SNR {snr_db} dB truncated at max_frames={cfg.max_frames} with {errors} bit errors")
        return BerPoint(snr_db, errors, bits, frames, truncated=True)

    def _ber_curve(self, config: LinkConfig, pool: FramePool, label: str) -> BerCurve:
        ctx = build_context(config)
        points = []
        for i, snr_db in enumerate(config.snr_grid_db):
            point = self.run_point(ctx, pool, i, snr_db)
            points.append(point)
            self.point_finished.emit(point)
        return BerCurve(tuple(points), config.digest(), config.seed, label=label, config=config_record(config))

    def run_ber_sweep(self, config: LinkConfig, label: str = "") -> BerCurve:
        log.info(f"BER sweep over {len(config.snr_grid_db)} SNR points ({config.detector}, {config.waveform_mode})")
        curve = self._ber_curve(config, self._pool(config), label)
        self.sweep_finished.emit(curve)
        return curve

    def run_iqi_sweep(self, config: LinkConfig, sweep_axis: str | None = None,
                      fixed_other: IqImbalance | None = None, snr_db: float | None = None) -> IqiSweepResult:
        """片側の IQI を掃引し、ML 検出の BER と ABEP 上界を並べる。"""
        sweep = config.iqi_sweep
        axis = sweep_axis or sweep.axis
        if axis not in ("tx", "rx"):
            raise InvalidArgumentError(f"sweep axis must be 'tx' or 'rx', got '{axis}'")
        swept_side = config.tx_iqi if axis == "tx" else config.rx_iqi
        other_side = config.rx_iqi if axis == "tx" else config.tx_iqi
        other = fixed_other if fixed_other is not None else IqImbalance(*sweep.fixed_other, other_side.convention)
        snr = sweep.snr_db if snr_db is None else float(snr_db)

        constellation = get_constellation(config.constellation)
        if config.afdm.N * constellation.N_b > ML_MAX_SEARCH_BITS:
            raise SearchSpaceError(f"IQI sweep uses ML detection; N*N_b = {config.afdm.N * constellation.N_b} "
                                   f"exceeds {ML_MAX_SEARCH_BITS}", N=config.afdm.N)
        channel = dataclasses.replace(config.channel, fixed_geometry=True)
        base = config.replace(detector="ml", channel=channel, snr_grid_db=(snr,))
        geometry, cov = _bound_inputs(base)
        params = base.params()
        sigma2 = noise_variance(snr, base.snr_convention, constellation.N_b)
        pool = self._pool(base)

        axis_points, bers, bounds, ber_points = [], [], [], []
        for amp_db, phase_deg in sweep.points:
            swept = IqImbalance(amp_db, phase_deg, swept_side.convention)
            tx, rx = (swept, other) if axis == "tx" else (other, swept)
            cfg = base.replace(tx_iqi=tx, rx_iqi=rx)
            # 全点で SNR 番号 0 の乱数を使い、点の間でチャネルと雑音を共通にする
            point = self.run_point(build_context(cfg), pool, 0, snr)
            abep = abep_bound(constellation, geometry, tx, rx, sigma2, params,
                              positions=base.bound.positions, terms=base.bound.terms, channel_cov=cov)
            axis_points.append((amp_db, phase_deg))
            bers.append(point.ber)
            bounds.append(abep.bound)
            ber_points.append(point)
            self.point_finished.emit((amp_db, phase_deg, point, abep.bound))
            log.info(f"{axis} IQI ({amp_db} dB, {phase_deg} deg): BER {point.ber:.3e}, bound {abep.bound:.3e}")

        result = IqiSweepResult(tuple(axis_points), tuple(bers), tuple(bounds), snr, axis, base.digest(),
                                base.seed, points=tuple(ber_points), config=config_record(base))
        self.sweep_finished.emit(result)
        return result

    def run_abep_sweep(self, config: LinkConfig) -> BoundCurve:
        """固定パス形状での ABEP 上界を SNR ごとに求める。"""
        constellation = get_constellation(config.constellation)
        geometry, cov = _bound_inputs(config)
        params = config.params()
        values = []
        for snr_db in config.snr_grid_db:
            sigma2 = noise_variance(snr_db, config.snr_convention, constellation.N_b)
            abep = abep_bound(constellation, geometry, config.tx_iqi, config.rx_iqi, sigma2, params,
                              positions=config.bound.positions, terms=config.bound.terms, channel_cov=cov)
            values.append(abep.bound)
            self.point_finished.emit((snr_db, abep.bound))
        curve = BoundCurve(tuple(config.snr_grid_db), tuple(values), config.digest(), config.seed,
                           positions_mode=str(config.bound.positions), terms_mode=config.bound.terms,
                           config=config_record(config))
        self.sweep_finished.emit(curve)
        return curve

    def run_waveform_compare(self, config: LinkConfig, waveforms=WAVEFORM_MODES,
                             snr_grid=None) -> CompareResult:
        """同じ劣化条件 (MMSE、補償なし) で波形ごとの SNR 損失を比べる。"""
        grid = tuple(config.snr_grid_db if snr_grid is None else snr_grid)
        pool = self._pool(config)
        entries, curves = [], {}
        for waveform in waveforms:
            if waveform not in WAVEFORM_MODES:
                raise InvalidArgumentError(f"Unknown waveform '{waveform}'", waveform=waveform)
            impaired = config.replace(waveform_mode=waveform, detector="mmse",
                                      compensation=CompensationSection(), snr_grid_db=grid)
            ideal = impaired.replace(tx_iqi=IqImbalance(), rx_iqi=IqImbalance())
            c_ideal = self._ber_curve(ideal, pool, f"{waveform}-ideal")
            c_impaired = self._ber_curve(impaired, pool, f"{waveform}-impaired")
            loss, reached = snr_loss(c_ideal, c_impaired, config.target_ber)
            if not reached:
                log.warning(f"{waveform}: target BER {config.target_ber} not bracketed by the SNR grid")
            entries.append(CompareRow(waveform, loss, config.target_ber, reached))
            curves[waveform] = (c_ideal, c_impaired)
            log.info(f"{waveform}: SNR loss {loss:.2f} dB at BER {config.target_ber}")

        result = CompareResult(tuple(entries), curves, config.digest(), config.seed, config=config_record(config))
        self.sweep_finished.emit(result)
        return result
