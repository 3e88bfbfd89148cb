"""カスケード型 IQI 補償。

受信 IQI を時間領域で先に取り除いて雑音を円対称に戻し、内側の検出器で
等化したあと、送信 IQI を検出シンボル側で取り除く。順序を入れ替えると
復元できない。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from app.constants import INNER_DETECTORS
from app.detection.detectors import (DetectedFrame, DetectionStrategy, DetectorInput, create_detector,
                                     hard_decision)
from app.dsp.afdm import AfdmParams, DaftSymbolVector, TimeSignal, daft, daft_matrix, idaft, remove_cpp
from app.dsp.channel import EffectiveChannel
from app.dsp.constellation import Constellation
from app.dsp.iqi import NO_IQI, IqImbalance, apply_iqi
from app.errors import CompensationError, InvalidArgumentError

log = logging.getLogger(__name__)

_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class CompensationConfig:
    rx_enabled: bool = False
    tx_enabled: bool = False
    tx_iqi_known: IqImbalance = NO_IQI
    rx_iqi_known: IqImbalance = NO_IQI
    inner_detector: str = "mmse"
    unconjugated_tx: bool = False

    def __post_init__(self):
        if self.inner_detector not in INNER_DETECTORS:
            raise InvalidArgumentError(f"inner detector must be one of {INNER_DETECTORS}, got '{self.inner_detector}'")

    @property
    def enabled(self) -> bool:
        return self.rx_enabled or self.tx_enabled


def _check_denominator(iqi: IqImbalance, side: str) -> float:
    den = iqi.denominator
    if abs(den) < _DEGENERATE_TOL:
        raise CompensationError(f"{side} IQI compensation is degenerate: |mu|^2 - |upsilon|^2 = {den}",
                                amp_db=iqi.amp_db, phase_deg=iqi.phase_deg)
    return den


def _invert(values: np.ndarray, iqi: IqImbalance, den: float) -> np.ndarray:
    return (np.conj(iqi.mu) * values - iqi.upsilon * np.conj(values)) / den


def compensate_rx(r_bar, rx_iqi: IqImbalance):
    """r = (μ*·r̄ - υ·r̄*) / (|μ|² - |υ|²)。"""
    den = _check_denominator(rx_iqi, "Rx")
    if isinstance(r_bar, TimeSignal):
        return r_bar.replace(_invert(r_bar.values, rx_iqi, den))
    return _invert(np.asarray(r_bar, dtype=np.complex128), rx_iqi, den)


def compensate_tx(x_tilde_hat, tx_iqi: IqImbalance, params: AfdmParams,
                  unconjugated: bool = False) -> DaftSymbolVector:
    """検出シンボル x̃ = μx + υ A Aᵀ x* から x を取り出す。

    u = Aᴴx̃ を時間領域で逆写像し、A を掛けて DAFT 領域へ戻す。
    unconjugated=True は第 2 項の共役を欠いた形 A(μ*Aᴴx̃ - υAᵀx̃) を使う
    (比較用。厳密には復元できない)。
    """
    den = _check_denominator(tx_iqi, "Tx")
    xv = x_tilde_hat.values if hasattr(x_tilde_hat, "values") else np.asarray(x_tilde_hat, dtype=np.complex128)
    if xv.size != params.N:
        raise InvalidArgumentError(f"symbol vector length {xv.size} does not match N={params.N}")
    if unconjugated:
        A = daft_matrix(params)
        out = A @ (np.conj(tx_iqi.mu) * (A.conj().T @ xv) - tx_iqi.upsilon * (A.T @ xv)) / den
        return DaftSymbolVector(out)
    u = idaft(DaftSymbolVector(xv), params)
    return daft(u.replace(_invert(u.values, tx_iqi, den)), params)


def cascaded_receive(r_bar: TimeSignal, effective: EffectiveChannel, config: CompensationConfig, sigma2: float,
                     params: AfdmParams, constellation: Constellation,
                     detector: DetectionStrategy | None = None) -> DetectedFrame:
    """受信 IQI 補償 -> CPP 除去 -> DAFT -> 検出 -> 送信 IQI 補償 -> 硬判定。

    受信補償が無効なときは内側の検出器に (|μ_rx|²+|υ_rx|²)σ² を渡す。
    """
    if detector is None:
        detector = create_detector(config.inner_detector)
    r = compensate_rx(r_bar, config.rx_iqi_known) if config.rx_enabled else r_bar
    y = daft(remove_cpp(r, params), params)

    sigma2_eff = sigma2 if config.rx_enabled else config.rx_iqi_known.power_gain * sigma2
    inner = detector.detect(DetectorInput.proper(y.values, effective.daft_matrix, sigma2_eff), sigma2_eff,
                            constellation)
    if not config.tx_enabled:
        return inner
    x_hat = compensate_tx(inner.soft_symbols, config.tx_iqi_known, params, unconjugated=config.unconjugated_tx)
    return hard_decision(x_hat.values, constellation)


def swapped_order_residual(x, tx_iqi: IqImbalance, rx_iqi: IqImbalance, params: AfdmParams,
                           gain: complex = np.exp(1j * np.pi / 3)) -> float:
    """送信補償を受信補償より先に行った場合の復元誤差 (最大絶対値)。

    単一パス (τ = 0, ν = 0) の複素利得チャネル上で雑音なしに評価する。
    """
    xv = x.values if hasattr(x, "values") else np.asarray(x, dtype=np.complex128)
    h = complex(gain)

    s = apply_iqi(idaft(DaftSymbolVector(xv), params), tx_iqi)
    r_bar = apply_iqi(s.replace(h * s.values), rx_iqi)

    y = daft(r_bar, params)
    x_tx_first = compensate_tx(y, tx_iqi, params)
    r = compensate_rx(idaft(x_tx_first, params), rx_iqi)
    x_swapped = daft(r, params).values / h
    return float(np.max(np.abs(x_swapped - xv)))
