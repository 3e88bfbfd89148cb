"""1 フレーム分のリンクシミュレーション。

ビット生成 -> 変調 -> IDAFT -> CPP / 送信 IQI -> チャネル -> AWGN -> 受信 IQI
-> 受信処理 (カスケード補償 + 内側検出器、WL-MMSE、または ML)。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from app.constants import INNER_DETECTORS
from app.config.link_config import LinkConfig
from app.detection.compensation import CompensationConfig, cascaded_receive
from app.detection.detectors import DetectionStrategy, DetectorInput, create_detector
from app.dsp.afdm import AfdmParams, add_cpp, daft, idaft, remove_cpp
from app.dsp.channel import (ChannelGeometry, ChannelRealization, apply_time_domain, effective_matrix,
                             identity_channel, sample_channel, sample_geometry)
from app.dsp.constellation import Constellation, get_constellation, map_bits
from app.dsp.iqi import NO_IQI, IqImbalance, add_awgn, apply_iqi, build_widely_linear_model, daft_noise_stats
from app.errors import InvalidArgumentError

log = logging.getLogger(__name__)

# SeedSequence の最終要素で乱数ストリームの用途を分ける
_STREAM_FRAME = 0
_STREAM_CHANNEL = 1
_STREAM_GEOMETRY = 2


class FrameOutcome(NamedTuple):
    bit_errors: int
    bits: int


@dataclass(frozen=True)
class LinkContext:
    """1 回の実行中は変わらない、フレーム間で共有する状態。"""
    config: LinkConfig
    params: AfdmParams
    constellation: Constellation
    compensation: CompensationConfig
    inner: DetectionStrategy
    geometry: ChannelGeometry | None
    covariance: np.ndarray | None


def noise_variance(snr_db: float, convention: str = "es_n0", n_bits: int = 1) -> float:
    """SNR [dB] から 1 複素サンプルあたりの雑音分散 σ² を求める。"""
    sigma2 = 10.0 ** (-snr_db / 10.0)
    if convention == "es_n0":
        return sigma2
    if convention == "eb_n0":
        return sigma2 / n_bits
    raise InvalidArgumentError(f"Unknown SNR convention '{convention}'")


def fixed_geometry(config: LinkConfig) -> ChannelGeometry:
    """シードだけで決まるパス形状 (遅延とドップラー)。"""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, _STREAM_GEOMETRY]))
    ch = config.channel
    return sample_geometry(ch.paths, config.afdm.tau_max, config.afdm.nu_max, ch.doppler_mode, rng,
                           ch.delay_mode)


def _inner_detector_name(config: LinkConfig) -> str:
    """補償が有効なら compensation.inner_detector、無効なら detector をそのまま使う。"""
    comp = config.compensation
    if config.detector in INNER_DETECTORS and not (comp.rx_enabled or comp.tx_enabled):
        return config.detector
    return comp.inner_detector


def build_context(config: LinkConfig) -> LinkContext:
    if config.detector in ("ml", "wl_mmse") and (config.compensation.rx_enabled or config.compensation.tx_enabled):
        log.warning(f"detector '{config.detector}' works on the uncompensated observation; "
                    f"compensation settings are ignored")
    geometry = fixed_geometry(config) if config.channel.fixed_geometry and not config.channel.awgn_only else None
    return LinkContext(
        config=config,
        params=config.params(),
        constellation=get_constellation(config.constellation),
        compensation=config.compensation_config(),
        inner=create_detector(_inner_detector_name(config)),
        geometry=geometry,
        covariance=config.channel.covariance_matrix(),
    )


def frame_rngs(seed: int, snr_index: int, frame_index: int,
               frames_per_channel: int = 1) -> tuple[np.random.Generator, np.random.Generator]:
    """(seed, SNR 番号, フレーム番号) から決まるフレーム用・チャネル用の乱数生成器。"""
    frame_rng = np.random.default_rng(np.random.SeedSequence([seed, snr_index, frame_index, _STREAM_FRAME]))
    block = frame_index // frames_per_channel
    channel_rng = np.random.default_rng(np.random.SeedSequence([seed, snr_index, block, _STREAM_CHANNEL]))
    return frame_rng, channel_rng


def draw_channel(ctx: LinkContext, rng: np.random.Generator) -> ChannelRealization:
    cfg = ctx.config
    if cfg.channel.awgn_only:
        return identity_channel()
    ch = cfg.channel
    return sample_channel(ch.paths, cfg.afdm.tau_max, cfg.afdm.nu_max, ch.doppler_mode, rng,
                          covariance=ctx.covariance, geometry=ctx.geometry, delay_mode=ch.delay_mode)


def transmit(bits: np.ndarray, ctx: LinkContext):
    """ビット列から送信 IQI 適用済みの CPP 付きフレームを作る。"""
    cfg, params = ctx.config, ctx.params
    x = map_bits(bits, ctx.constellation, params.N)
    s = idaft(x, params)
    if cfg.iqi_on_cpp:
        return x, apply_iqi(add_cpp(s, params), cfg.tx_iqi)
    return x, add_cpp(apply_iqi(s, cfg.tx_iqi), params)


def _known_tx_iqi(config: LinkConfig) -> IqImbalance:
    """受信処理が知っている送信 IQI。WL-MMSE は受信 IQI の統計だけを使う。"""
    return NO_IQI if config.detector == "wl_mmse" else config.tx_iqi


def receive(r_bar, chan: ChannelRealization, sigma2: float, ctx: LinkContext):
    """設定された受信処理で検出する。"""
    cfg, params = ctx.config, ctx.params
    if cfg.detector in ("mmse", "zf"):
        return cascaded_receive(r_bar, effective_matrix(chan, params), ctx.compensation, sigma2, params,
                                ctx.constellation, detector=ctx.inner)

    y = daft(remove_cpp(r_bar, params), params)
    model = build_widely_linear_model(chan, _known_tx_iqi(cfg), cfg.rx_iqi, params)
    cov, pcov = daft_noise_stats(cfg.rx_iqi, sigma2, params)
    detector = create_detector(cfg.detector)
    return detector.detect(DetectorInput(y.values, model.direct, cov, pcov), cfg.rx_iqi.power_gain * sigma2,
                           ctx.constellation, model=model)


def simulate_frame(ctx: LinkContext, sigma2: float, snr_index: int, frame_index: int) -> FrameOutcome:
    """1 フレームを送受信してビット誤り数を返す。乱数は引数だけで決まる。"""
    cfg, params = ctx.config, ctx.params
    frame_rng, channel_rng = frame_rngs(cfg.seed, snr_index, frame_index, cfg.channel.frames_per_channel)
    chan = draw_channel(ctx, channel_rng)

    n_bits = params.N * ctx.constellation.N_b
    bits = frame_rng.integers(0, 2, size=n_bits, dtype=np.int8)
    _, s_bar = transmit(bits, ctx)
    r = add_awgn(apply_time_domain(s_bar, chan, params), sigma2, frame_rng)
    r_bar = apply_iqi(r, cfg.rx_iqi)

    detected = receive(r_bar, chan, sigma2, ctx)
    errors = int(np.count_nonzero(detected.bits != bits))
    return FrameOutcome(errors, n_bits)
