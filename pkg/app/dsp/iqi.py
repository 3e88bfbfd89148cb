"""狭帯域 IQ インバランス (IQI) と AWGN、DAFT 領域の雑音統計。

IQI は s -> μs + υs* の広義線形写像で、送信側・受信側ともに同じ形をとる。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from app.constants import AMP_CONVENTIONS
from app.dsp.afdm import AfdmParams, TimeSignal, daft_matrix
from app.dsp.channel import ChannelRealization, time_matrix
from app.errors import InvalidArgumentError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IqImbalance:
    """片側の振幅・位相インバランス (AIm [dB], PIm [度]) と派生係数 μ, υ。

    convention="power" は α = 10^{dB/10} - 1、"amplitude" は α = 10^{dB/20} - 1。
    """
    amp_db: float = 0.0
    phase_deg: float = 0.0
    convention: str = "power"
    alpha: float = field(init=False)
    theta: float = field(init=False)
    mu: complex = field(init=False)
    upsilon: complex = field(init=False)

    def __post_init__(self):
        if self.convention not in AMP_CONVENTIONS:
            raise InvalidArgumentError(f"IQI amplitude convention must be one of {AMP_CONVENTIONS}, "
                                       f"got '{self.convention}'", convention=self.convention)
        scale = 10.0 if self.convention == "power" else 20.0
        alpha = 10.0 ** (self.amp_db / scale) - 1.0
        theta = np.deg2rad(self.phase_deg)
        mu = complex(np.cos(theta / 2.0), alpha * np.sin(theta / 2.0))
        upsilon = complex(alpha * np.cos(theta / 2.0), -np.sin(theta / 2.0))
        if abs(mu) <= abs(upsilon):
            raise InvalidArgumentError(
                f"IQ imbalance ({self.amp_db} dB, {self.phase_deg} deg) is not invertible: |mu| <= |upsilon|",
                amp_db=self.amp_db, phase_deg=self.phase_deg)
        object.__setattr__(self, "alpha", float(alpha))
        object.__setattr__(self, "theta", float(theta))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "upsilon", upsilon)

    @property
    def denominator(self) -> float:
        """|μ|² - |υ|² (補償の分母)。"""
        return abs(self.mu) ** 2 - abs(self.upsilon) ** 2

    @property
    def power_gain(self) -> float:
        """|μ|² + |υ|² = 1 + α²。"""
        return abs(self.mu) ** 2 + abs(self.upsilon) ** 2

    @property
    def is_ideal(self) -> bool:
        return self.upsilon == 0 and self.mu == 1

    def to_dict(self) -> dict:
        return {"amp_db": self.amp_db, "phase_deg": self.phase_deg, "convention": self.convention}


NO_IQI = IqImbalance(0.0, 0.0)


@dataclass(frozen=True)
class NoiseModel:
    sigma2: float
    rx_iqi: IqImbalance | None = None

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise InvalidArgumentError(f"sigma2 must be > 0, got {self.sigma2}", sigma2=self.sigma2)

    @property
    def sigma2_wbar(self) -> float:
        """受信 IQI を通過したあとの 1 サンプルあたり分散 (|μ|²+|υ|²)σ²。"""
        gain = 1.0 if self.rx_iqi is None else self.rx_iqi.power_gain
        return gain * self.sigma2


def iqi_from_db(amp_db: float, phase_deg: float, convention: str = "power") -> IqImbalance:
    return IqImbalance(float(amp_db), float(phase_deg), convention)


def _widely_linear(values: np.ndarray, a: complex, b: complex) -> np.ndarray:
    return a * values + b * np.conj(values)


def apply_iqi(signal, iqi: IqImbalance):
    """サンプルごとに μ·s + υ·s* を適用する。TimeSignal なら CPP フラグを保つ。"""
    if isinstance(signal, TimeSignal):
        return signal.replace(_widely_linear(signal.values, iqi.mu, iqi.upsilon))
    return _widely_linear(np.asarray(signal, dtype=np.complex128), iqi.mu, iqi.upsilon)


def add_awgn(signal: TimeSignal, sigma2: float, rng: np.random.Generator) -> TimeSignal:
    """円対称複素ガウス雑音 (実部・虚部それぞれ分散 σ²/2) を加える。"""
    if sigma2 < 0:
        raise InvalidArgumentError(f"sigma2 must be >= 0, got {sigma2}", sigma2=sigma2)
    if sigma2 == 0:
        return signal
    n = signal.values.size
    noise = np.sqrt(sigma2 / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return signal.replace(signal.values + noise)


def daft_noise_stats(rx_iqi: IqImbalance, sigma2: float, params: AfdmParams) -> tuple[np.ndarray, np.ndarray]:
    """w̄ = A(μw + υw*) の共分散と擬似共分散。"""
    A = daft_matrix(params)
    cov = rx_iqi.power_gain * sigma2 * np.eye(params.N, dtype=np.complex128)
    pcov = 2.0 * rx_iqi.mu * rx_iqi.upsilon * sigma2 * (A @ A.T)
    return cov, pcov


@dataclass(frozen=True)
class WidelyLinearModel:
    """y = direct·x + mirror·x* の雑音なし信号モデル。"""
    direct: np.ndarray = field(repr=False)
    mirror: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.direct.shape[0]

    def predict(self, x) -> np.ndarray:
        """x は (N,) または行ごとに候補を並べた (K, N)。"""
        x = np.asarray(x, dtype=np.complex128)
        return x @ self.direct.T + np.conj(x) @ self.mirror.T

    def augmented(self) -> np.ndarray:
        """[[T1, T2], [T2*, T1*]] (2N x 2N)。"""
        return np.block([[self.direct, self.mirror],
                         [np.conj(self.mirror), np.conj(self.direct)]])


class InterferenceTerms(NamedTuple):
    attenuated: np.ndarray
    tx_mirror: np.ndarray
    rx_mirror: np.ndarray
    joint_mirror: np.ndarray

    def total(self) -> np.ndarray:
        return self.attenuated + self.tx_mirror + self.rx_mirror + self.joint_mirror


def _daft_channel_blocks(chan: ChannelRealization, params: AfdmParams):
    A = daft_matrix(params)
    H = time_matrix(chan, params)
    Hc = np.conj(H)
    Ah = A.conj().T
    At = A.T
    return A @ H @ Ah, A @ H @ At, A @ Hc @ At, A @ Hc @ Ah


def build_widely_linear_model(chan: ChannelRealization, tx_iqi: IqImbalance, rx_iqi: IqImbalance,
                              params: AfdmParams) -> WidelyLinearModel:
    """送受信 IQI とチャネルから DAFT 領域の広義線形モデルを組み立てる。"""
    m1, m2, m3, m4 = _daft_channel_blocks(chan, params)
    mt, ut, mr, ur = tx_iqi.mu, tx_iqi.upsilon, rx_iqi.mu, rx_iqi.upsilon
    direct = mr * mt * m1 + ur * np.conj(ut) * m4
    mirror = mr * ut * m2 + ur * np.conj(mt) * m3
    return WidelyLinearModel(direct, mirror)


def decompose_interference(x, chan: ChannelRealization, tx_iqi: IqImbalance, rx_iqi: IqImbalance,
                           params: AfdmParams) -> InterferenceTerms:
    """雑音なし出力を 4 つの成分に分解する。

    1. μ_rx μ_tx A H Aᴴ x (減衰した所望信号)
    2. μ_rx υ_tx A H Aᵀ x* (送信 IQI のミラー干渉)
    3. υ_rx μ_tx* A H* Aᵀ x* (受信 IQI のミラー干渉)
    4. υ_rx υ_tx* A H* Aᴴ x (両側の IQI による項)
    """
    xv = x.values if hasattr(x, "values") else np.asarray(x, dtype=np.complex128)
    if xv.size != params.N:
        raise InvalidArgumentError(f"symbol vector length {xv.size} does not match N={params.N}")
    xc = np.conj(xv)
    m1, m2, m3, m4 = _daft_channel_blocks(chan, params)
    mt, ut, mr, ur = tx_iqi.mu, tx_iqi.upsilon, rx_iqi.mu, rx_iqi.upsilon
    return InterferenceTerms(
        attenuated=mr * mt * (m1 @ xv),
        tx_mirror=mr * ut * (m2 @ xc),
        rx_mirror=ur * np.conj(mt) * (m3 @ xc),
        joint_mirror=ur * np.conj(ut) * (m4 @ xv),
    )
