"""DAFT 領域のシンボル検出器。

線形 MMSE / ZF、広義線形モデルに基づく全探索 ML、拡大系の WL-MMSE を持つ。
検出器はすべて状態を持たず、1 フレーム単位で呼び出す。
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from app.constants import DETECTORS, ML_CHUNK_CANDIDATES, ML_MAX_SEARCH_BITS
from app.dsp.constellation import Constellation
from app.dsp.iqi import WidelyLinearModel
from app.errors import DetectionError, InvalidArgumentError, SearchSpaceError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectorInput:
    """観測 y と実効チャネル、DAFT 領域の雑音共分散・擬似共分散。"""
    y: np.ndarray = field(repr=False)
    h_eff: np.ndarray = field(repr=False)
    noise_cov: np.ndarray = field(repr=False)
    noise_pcov: np.ndarray = field(repr=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.complex128).reshape(-1)
        N = y.size
        for name in ("h_eff", "noise_cov", "noise_pcov"):
            if np.shape(getattr(self, name)) != (N, N):
                raise InvalidArgumentError(f"{name} must be {N}x{N}, got {np.shape(getattr(self, name))}")
        if not np.allclose(self.noise_cov, np.conj(np.transpose(self.noise_cov)), atol=1e-12):
            raise InvalidArgumentError("noise_cov must be Hermitian")
        object.__setattr__(self, "y", y)

    @classmethod
    def proper(cls, y, h_eff, sigma2: float) -> DetectorInput:
        """雑音が σ²I の円対称ガウスである場合。"""
        N = np.shape(h_eff)[0]
        return cls(y, h_eff, sigma2 * np.eye(N, dtype=np.complex128), np.zeros((N, N), dtype=np.complex128))


@dataclass(frozen=True)
class DetectedFrame:
    soft_symbols: np.ndarray = field(repr=False)
    hard_symbols: np.ndarray = field(repr=False)
    bits: np.ndarray = field(repr=False)


def hard_decision(soft, constellation: Constellation) -> DetectedFrame:
    """軟出力から最近傍の信号点とビットを決める。"""
    soft = np.asarray(soft, dtype=np.complex128).reshape(-1)
    index = constellation.nearest(soft)
    return DetectedFrame(soft_symbols=soft,
                         hard_symbols=constellation.points[index],
                         bits=constellation.bit_labels[index].reshape(-1).astype(np.int8))


def _solve(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    try:
        out = scipy.linalg.solve(a, b, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise DetectionError(f"{what}: linear system could not be solved ({e})") from e
    if not np.all(np.isfinite(out)):
        raise DetectionError(f"{what}: solution is not finite")
    return out


def mmse_detect(inp: DetectorInput, sigma2_effective: float, constellation: Constellation) -> DetectedFrame:
    """x̂ = H_effᴴ (H_eff H_effᴴ + σ²I)⁻¹ y。"""
    if not sigma2_effective > 0:
        raise InvalidArgumentError(f"sigma2_effective must be > 0, got {sigma2_effective}")
    H = inp.h_eff
    gram = H @ H.conj().T + sigma2_effective * np.eye(H.shape[0])
    soft = H.conj().T @ _solve(gram, inp.y, "MMSE")
    return hard_decision(soft, constellation)


def zf_detect(inp: DetectorInput, constellation: Constellation) -> DetectedFrame:
    soft = _solve(inp.h_eff, inp.y, "ZF")
    return hard_decision(soft, constellation)


def _candidate_block(start: int, stop: int, N: int, constellation: Constellation) -> np.ndarray:
    """辞書順で start..stop-1 番目の候補ベクトル (先頭位置が最上位桁)。"""
    M = constellation.size
    k = np.arange(start, stop, dtype=np.int64)
    powers = M ** np.arange(N - 1, -1, -1, dtype=np.int64)
    digits = (k[:, None] // powers[None, :]) % M
    return constellation.points[digits]


def ml_detect(y, model: WidelyLinearModel, constellation: Constellation) -> DetectedFrame:
    """‖y - T1 x - T2 x*‖² を全候補について最小化する。同点は番号の小さい候補。"""
    yv = np.asarray(y, dtype=np.complex128).reshape(-1)
    N = model.N
    if yv.size != N:
        raise InvalidArgumentError(f"observation length {yv.size} does not match model size {N}")
    search_bits = N * constellation.N_b
    if search_bits > ML_MAX_SEARCH_BITS:
        raise SearchSpaceError(f"ML search over {search_bits} bits exceeds the limit of {ML_MAX_SEARCH_BITS}",
                               N=N, N_b=constellation.N_b)

    total = constellation.size ** N
    best_metric = np.inf
    best = None
    for start in range(0, total, ML_CHUNK_CANDIDATES):
        stop = min(total, start + ML_CHUNK_CANDIDATES)
        cands = _candidate_block(start, stop, N, constellation)
        metric = np.sum(np.abs(yv[None, :] - model.predict(cands)) ** 2, axis=1)
        i = int(np.argmin(metric))
        if metric[i] < best_metric:
            best_metric = float(metric[i])
            best = cands[i]
    return hard_decision(best, constellation)


def wl_mmse_detect(y, model: WidelyLinearModel, noise_cov: np.ndarray, noise_pcov: np.ndarray,
                   constellation: Constellation) -> DetectedFrame:
    """拡大観測 [y; y*] に対する広義線形 MMSE 推定。先頭 N 成分を返す。"""
    yv = np.asarray(y, dtype=np.complex128).reshape(-1)
    N = model.N
    if yv.size != N:
        raise InvalidArgumentError(f"observation length {yv.size} does not match model size {N}")
    y_aug = np.concatenate([yv, np.conj(yv)])
    H_aug = model.augmented()
    eye = np.eye(N)
    p = constellation.pseudo_variance
    Rx = np.block([[eye, p * eye], [np.conj(p) * eye, eye]])
    Rn = np.block([[noise_cov, noise_pcov], [np.conj(noise_pcov), np.conj(noise_cov)]])
    gram = H_aug @ Rx @ H_aug.conj().T + Rn
    estimate = Rx @ H_aug.conj().T @ _solve(gram, y_aug, "WL-MMSE")
    return hard_decision(estimate[:N], constellation)


# --- 検出戦略 ---

class DetectionStrategy(ABC):
    """検出器のインターフェース。"""
    name = ""

    @abstractmethod
    def detect(self, inp: DetectorInput, sigma2: float, constellation: Constellation,
               model: WidelyLinearModel | None = None) -> DetectedFrame:
        pass


class MmseDetector(DetectionStrategy):
    name = "mmse"

    def detect(self, inp, sigma2, constellation, model=None):
        return mmse_detect(inp, sigma2, constellation)


class ZfDetector(DetectionStrategy):
    name = "zf"

    def detect(self, inp, sigma2, constellation, model=None):
        return zf_detect(inp, constellation)


class MlDetector(DetectionStrategy):
    name = "ml"

    def detect(self, inp, sigma2, constellation, model=None):
        if model is None:
            model = WidelyLinearModel(inp.h_eff, np.zeros_like(inp.h_eff))
        return ml_detect(inp.y, model, constellation)


class WlMmseDetector(DetectionStrategy):
    name = "wl_mmse"

    def detect(self, inp, sigma2, constellation, model=None):
        if model is None:
            model = WidelyLinearModel(inp.h_eff, np.zeros_like(inp.h_eff))
        return wl_mmse_detect(inp.y, model, inp.noise_cov, inp.noise_pcov, constellation)


def create_detector(name: str) -> DetectionStrategy:
    if name == "mmse":
        return MmseDetector()
    elif name == "zf":
        return ZfDetector()
    elif name == "ml":
        return MlDetector()
    elif name == "wl_mmse":
        return WlMmseDetector()
    raise InvalidArgumentError(f"Unknown detector '{name}', expected one of {sorted(DETECTORS)}", detector=name)
