from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from app.constants import CONSTELLATIONS
from app.dsp.afdm import DaftSymbolVector
from app.errors import InvalidArgumentError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Constellation:
    """Gray ラベル付きの単位平均エネルギー信号点配置。

    points[k] のラベルは k の 2 進表現 (MSB 先頭) で、bit_labels[k] に展開される。
    """
    name: str
    points: np.ndarray = field(repr=False, compare=False)
    bit_labels: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.complex128)
        labels = np.array(self.bit_labels, dtype=np.int8)
        pts.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "bit_labels", labels)
        if pts.size != 2 ** self.N_b:
            raise InvalidArgumentError(f"{self.name}: |points| must equal 2^N_b")

    @property
    def N_b(self) -> int:
        return int(self.bit_labels.shape[1])

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def pseudo_variance(self) -> complex:
        """E[x²]。QPSK・16QAM は 0 (proper)、BPSK は 1。"""
        return complex(np.mean(self.points ** 2))

    def nearest(self, symbols) -> np.ndarray:
        """最小ユークリッド距離の信号点インデックス。"""
        s = np.asarray(symbols, dtype=np.complex128).reshape(-1)
        return np.argmin(np.abs(s[:, None] - self.points[None, :]) ** 2, axis=1)

    def bit_distance(self, p: int, q: int) -> int:
        """ラベル間のハミング距離 N_be。"""
        return int(np.count_nonzero(self.bit_labels[p] != self.bit_labels[q]))


def _labels(n_bits: int) -> np.ndarray:
    k = np.arange(2 ** n_bits)
    return ((k[:, None] >> np.arange(n_bits - 1, -1, -1)[None, :]) & 1).astype(np.int8)


def _gray_pam(bits: np.ndarray) -> np.ndarray:
    """2 ビット Gray ラベル -> {-3, -1, 1, 3} (00 -> -3, 01 -> -1, 11 -> 1, 10 -> 3)。"""
    table = {(0, 0): -3.0, (0, 1): -1.0, (1, 1): 1.0, (1, 0): 3.0}
    return np.array([table[(int(a), int(b))] for a, b in bits])


@lru_cache(maxsize=None)
def get_constellation(name: str) -> Constellation:
    """名前から信号点配置を作る。"""
    key = name.upper()
    if key not in CONSTELLATIONS:
        raise InvalidArgumentError(f"Unknown constellation '{name}'", constellation=name)

    if key == "BPSK":
        labels = _labels(1)
        points = 1.0 - 2.0 * labels[:, 0]
    elif key == "QPSK":
        labels = _labels(2)
        # ビット 0 -> 正。00 -> (1+j)/√2
        points = ((1.0 - 2.0 * labels[:, 0]) + 1j * (1.0 - 2.0 * labels[:, 1])) / np.sqrt(2.0)
    else:
        labels = _labels(4)
        points = (_gray_pam(labels[:, :2]) + 1j * _gray_pam(labels[:, 2:])) / np.sqrt(10.0)

    return Constellation(name=key, points=points, bit_labels=labels)


def map_bits(bits, constellation: Constellation, N: int | None = None) -> DaftSymbolVector:
    """ビット列を Gray マッピングでシンボル列に変換する。N を渡すと長さ N·N_b を検査する。"""
    b = np.asarray(bits, dtype=np.int64).reshape(-1)
    if N is not None and b.size != N * constellation.N_b:
        raise InvalidArgumentError(f"expected {N * constellation.N_b} bits, got {b.size}", N=N)
    if b.size % constellation.N_b != 0:
        raise InvalidArgumentError(f"bit count {b.size} is not a multiple of N_b={constellation.N_b}")
    if np.any((b != 0) & (b != 1)):
        raise InvalidArgumentError("bits must be 0 or 1")
    weights = 1 << np.arange(constellation.N_b - 1, -1, -1)
    index = b.reshape(-1, constellation.N_b) @ weights
    return DaftSymbolVector(constellation.points[index])


def demap_symbols(symbols, constellation: Constellation) -> np.ndarray:
    """硬判定 (最小距離) のあとラベルを引いてビット列を返す。"""
    values = symbols.values if hasattr(symbols, "values") else symbols
    index = constellation.nearest(values)
    return constellation.bit_labels[index].reshape(-1).astype(np.int8)

