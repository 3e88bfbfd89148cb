"""DAFT 領域の変復調 (IDAFT/DAFT, CPP の付加と除去)。

DFT は e^{-j2πnm/N}/√N の規約で固定し、A = Λ_{c2} F Λ_{c1} とする。
c1 = c2 = 0 のとき、すべての演算は OFDM (DFT) の対応する演算に一致する。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from app.errors import InvalidArgumentError

log = logging.getLogger(__name__)


def _frozen_complex(values) -> np.ndarray:
    arr = np.array(values, dtype=np.complex128).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AfdmParams:
    """AFDM フレームのパラメータ。DAFT 行列の定義を持つ。"""
    N: int
    c1: float
    c2: float
    nu_max: int = 0
    tau_max: int = 0
    zeta_nu: int = 0
    L_cpp: int = 0

    def __post_init__(self):
        if self.N < 2:
            raise InvalidArgumentError(f"N must be >= 2, got {self.N}", N=self.N)
        if self.nu_max < 0 or self.tau_max < 0 or self.zeta_nu < 0 or self.L_cpp < 0:
            raise InvalidArgumentError("nu_max, tau_max, zeta_nu and L_cpp must be nonnegative")
        if self.tau_max >= self.N:
            raise InvalidArgumentError(f"tau_max ({self.tau_max}) must be < N ({self.N})")
        if self.L_cpp < self.tau_max:
            raise InvalidArgumentError(f"L_cpp ({self.L_cpp}) must be >= tau_max ({self.tau_max})")
        if not 0.0 <= self.c2 < 1.0 / (2 * self.N):
            raise InvalidArgumentError(f"c2 must lie in [0, 1/(2N)), got {self.c2}", c2=self.c2)

    @classmethod
    def from_grid(cls, N: int, nu_max: int, tau_max: int, zeta_nu: int = 0,
                  c2: float | None = None, L_cpp: int | None = None,
                  waveform: str = "afdm") -> AfdmParams:
        """遅延・ドップラーの範囲からチャープレートを導出して構築する。

        Args:
            waveform: "ofdm" のときは c1 = c2 = 0 に固定する。
        """
        if waveform == "ofdm":
            c1, c2_value = 0.0, 0.0
        else:
            c1, c2_value = derive_chirp_rates(nu_max, zeta_nu, N, c2)
        cpp = tau_max if L_cpp is None else L_cpp
        return cls(N=N, c1=c1, c2=c2_value, nu_max=nu_max, tau_max=tau_max,
                   zeta_nu=zeta_nu, L_cpp=cpp)

    @property
    def frame_length(self) -> int:
        return self.N + self.L_cpp

    @property
    def is_ofdm(self) -> bool:
        return self.c1 == 0.0 and self.c2 == 0.0


@dataclass(frozen=True)
class DaftSymbolVector:
    """DAFT 領域のシンボル x[m]。"""
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_complex(self.values))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class TimeSignal:
    """時間領域のサンプル列。has_cpp が真なら先頭 L_cpp サンプルが CPP。"""
    values: np.ndarray = field(repr=False)
    has_cpp: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_complex(self.values))

    def __len__(self) -> int:
        return self.values.size

    def replace(self, values) -> TimeSignal:
        return TimeSignal(values, self.has_cpp)


def derive_chirp_rates(nu_max: int, zeta_nu: int, N: int,
                       c2_override: float | None = None) -> tuple[float, float]:
    """最適ダイバーシチ条件から c1 を求め、c2 の既定値 1/(2N²) を返す。"""
    if N < 2 or nu_max < 0 or zeta_nu < 0:
        raise InvalidArgumentError("derive_chirp_rates requires N >= 2, nu_max >= 0, zeta_nu >= 0",
                                   N=N, nu_max=nu_max, zeta_nu=zeta_nu)
    c1 = float(Fraction(2 * (nu_max + zeta_nu) + 1, 2 * N))
    if c2_override is None:
        c2 = float(Fraction(1, 2 * N * N))
    else:
        if not 0.0 <= c2_override < 1.0 / (2 * N):
            raise InvalidArgumentError(f"c2_override must lie in [0, 1/(2N)), got {c2_override}",
                                       c2_override=c2_override)
        c2 = float(c2_override)
    return c1, c2


def chirp(c: float, N: int) -> np.ndarray:
    """Λ_c の対角成分 e^{-j2π c n²}。"""
    n = np.arange(N, dtype=np.float64)
    # 位相は 1 周期に畳んでから指数を取る (大きな n² での桁落ち防止)
    return np.exp(-2j * np.pi * np.mod(c * n * n, 1.0))


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@lru_cache(maxsize=32)
def _daft_matrix_cached(params: AfdmParams) -> np.ndarray:
    N = params.N
    n = np.arange(N)
    F = np.exp(-2j * np.pi * np.mod(np.outer(n, n), N) / N) / np.sqrt(N)
    A = chirp(params.c2, N)[:, None] * F * chirp(params.c1, N)[None, :]
    A.setflags(write=False)
    return A


def daft_matrix(params: AfdmParams) -> np.ndarray:
    """A = Λ_{c2} F Λ_{c1} を返す (読み取り専用)。"""
    return _daft_matrix_cached(params)


def _coerce(values, expected: int, what: str) -> np.ndarray:
    arr = values.values if hasattr(values, "values") else np.asarray(values, dtype=np.complex128)
    if arr.size != expected:
        raise InvalidArgumentError(f"{what} length {arr.size} does not match N={expected}",
                                   length=int(arr.size), N=expected)
    return arr


def idaft(x: DaftSymbolVector, params: AfdmParams) -> TimeSignal:
    """s = Aᴴ x。N が 2 のべき乗なら FFT、そうでなければ行列積。"""
    xv = _coerce(x, params.N, "DAFT symbol vector")
    if _is_power_of_two(params.N):
        lam1 = chirp(params.c1, params.N)
        lam2 = chirp(params.c2, params.N)
        s = np.conj(lam1) * np.fft.ifft(np.conj(lam2) * xv, norm="ortho")
    else:
        s = daft_matrix(params).conj().T @ xv
    return TimeSignal(s, has_cpp=False)


def daft(r: TimeSignal, params: AfdmParams) -> DaftSymbolVector:
    """y = A r。CPP は除去済みであること。"""
    if getattr(r, "has_cpp", False):
        raise InvalidArgumentError("CPP must be removed before the DAFT")
    rv = _coerce(r, params.N, "time signal")
    if _is_power_of_two(params.N):
        y = chirp(params.c2, params.N) * np.fft.fft(chirp(params.c1, params.N) * rv, norm="ortho")
    else:
        y = daft_matrix(params) @ rv
    return DaftSymbolVector(y)


def cpp_phase(params: AfdmParams) -> np.ndarray:
    """CPP の各サンプル n = -L_cpp..-1 に掛かる位相 e^{-j2πc1(N² + 2Nn)}。"""
    N = params.N
    n = np.arange(-params.L_cpp, 0, dtype=np.float64)
    return np.exp(-2j * np.pi * np.mod(params.c1 * (N * N + 2 * N * n), 1.0))


def cpp_is_cyclic(params: AfdmParams, atol: float = 1e-12) -> bool:
    """CPP が通常の巡回プレフィックスに退化するか (位相がすべて 1)。"""
    return bool(np.all(np.abs(cpp_phase(params) - 1.0) < atol))


def add_cpp(s: TimeSignal, params: AfdmParams) -> TimeSignal:
    """チャープ周期プレフィックスを先頭に付加する。"""
    if s.has_cpp:
        raise InvalidArgumentError("signal already carries a CPP")
    body = _coerce(s, params.N, "time signal")
    if params.L_cpp == 0:
        return TimeSignal(body, has_cpp=True)
    prefix = body[params.N - params.L_cpp:] * cpp_phase(params)
    return TimeSignal(np.concatenate([prefix, body]), has_cpp=True)


def remove_cpp(r: TimeSignal, params: AfdmParams) -> TimeSignal:
    """先頭 L_cpp サンプルを捨てる。"""
    if not r.has_cpp:
        raise InvalidArgumentError("signal carries no CPP to remove")
    if r.values.size != params.frame_length:
        raise InvalidArgumentError(f"frame length {r.values.size} does not match N + L_cpp = {params.frame_length}")
    return TimeSignal(r.values[params.L_cpp:], has_cpp=False)
