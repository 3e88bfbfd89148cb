"""二重選択性 (遅延・ドップラー) チャネルの生成と適用。

時間領域のパス畳み込みと、行列表現 H = Σ h_i Γ_CPP_i Δ_{ν_i} Π^{τ_i} の
2 つの経路を持ち、両者は CPP 除去後に一致しなければならない。
雑音はこのモジュールでは加えない。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from app.constants import DELAY_MODES, DOPPLER_MODES
from app.dsp.afdm import AfdmParams, TimeSignal, daft_matrix
from app.errors import InvalidArgumentError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathComponent:
    gain: complex
    delay: int
    doppler: float


@dataclass(frozen=True)
class ChannelGeometry:
    """パスの遅延とドップラーだけを持つ決定的な形状 (利得は含まない)。"""
    delays: tuple[int, ...]
    dopplers: tuple[float, ...]

    def __post_init__(self):
        if len(self.delays) != len(self.dopplers) or not self.delays:
            raise InvalidArgumentError("geometry needs matching, nonempty delay and doppler lists")

    @property
    def P(self) -> int:
        return len(self.delays)

    def with_gains(self, gains, covariance=None) -> ChannelRealization:
        paths = tuple(PathComponent(complex(g), int(d), float(v))
                      for g, d, v in zip(gains, self.delays, self.dopplers))
        return ChannelRealization(paths, covariance)


@dataclass(frozen=True)
class ChannelRealization:
    """P 本のパスと利得の共分散 E(hhᴴ)。共分散の既定値は (1/P)I。"""
    paths: tuple[PathComponent, ...]
    covariance: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.paths) < 1:
            raise InvalidArgumentError("a channel needs at least one path")
        P = len(self.paths)
        cov = np.eye(P) / P if self.covariance is None else np.array(self.covariance, dtype=np.complex128)
        validate_covariance(cov, P)
        cov.setflags(write=False)
        object.__setattr__(self, "paths", tuple(self.paths))
        object.__setattr__(self, "covariance", cov)

    @property
    def P(self) -> int:
        return len(self.paths)

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=np.complex128)

    @property
    def geometry(self) -> ChannelGeometry:
        return ChannelGeometry(tuple(p.delay for p in self.paths),
                               tuple(p.doppler for p in self.paths))


@dataclass(frozen=True)
class EffectiveChannel:
    """時間領域行列 H と DAFT 領域行列 H_eff = A H Aᴴ。"""
    time_matrix: np.ndarray = field(repr=False)
    daft_matrix: np.ndarray = field(repr=False)


def validate_covariance(cov: np.ndarray, P: int) -> None:
    if cov.shape != (P, P):
        raise InvalidArgumentError(f"channel covariance must be {P}x{P}, got {cov.shape}")
    if not np.allclose(cov, cov.conj().T, atol=1e-12):
        raise InvalidArgumentError("channel covariance must be Hermitian")
    w = np.linalg.eigvalsh(cov)
    if w.min() < -1e-12 * max(1.0, w.max()):
        raise InvalidArgumentError("channel covariance must be positive semidefinite")


def psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """半正定値エルミート行列の平方根 (固有値分解)。"""
    w, V = np.linalg.eigh(cov)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def identity_channel() -> ChannelRealization:
    """h = 1, τ = 0, ν = 0 の 1 パス (AWGN のみの場合)。"""
    return ChannelRealization((PathComponent(1.0 + 0j, 0, 0.0),), np.ones((1, 1)))


def draw_path_gains(P: int, rng: np.random.Generator, covariance=None, size: int | None = None) -> np.ndarray:
    """利得 h ~ CN(0, E(hhᴴ)) を引く。size を渡すと (size, P) を返す。"""
    shape = (P,) if size is None else (size, P)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    if covariance is None:
        return z / np.sqrt(P)
    root = psd_sqrt(np.asarray(covariance, dtype=np.complex128))
    return z @ root.T


def resolve_delay_mode(delay_mode: str, P: int, tau_max: int) -> str:
    """"auto" は遅延を互いに異ならせられるなら distinct、無理なら shared。"""
    if delay_mode not in DELAY_MODES:
        raise InvalidArgumentError(f"Unknown delay mode '{delay_mode}'", delay_mode=delay_mode)
    if delay_mode == "auto":
        return "distinct" if P <= tau_max + 1 else "shared"
    return delay_mode


def _shared_integer_grid(P: int, tau_max: int, nu_max: int, rng: np.random.Generator):
    """(遅延, ドップラー) の格子点を重複なく P 個選ぶ。先頭パスは遅延 0 の行から選ぶ。"""
    nu = np.arange(-nu_max, nu_max + 1)
    grid = [(t, int(v)) for t in range(tau_max + 1) for v in nu]
    if P > len(grid):
        raise InvalidArgumentError(f"{P} paths do not fit on the {len(grid)}-point delay-Doppler grid",
                                   P=P, tau_max=tau_max, nu_max=nu_max)
    first = grid[int(rng.integers(0, nu.size))]
    rest = [g for g in grid if g != first]
    chosen = [first] + [rest[int(i)] for i in rng.choice(len(rest), size=P - 1, replace=False)]
    return tuple(t for t, _ in chosen), tuple(float(v) for _, v in chosen)


def sample_geometry(P: int, tau_max: int, nu_max: float, doppler_mode: str,
                    rng: np.random.Generator, delay_mode: str = "auto") -> ChannelGeometry:
    """遅延 (τ_1 = 0 固定) とモード別のドップラーを引く。

    distinct では遅延が互いに異なる。shared では遅延の重複を許し、
    整数ドップラーのときは格子点 (τ, ν) が重ならないように選ぶ。
    """
    if P < 1 or tau_max < 0 or nu_max < 0:
        raise InvalidArgumentError("sample_channel requires P >= 1 and nonnegative bounds",
                                   P=P, tau_max=tau_max, nu_max=nu_max)
    if doppler_mode not in DOPPLER_MODES:
        raise InvalidArgumentError(f"Unknown doppler mode '{doppler_mode}'", doppler_mode=doppler_mode)
    mode = resolve_delay_mode(delay_mode, P, tau_max)
    if mode == "distinct" and P > tau_max + 1:
        raise InvalidArgumentError(f"{P} paths cannot have distinct delays within [0, {tau_max}]",
                                   P=P, tau_max=tau_max)

    if mode == "shared" and doppler_mode == "integer":
        delays, dopplers = _shared_integer_grid(P, tau_max, int(nu_max), rng)
        return ChannelGeometry(delays, dopplers)

    if P == 1:
        others = np.array([], dtype=int)
    elif mode == "distinct":
        others = rng.choice(np.arange(1, tau_max + 1), size=P - 1, replace=False)
    else:
        others = rng.integers(0, tau_max + 1, size=P - 1)
    delays = (0,) + tuple(int(d) for d in others)

    if doppler_mode == "integer":
        dopplers = rng.integers(-nu_max, nu_max + 1, size=P).astype(float)
    elif doppler_mode == "fractional":
        dopplers = rng.uniform(-nu_max, nu_max, size=P)
    else:
        dopplers = nu_max * np.cos(rng.uniform(0.0, 2.0 * np.pi, size=P))
    return ChannelGeometry(delays, tuple(float(v) for v in dopplers))


def sample_channel(P: int, tau_max: int, nu_max: float, doppler_mode: str, rng: np.random.Generator,
                   covariance=None, geometry: ChannelGeometry | None = None,
                   delay_mode: str = "auto") -> ChannelRealization:
    """チャネル実現値を 1 つ引く。geometry を渡すと利得だけを引き直す。"""
    if geometry is None:
        geometry = sample_geometry(P, tau_max, nu_max, doppler_mode, rng, delay_mode)
    elif geometry.P != P:
        raise InvalidArgumentError(f"geometry has {geometry.P} paths, expected {P}")
    gains = draw_path_gains(P, rng, covariance)
    return geometry.with_gains(gains, covariance)


def path_matrix(delay: int, doppler: float, params: AfdmParams) -> np.ndarray:
    """1 パス分の Γ_CPP Δ_ν Π^τ (N x N)。"""
    N = params.N
    n = np.arange(N)
    diag = np.exp(-2j * np.pi * np.mod(doppler * n / N, 1.0))
    wrapped = n < delay
    gamma = np.exp(-2j * np.pi * np.mod(params.c1 * (N * N - 2 * N * (delay - n[wrapped])), 1.0))
    diag[wrapped] *= gamma
    G = np.zeros((N, N), dtype=np.complex128)
    G[n, (n - delay) % N] = diag
    return G


def path_matrices(geometry: ChannelGeometry, params: AfdmParams) -> np.ndarray:
    """全パスの Γ Δ Π を (P, N, N) で返す。"""
    return np.stack([path_matrix(d, v, params) for d, v in zip(geometry.delays, geometry.dopplers)])


def time_matrix(chan: ChannelRealization, params: AfdmParams) -> np.ndarray:
    return np.tensordot(chan.gains, path_matrices(chan.geometry, params), axes=1)


def effective_matrix(chan: ChannelRealization, params: AfdmParams) -> EffectiveChannel:
    """H と H_eff = A H Aᴴ を作る。"""
    H = time_matrix(chan, params)
    A = daft_matrix(params)
    return EffectiveChannel(time_matrix=H, daft_matrix=A @ H @ A.conj().T)


def apply_time_domain(s: TimeSignal, chan: ChannelRealization, params: AfdmParams) -> TimeSignal:
    """r[n] = Σ h_i e^{-j2πν_i n/N} s[n - τ_i] を CPP 付きフレーム上で計算する。

    フレーム先頭より前のサンプル (前フレーム) は 0 とみなす。CPP 除去後の
    本体部分だけが意味を持つ。
    """
    if not s.has_cpp:
        raise InvalidArgumentError("apply_time_domain expects a signal with CPP")
    if s.values.size != params.frame_length:
        raise InvalidArgumentError(f"frame length {s.values.size} does not match N + L_cpp = {params.frame_length}")
    x = s.values
    L = params.L_cpp
    n = np.arange(-L, params.N, dtype=np.float64)
    r = np.zeros_like(x)
    for path in chan.paths:
        if path.delay > L:
            raise InvalidArgumentError(f"path delay {path.delay} exceeds the CPP length {L}",
                                       delay=path.delay, L_cpp=L)
        shifted = np.zeros_like(x)
        shifted[path.delay:] = x[:x.size - path.delay]
        r += path.gain * np.exp(-2j * np.pi * np.mod(path.doppler * n / params.N, 1.0)) * shifted
    return TimeSignal(r, has_cpp=True)
