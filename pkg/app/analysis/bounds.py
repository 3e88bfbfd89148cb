"""誤り率の解析的な上界 (PEP / ABEP) と、その検証用のモンテカルロ推定。

受信信号は y = Ψ₁(x)h + Ψ₂(x)h* + w̄ と書ける。Ψ₁, Ψ₂ の第 i 列は
i 番目のパスの Γ Δ Π を DAFT 領域に写した 4 つの行列から作られる。
上界は検出器と同じ広義線形の距離 ‖Δ₁h + Δ₂h*‖ を使い、非真性な w̄ は
最悪方向の分散で抑えたうえで、Q 関数の 2 指数近似を利得について平均する。
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.stats import norm

from app.constants import BOUND_POSITIONS_AVERAGED, BOUND_TERMS_MODES, EIGENVALUE_CUTOFF
from app.dsp.afdm import AfdmParams, daft_matrix
from app.dsp.channel import ChannelGeometry, draw_path_gains, path_matrices, psd_sqrt
from app.dsp.constellation import Constellation
from app.dsp.iqi import IqImbalance
from app.errors import InvalidArgumentError

log = logging.getLogger(__name__)

_BRUTE_FORCE_MIN_TRIALS = 10_000
_BRUTE_FORCE_CHUNK = 8192


@dataclass(frozen=True)
class CodewordMatrices:
    psi1: np.ndarray = field(repr=False)
    psi2: np.ndarray = field(repr=False)

    @property
    def psi_sum(self) -> np.ndarray:
        return self.psi1 + self.psi2

    def predict(self, h) -> np.ndarray:
        """Ψ₁h + Ψ₂h*。h は (P,) または (T, P)。"""
        h = np.asarray(h, dtype=np.complex128)
        return h @ self.psi1.T + np.conj(h) @ self.psi2.T

    def __sub__(self, other: CodewordMatrices) -> CodewordMatrices:
        return CodewordMatrices(self.psi1 - other.psi1, self.psi2 - other.psi2)

    def real_map(self) -> np.ndarray:
        """h -> Ψ₁h + Ψ₂h* を [Re h; Im h] から [Re; Im] への 2N x 2P 実行列で表す。"""
        a, b = self.psi1, self.psi2
        return np.block([[a.real + b.real, b.imag - a.imag],
                         [a.imag + b.imag, a.real - b.real]])


@dataclass(frozen=True)
class PepTerms:
    """実数化したチャネル利得 [Re h; Im h] についての固有値と指数の係数。

    sigma2_wbar は w̄ の対角分散 (|μ|²+|υ|²)σ²、sigma2_bound は非真性な w̄ の
    最悪方向の分散 (|μ|+|υ|)²σ² で、γ₁, γ₂ は後者から作る。
    """
    eigenvalues: np.ndarray = field(repr=False)
    rank_k: int
    epsilon: int
    gamma1: float
    gamma2: float
    sigma2_wbar: float
    sigma2_bound: float


@dataclass(frozen=True)
class PairTerm:
    p: int
    q: int
    pep: float
    n_be: int


@dataclass(frozen=True)
class AbepResult:
    """ABEP の和集合上界。bound は項の和そのもので、1 で打ち切らない。"""
    bound: float
    per_pair_terms: tuple[PairTerm, ...] = field(repr=False)
    positions_mode: str
    terms_mode: str = "full"


class CodewordBasis:
    """パス形状と IQI から決まる Ψ 行列の構成要素。

    各パス i について M1 = A G Aᴴ, M2 = A G Aᵀ, M3 = A G* Aᵀ, M4 = A G* Aᴴ
    (G = Γ Δ Π) を保持し、任意の x に対する Ψ₁(x), Ψ₂(x) を作る。
    """

    def __init__(self, geometry: ChannelGeometry, tx_iqi: IqImbalance, rx_iqi: IqImbalance, params: AfdmParams):
        self.geometry = geometry
        self.tx_iqi = tx_iqi
        self.rx_iqi = rx_iqi
        self.params = params
        A = daft_matrix(params)
        G = path_matrices(geometry, params)
        Gc = np.conj(G)
        Ah, At = A.conj().T, A.T
        self.m1 = A @ G @ Ah
        self.m2 = A @ G @ At
        self.m3 = A @ Gc @ At
        self.m4 = A @ Gc @ Ah
        mt, ut, mr, ur = tx_iqi.mu, tx_iqi.upsilon, rx_iqi.mu, rx_iqi.upsilon
        self.c1 = mr * mt
        self.c2 = mr * ut
        self.c3 = ur * np.conj(mt)
        self.c4 = ur * np.conj(ut)

    @property
    def P(self) -> int:
        return self.geometry.P

    def columns(self, x) -> CodewordMatrices:
        xv = x.values if hasattr(x, "values") else np.asarray(x, dtype=np.complex128)
        if xv.size != self.params.N:
            raise InvalidArgumentError(f"symbol vector length {xv.size} does not match N={self.params.N}")
        xc = np.conj(xv)
        psi1 = self.c1 * (self.m1 @ xv) + self.c2 * (self.m2 @ xc)
        psi2 = self.c3 * (self.m3 @ xc) + self.c4 * (self.m4 @ xv)
        return CodewordMatrices(psi1.T, psi2.T)

    def difference(self, position: int, d: complex) -> CodewordMatrices:
        """1 箇所だけ d だけ異なる 2 つの符号語の Ψ₁, Ψ₂ の差 (各 N x P)。"""
        dc = np.conj(d)
        m = position
        psi1 = self.c1 * d * self.m1[:, :, m] + self.c2 * dc * self.m2[:, :, m]
        psi2 = self.c3 * dc * self.m3[:, :, m] + self.c4 * d * self.m4[:, :, m]
        return CodewordMatrices(psi1.T, psi2.T)


@lru_cache(maxsize=16)
def codeword_basis(geometry: ChannelGeometry, tx_iqi: IqImbalance, rx_iqi: IqImbalance,
                   params: AfdmParams) -> CodewordBasis:
    return CodewordBasis(geometry, tx_iqi, rx_iqi, params)


def build_codeword_matrices(x, geometry: ChannelGeometry, tx_iqi: IqImbalance, rx_iqi: IqImbalance,
                            params: AfdmParams) -> CodewordMatrices:
    return codeword_basis(geometry, tx_iqi, rx_iqi, params).columns(x)


def _covariance(channel_cov, P: int) -> np.ndarray:
    if channel_cov is None:
        return np.eye(P) / P
    cov = np.asarray(channel_cov, dtype=np.complex128)
    if cov.shape != (P, P):
        raise InvalidArgumentError(f"channel covariance must be {P}x{P}, got {cov.shape}")
    return cov


def _real_covariance(cov: np.ndarray) -> np.ndarray:
    """h ~ CN(0, R) のとき [Re h; Im h] の共分散 ½[[Re R, -Im R], [Im R, Re R]]。"""
    return 0.5 * np.block([[cov.real, -cov.imag], [cov.imag, cov.real]])


def bound_noise_variance(rx_iqi: IqImbalance, sigma2: float) -> float:
    """Re(dᴴw̄) の分散を ½‖d‖²·(|μ|+|υ|)²σ² で上から抑える係数。"""
    return (abs(rx_iqi.mu) + abs(rx_iqi.upsilon)) ** 2 * sigma2


def pep_terms(delta, sigma2: float, rx_iqi: IqImbalance, channel_cov=None) -> PepTerms:
    """符号語差 Δ から ‖Δ₁h + Δ₂h*‖² の二次形式の固有値と γ₁, γ₂ を求める。

    delta は CodewordMatrices (Ψ₁, Ψ₂ の差) か、鏡像成分のない N x P 行列。
    固有値は実数化した利得 [Re h; Im h] についてのもので、IQI がなければ
    複素の固有値 λ が λ/2 の組として 2 回ずつ現れる。
    """
    if not sigma2 > 0:
        raise InvalidArgumentError(f"sigma2 must be > 0, got {sigma2}")
    if not isinstance(delta, CodewordMatrices):
        delta = np.asarray(delta, dtype=np.complex128)
        delta = CodewordMatrices(delta, np.zeros_like(delta))
    P = delta.psi1.shape[1]
    cov = _covariance(channel_cov, P)
    epsilon = int(np.linalg.matrix_rank(cov, hermitian=True))
    if not 1 <= epsilon <= P:
        raise InvalidArgumentError(f"channel covariance rank {epsilon} outside [1, {P}]")
    root = psd_sqrt(_real_covariance(cov)).real
    D = delta.real_map()
    gram = root @ (D.T @ D) @ root
    eig = scipy.linalg.eigh((gram + gram.T) / 2.0, eigvals_only=True)
    top = eig.max() if eig.size else 0.0
    kept = eig[eig > EIGENVALUE_CUTOFF * top] if top > 0 else np.empty(0)
    sigma2_bound = bound_noise_variance(rx_iqi, sigma2)
    return PepTerms(eigenvalues=kept, rank_k=int(kept.size), epsilon=epsilon,
                    gamma1=1.0 / (4.0 * sigma2_bound), gamma2=1.0 / (3.0 * sigma2_bound),
                    sigma2_wbar=rx_iqi.power_gain * sigma2, sigma2_bound=sigma2_bound)


def pep_from_terms(terms: PepTerms) -> float:
    """(1/12)∏ (1+2γ₁η)^{-1/2} + (1/4)∏ (1+2γ₂η)^{-1/2}。固有値が空なら 1/3。"""
    eta = terms.eigenvalues
    return float(np.prod(1.0 / np.sqrt(1.0 + 2.0 * terms.gamma1 * eta)) / 12.0
                 + np.prod(1.0 / np.sqrt(1.0 + 2.0 * terms.gamma2 * eta)) / 4.0)


def _codeword_pair(xp: complex, xq: complex, position: int, N: int, reference) -> tuple[np.ndarray, np.ndarray]:
    if not 0 <= position < N:
        raise InvalidArgumentError(f"position {position} outside [0, {N})")
    base = np.full(N, xp, dtype=np.complex128) if reference is None else np.array(reference, dtype=np.complex128)
    if base.size != N:
        raise InvalidArgumentError(f"reference vector length {base.size} does not match N={N}")
    x_p, x_q = base.copy(), base.copy()
    x_p[position] = xp
    x_q[position] = xq
    return x_p, x_q


def pep_bound(xp: complex, xq: complex, position: int, geometry: ChannelGeometry,
              tx_iqi: IqImbalance, rx_iqi: IqImbalance, sigma2: float, params: AfdmParams,
              channel_cov=None, reference=None) -> float:
    """位置 position だけが xp / xq で異なる符号語対の PEP 上界。"""
    basis = codeword_basis(geometry, tx_iqi, rx_iqi, params)
    x_p, x_q = _codeword_pair(xp, xq, position, params.N, reference)
    delta = basis.columns(x_p) - basis.columns(x_q)
    return pep_from_terms(pep_terms(delta, sigma2, rx_iqi, channel_cov))


def abep_bound(constellation: Constellation, geometry: ChannelGeometry, tx_iqi: IqImbalance,
               rx_iqi: IqImbalance, sigma2: float, params: AfdmParams,
               positions: str | int = BOUND_POSITIONS_AVERAGED, terms: str = "full",
               channel_cov=None) -> AbepResult:
    """ABEP = Σ_p Σ_q PEP(p→q)·N_be(p, q) / (N_b·2^{N_b})。

    positions="averaged" は各対の PEP を全位置で平均し、整数を渡すと
    その位置だけで評価する。terms="dominant" は最小距離の対だけを足す。
    """
    if terms not in BOUND_TERMS_MODES:
        raise InvalidArgumentError(f"terms must be one of {BOUND_TERMS_MODES}, got '{terms}'")
    if positions == BOUND_POSITIONS_AVERAGED:
        position_list = range(params.N)
        mode = BOUND_POSITIONS_AVERAGED
    else:
        m = int(positions)
        if not 0 <= m < params.N:
            raise InvalidArgumentError(f"position {m} outside [0, {params.N})")
        position_list = [m]
        mode = f"fixed({m})"

    basis = codeword_basis(geometry, tx_iqi, rx_iqi, params)
    pts = constellation.points
    pairs = [(p, q) for p in range(constellation.size) for q in range(constellation.size) if p != q]
    if terms == "dominant":
        d2 = np.array([abs(pts[p] - pts[q]) ** 2 for p, q in pairs])
        pairs = [pair for pair, v in zip(pairs, d2) if v <= d2.min() * (1.0 + 1e-9)]

    table = []
    for p, q in pairs:
        d = pts[p] - pts[q]
        peps = [pep_from_terms(pep_terms(basis.difference(m, d), sigma2, rx_iqi, channel_cov))
                for m in position_list]
        table.append(PairTerm(p, q, float(np.mean(peps)), constellation.bit_distance(p, q)))

    norm_factor = constellation.N_b * 2 ** constellation.N_b
    bound = sum(t.pep * t.n_be for t in table) / norm_factor
    log.debug(f"ABEP bound {bound:.4e} at sigma2={sigma2:.4e} ({len(table)} pairs, {mode}, {terms})")
    return AbepResult(bound=float(bound), per_pair_terms=tuple(table), positions_mode=mode, terms_mode=terms)


def q_approx(x):
    """Q(x) ≈ e^{-x²/2}/12 + e^{-2x²/3}/4 (x >= 0)。"""
    xv = np.asarray(x, dtype=np.float64)
    if np.any(xv < 0):
        raise InvalidArgumentError("q_approx requires x >= 0")
    out = np.exp(-xv ** 2 / 2.0) / 12.0 + np.exp(-2.0 * xv ** 2 / 3.0) / 4.0
    return float(out) if out.ndim == 0 else out


def q_exact(x):
    out = norm.sf(np.asarray(x, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def rayleigh_pep_exact(distance2: float, sigma2: float) -> float:
    """単一パス CN(0,1)・IQI なしの PEP の閉形式 ½(1 - √(a/(1+a)))、a = d²/(4σ²)。"""
    if distance2 < 0 or not sigma2 > 0:
        raise InvalidArgumentError("rayleigh_pep_exact requires distance2 >= 0 and sigma2 > 0")
    a = distance2 / (4.0 * sigma2)
    return float(0.5 * (1.0 - np.sqrt(a / (1.0 + a))))


def brute_force_pep(xp: complex, xq: complex, position: int, geometry: ChannelGeometry,
                    tx_iqi: IqImbalance, rx_iqi: IqImbalance, sigma2: float, params: AfdmParams,
                    trials: int, rng: np.random.Generator, channel_cov=None,
                    reference=None) -> tuple[float, float]:
    """Pr(‖y - Ψ₁(x_q)h - Ψ₂(x_q)h*‖² < ‖y - Ψ₁(x_p)h - Ψ₂(x_p)h*‖²) の推定値と標準誤差。

    x_p 送信、h ~ CN(0, R)、w̄ = A(μ_rx w + υ_rx w*)。同点は 1/2 と数える。
    """
    if trials < _BRUTE_FORCE_MIN_TRIALS:
        raise InvalidArgumentError(f"brute_force_pep needs at least {_BRUTE_FORCE_MIN_TRIALS} trials, got {trials}")
    if not sigma2 > 0:
        raise InvalidArgumentError(f"sigma2 must be > 0, got {sigma2}")
    basis = codeword_basis(geometry, tx_iqi, rx_iqi, params)
    x_p, x_q = _codeword_pair(xp, xq, position, params.N, reference)
    cw_p, cw_q = basis.columns(x_p), basis.columns(x_q)
    cov = _covariance(channel_cov, geometry.P)
    A_t = daft_matrix(params).T
    N = params.N

    outcomes = np.empty(trials)
    for start in range(0, trials, _BRUTE_FORCE_CHUNK):
        T = min(_BRUTE_FORCE_CHUNK, trials - start)
        h = draw_path_gains(geometry.P, rng, cov, size=T)
        w = np.sqrt(sigma2 / 2.0) * (rng.standard_normal((T, N)) + 1j * rng.standard_normal((T, N)))
        w_bar = (rx_iqi.mu * w + rx_iqi.upsilon * np.conj(w)) @ A_t
        y = cw_p.predict(h) + w_bar
        metric_p = np.sum(np.abs(y - cw_p.predict(h)) ** 2, axis=1)
        metric_q = np.sum(np.abs(y - cw_q.predict(h)) ** 2, axis=1)
        outcomes[start:start + T] = (metric_q < metric_p) + 0.5 * (metric_q == metric_p)

    estimate = float(outcomes.mean())
    se = float(outcomes.std(ddof=1) / np.sqrt(trials))
    return estimate, se
