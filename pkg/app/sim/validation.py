"""`validate` サブコマンドが実行する不変条件スイートと計算量の計測。"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from app.detection.compensation import compensate_rx, compensate_tx, swapped_order_residual
from app.detection.detectors import DetectorInput, mmse_detect
from app.dsp.afdm import AfdmParams, DaftSymbolVector, add_cpp, daft, daft_matrix, idaft, remove_cpp
from app.dsp.channel import apply_time_domain, identity_channel, sample_channel, time_matrix
from app.dsp.constellation import get_constellation
from app.dsp.iqi import apply_iqi, daft_noise_stats, decompose_interference, iqi_from_db
from app.sim.results import CheckResult, ValidationReport

log = logging.getLogger(__name__)

SCALING_SIZES = tuple(2 ** k for k in range(6, 15))


@dataclass(frozen=True)
class ScalingResult:
    sizes: tuple[int, ...]
    seconds: tuple[float, ...]
    slope: float
    r_squared: float


@dataclass(frozen=True)
class CostSplit:
    N: int
    mmse_seconds: float
    compensation_seconds: float

    @property
    def ratio(self) -> float:
        return self.mmse_seconds / self.compensation_seconds


def _complex_normal(rng, *shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _per_call(fn, calls: int, repeats: int = 5) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(calls):
            fn()
        best = min(best, (time.perf_counter() - t0) / calls)
    return best


def measure_compensation_scaling(sizes=SCALING_SIZES, seed: int = 0) -> ScalingResult:
    """compensate_rx の 1 回あたり時間を測り、log-log の傾きと決定係数を返す。"""
    rng = np.random.default_rng(seed)
    iqi = iqi_from_db(1.0, 3.0)
    seconds = []
    for N in sizes:
        r = _complex_normal(rng, N)
        seconds.append(_per_call(lambda: compensate_rx(r, iqi), calls=max(1, 2 ** 17 // N)))
    x, y = np.log(np.asarray(sizes, dtype=float)), np.log(np.asarray(seconds))
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    r2 = 1.0 - np.sum(residual ** 2) / np.sum((y - y.mean()) ** 2)
    log.debug(f"compensation scaling slope {slope:.3f}, R^2 {r2:.4f}")
    return ScalingResult(tuple(sizes), tuple(seconds), float(slope), float(r2))


def measure_receive_cost_split(N: int = 64, seed: int = 0) -> CostSplit:
    """MMSE の解法時間と、送受信 IQI 補償にかかる時間を比べる。"""
    rng = np.random.default_rng(seed)
    params = AfdmParams.from_grid(N, 2, 2, 1)
    qpsk = get_constellation("QPSK")
    iqi = iqi_from_db(1.0, 3.0)
    H = _complex_normal(rng, N, N)
    inp = DetectorInput.proper(_complex_normal(rng, N), H, 0.1)
    r = _complex_normal(rng, N)
    x = DaftSymbolVector(_complex_normal(rng, N))

    mmse = _per_call(lambda: mmse_detect(inp, 0.1, qpsk), calls=50)
    comp = _per_call(lambda: (compensate_rx(r, iqi), compensate_tx(x, iqi, params)), calls=200)
    return CostSplit(N, mmse, comp)


def _check(name: str, passed, detail: str) -> CheckResult:
    log.info(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return CheckResult(name, bool(passed), detail)


def check_transforms(rng) -> CheckResult:
    worst = 0.0
    for N in (2, 8, 64, 256):
        params = AfdmParams.from_grid(N, 0, 0)
        A = daft_matrix(params)
        x = _complex_normal(rng, N)
        s = idaft(DaftSymbolVector(x), params)
        worst = max(worst,
                    np.max(np.abs(A @ A.conj().T - np.eye(N))),
                    np.max(np.abs(daft(s, params).values - x)),
                    np.max(np.abs(s.values - A.conj().T @ x)),
                    abs(np.linalg.norm(s.values) - np.linalg.norm(x)))
    return _check("transform", worst < 1e-10, f"max deviation {worst:.2e}")


def check_channel_equivalence(rng, trials: int = 200) -> CheckResult:
    params = AfdmParams.from_grid(64, 2, 2, 1)
    worst = 0.0
    for _ in range(trials):
        chan = sample_channel(3, 2, 2, "fractional", rng)
        s = idaft(DaftSymbolVector(_complex_normal(rng, 64)), params)
        r = remove_cpp(apply_time_domain(add_cpp(s, params), chan, params), params)
        worst = max(worst, np.max(np.abs(r.values - time_matrix(chan, params) @ s.values)))
    return _check("channel-equivalence", worst < 1e-10, f"{trials} realizations, max deviation {worst:.2e}")


def check_compensation(rng) -> list[CheckResult]:
    params = AfdmParams.from_grid(64, 2, 2, 1)
    A = daft_matrix(params)
    tx, rx = iqi_from_db(1.0, 3.0), iqi_from_db(1.5, 3.5)
    r = _complex_normal(rng, 64)
    x = get_constellation("QPSK").points[rng.integers(0, 4, 64)]

    rx_err = np.max(np.abs(compensate_rx(apply_iqi(r, rx), rx) - r))
    x_tilde = tx.mu * x + tx.upsilon * (A @ A.T @ np.conj(x))
    tx_err = np.max(np.abs(compensate_tx(x_tilde, tx, params).values - x))
    unconj_err = np.max(np.abs(compensate_tx(x_tilde, tx, params, unconjugated=True).values - x))

    s_bar = apply_iqi(add_cpp(idaft(DaftSymbolVector(x), params), params), tx)
    r_bar = apply_iqi(apply_time_domain(s_bar, identity_channel(), params), rx)
    y = daft(remove_cpp(compensate_rx(r_bar, rx), params), params)
    chain_err = np.max(np.abs(compensate_tx(y, tx, params).values - x))
    return [
        _check("rx-compensation-inverse", rx_err < 1e-12, f"max error {rx_err:.2e}"),
        _check("tx-compensation-inverse", tx_err < 1e-12, f"max error {tx_err:.2e}"),
        _check("unconjugated-tx-fails", unconj_err > 1e-3, f"max error {unconj_err:.2e}"),
        _check("noiseless-chain", chain_err < 1e-10, f"max error {chain_err:.2e}"),
    ]


def _outer_moments(a: np.ndarray, b: np.ndarray, chunk: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """行ごとの外積 a_i b_iᵀ の標本平均と標準誤差 (チャンクごとに集計)。"""
    n = a.shape[0]
    total = np.zeros((a.shape[1], b.shape[1]), dtype=np.complex128)
    total_sq = np.zeros((a.shape[1], b.shape[1]))
    for start in range(0, n, chunk):
        prod = a[start:start + chunk, :, None] * b[start:start + chunk, None, :]
        total += prod.sum(0)
        total_sq += (np.abs(prod) ** 2).sum(0)
    mean = total / n
    var = total_sq / n - np.abs(mean) ** 2
    return mean, np.sqrt(var / n)


def check_noise_statistics(rng, draws: int = 100_000, N: int = 8) -> list[CheckResult]:
    """受信 IQI 後の DAFT 領域雑音の共分散・擬似共分散と、補償後の擬似共分散。"""
    params = AfdmParams.from_grid(N, 1, 1, 0)
    A = daft_matrix(params)
    rx = iqi_from_db(1.5, 3.5)
    sigma2 = 0.5
    cov, pcov = daft_noise_stats(rx, sigma2, params)

    w = np.sqrt(sigma2) * _complex_normal(rng, draws, N)
    w_bar = apply_iqi(w, rx) @ A.T
    mean_c, se_c = _outer_moments(w_bar, np.conj(w_bar))
    mean_p, se_p = _outer_moments(w_bar, w_bar)
    z_c = np.abs(mean_c - cov) / se_c
    z_p = np.abs(mean_p - pcov) / se_p

    restored = compensate_rx(apply_iqi(w, rx), rx) @ A.T
    residual = np.linalg.norm(_outer_moments(restored, restored)[0])
    threshold = 1e-2 * N * sigma2
    return [
        _check("noise-covariance", z_c.max() < 5.0, f"max z-score {z_c.max():.2f}"),
        _check("noise-pseudo-covariance", z_p.max() < 5.0, f"max z-score {z_p.max():.2f}"),
        _check("propriety-restored", residual < threshold,
               f"pseudo-covariance norm {residual:.2e} (threshold {threshold:.2e})"),
    ]


def check_decomposition(rng) -> CheckResult:
    """4 項分解の和が雑音なしの送受信チェーン出力と一致するか (CPP 位相が 1 になる設定)。"""
    params = AfdmParams.from_grid(16, 1, 1, 0)
    tx, rx = iqi_from_db(1.0, 3.0), iqi_from_db(1.5, 3.5)
    chan = sample_channel(2, 1, 1, "integer", rng)
    x = _complex_normal(rng, 16)
    s_bar = apply_iqi(add_cpp(idaft(DaftSymbolVector(x), params), params), tx)
    r_bar = apply_iqi(apply_time_domain(s_bar, chan, params), rx)
    y = daft(remove_cpp(r_bar, params), params).values
    err = np.max(np.abs(decompose_interference(x, chan, tx, rx, params).total() - y))
    return _check("interference-decomposition", err < 1e-10, f"max error {err:.2e}")


def check_cascade_order(rng) -> CheckResult:
    params = AfdmParams.from_grid(64, 2, 2, 1)
    iqi = iqi_from_db(1.0, 3.0)
    x = get_constellation("QPSK").points[rng.integers(0, 4, 64)]
    residual = swapped_order_residual(x, iqi, iqi, params)
    return _check("swapped-order-fails", residual > 1e-3, f"residual {residual:.2e}")


def check_complexity(seed: int) -> list[CheckResult]:
    scaling = measure_compensation_scaling(seed=seed)
    split = measure_receive_cost_split(seed=seed)
    return [
        _check("compensation-linear-cost", abs(scaling.slope - 1.0) <= 0.15,
               f"log-log slope {scaling.slope:.3f} (R^2 {scaling.r_squared:.4f})"),
        _check("mmse-dominates-cost", split.ratio >= 10.0,
               f"MMSE {split.mmse_seconds * 1e6:.1f} us vs compensation "
               f"{split.compensation_seconds * 1e6:.1f} us (x{split.ratio:.1f})"),
    ]


def run_validation_suite(seed: int = 0, include_timing: bool = True) -> ValidationReport:
    rng = np.random.default_rng(seed)
    checks = [check_transforms(rng), check_channel_equivalence(rng)]
    checks += check_compensation(rng)
    checks += check_noise_statistics(rng)
    checks.append(check_decomposition(rng))
    checks.append(check_cascade_order(rng))
    if include_timing:
        checks += check_complexity(seed)
    return ValidationReport(tuple(checks), seed=seed)
