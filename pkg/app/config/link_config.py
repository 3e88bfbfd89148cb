"""実験 1 回分を表す不変の LinkConfig と、その内容ハッシュ。"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from app.constants import (BOUND_POSITIONS_AVERAGED, BOUND_TERMS_MODES, CONSTELLATIONS, DEFAULT_BATCH_FRAMES,
                           DEFAULT_MAX_FRAMES, DEFAULT_MIN_BIT_ERRORS, DEFAULT_N, DEFAULT_NU_MAX, DEFAULT_PATHS,
                           DEFAULT_SEED, DEFAULT_SNR_GRID_DB, DEFAULT_SWEEP_FIXED_OTHER, DEFAULT_SWEEP_POINTS,
                           DEFAULT_TARGET_BER, DEFAULT_TAU_MAX, DEFAULT_ZETA_NU, DELAY_MODES, DETECTORS, DOPPLER_MODES,
                           SCHEMA_VERSION, SNR_CONVENTIONS, SWEEP_AXES, WAVEFORM_MODES)
from app.detection.compensation import CompensationConfig
from app.dsp.afdm import AfdmParams
from app.dsp.iqi import IqImbalance
from app.errors import InvalidArgumentError

log = logging.getLogger(__name__)

# ダイジェストに含めない実行時だけの設定
_DIGEST_EXCLUDED = ("workers",)


@dataclass(frozen=True)
class AfdmSection:
    N: int = DEFAULT_N
    nu_max: int = DEFAULT_NU_MAX
    tau_max: int = DEFAULT_TAU_MAX
    zeta_nu: int = DEFAULT_ZETA_NU
    c2: float | None = None
    L_cpp: int | None = None


@dataclass(frozen=True)
class ChannelSection:
    paths: int = DEFAULT_PATHS
    doppler_mode: str = "integer"
    delay_mode: str = "auto"
    awgn_only: bool = False
    fixed_geometry: bool = False
    frames_per_channel: int = 1
    covariance: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.doppler_mode not in DOPPLER_MODES:
            raise InvalidArgumentError(f"Unknown doppler mode '{self.doppler_mode}'")
        if self.delay_mode not in DELAY_MODES:
            raise InvalidArgumentError(f"Unknown delay mode '{self.delay_mode}'")
        if self.paths < 1:
            raise InvalidArgumentError(f"channel.paths must be >= 1, got {self.paths}")
        if self.frames_per_channel < 1:
            raise InvalidArgumentError(f"channel.frames_per_channel must be >= 1, got {self.frames_per_channel}")
        if self.covariance is not None:
            object.__setattr__(self, "covariance", tuple(tuple(float(v) for v in row) for row in self.covariance))

    def covariance_matrix(self) -> np.ndarray | None:
        return None if self.covariance is None else np.array(self.covariance, dtype=np.float64)


@dataclass(frozen=True)
class CompensationSection:
    rx_enabled: bool = False
    tx_enabled: bool = False
    inner_detector: str = "mmse"
    unconjugated_tx: bool = False


@dataclass(frozen=True)
class IqiSweepSection:
    axis: str = "tx"
    snr_db: float = 15.0
    points: tuple[tuple[float, float], ...] = tuple(DEFAULT_SWEEP_POINTS)
    fixed_other: tuple[float, float] = DEFAULT_SWEEP_FIXED_OTHER

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise InvalidArgumentError(f"iqi_sweep.axis must be one of {SWEEP_AXES}, got '{self.axis}'")
        if not self.points:
            raise InvalidArgumentError("iqi_sweep.points must not be empty")
        object.__setattr__(self, "points", tuple((float(a), float(p)) for a, p in self.points))
        object.__setattr__(self, "fixed_other", (float(self.fixed_other[0]), float(self.fixed_other[1])))


@dataclass(frozen=True)
class BoundSection:
    positions: str | int = BOUND_POSITIONS_AVERAGED
    terms: str = "full"

    def __post_init__(self):
        if self.terms not in BOUND_TERMS_MODES:
            raise InvalidArgumentError(f"bound.terms must be one of {BOUND_TERMS_MODES}, got '{self.terms}'")
        if self.positions == BOUND_POSITIONS_AVERAGED:
            return
        if isinstance(self.positions, bool) or not isinstance(self.positions, int) or self.positions < 0:
            raise InvalidArgumentError(f"bound.positions must be '{BOUND_POSITIONS_AVERAGED}' or a position index "
                                       f">= 0, got {self.positions!r}")


@dataclass(frozen=True)
class LinkConfig:
    """送信から検出までの 1 実験の完全な記述。"""
    afdm: AfdmSection = AfdmSection()
    constellation: str = "QPSK"
    channel: ChannelSection = ChannelSection()
    tx_iqi: IqImbalance = IqImbalance()
    rx_iqi: IqImbalance = IqImbalance()
    iqi_on_cpp: bool = True
    detector: str = "mmse"
    compensation: CompensationSection = CompensationSection()
    snr_grid_db: tuple[float, ...] = tuple(DEFAULT_SNR_GRID_DB)
    snr_convention: str = "es_n0"
    min_bit_errors: int = DEFAULT_MIN_BIT_ERRORS
    max_frames: int = DEFAULT_MAX_FRAMES
    batch_frames: int = DEFAULT_BATCH_FRAMES
    seed: int = DEFAULT_SEED
    waveform_mode: str = "afdm"
    workers: int = 0
    target_ber: float = DEFAULT_TARGET_BER
    iqi_sweep: IqiSweepSection = IqiSweepSection()
    bound: BoundSection = BoundSection()
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if not self.snr_grid_db:
            raise InvalidArgumentError("snr_grid_db must not be empty")
        if self.constellation not in CONSTELLATIONS:
            raise InvalidArgumentError(f"Unknown constellation '{self.constellation}'")
        if self.detector not in DETECTORS:
            raise InvalidArgumentError(f"Unknown detector '{self.detector}'")
        if self.snr_convention not in SNR_CONVENTIONS:
            raise InvalidArgumentError(f"Unknown SNR convention '{self.snr_convention}'")
        if self.waveform_mode not in WAVEFORM_MODES:
            raise InvalidArgumentError(f"Unknown waveform mode '{self.waveform_mode}'")
        if self.min_bit_errors < 1 or self.max_frames < 1 or self.batch_frames < 1:
            raise InvalidArgumentError("min_bit_errors, max_frames and batch_frames must be >= 1")
        if self.workers < 0:
            raise InvalidArgumentError(f"workers must be >= 0, got {self.workers}")
        if not 0.0 < self.target_ber < 0.5:
            raise InvalidArgumentError(f"target_ber must lie in (0, 0.5), got {self.target_ber}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidArgumentError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.min_bit_errors < 100:
            log.warning(f"min_bit_errors={self.min_bit_errors} is below 100; points are not publishable")
        # 検証のためにここで一度組み立てる
        params = self.params()
        if isinstance(self.bound.positions, int) and self.bound.positions >= params.N:
            raise InvalidArgumentError(f"bound.positions {self.bound.positions} outside [0, {params.N})")
        self.compensation_config()

    def params(self) -> AfdmParams:
        """AfdmParams を作る。ofdm モードでは c1 = c2 = 0。"""
        a = self.afdm
        return AfdmParams.from_grid(a.N, a.nu_max, a.tau_max, a.zeta_nu, c2=a.c2, L_cpp=a.L_cpp,
                                    waveform=self.waveform_mode)

    def compensation_config(self) -> CompensationConfig:
        c = self.compensation
        return CompensationConfig(rx_enabled=c.rx_enabled, tx_enabled=c.tx_enabled,
                                  tx_iqi_known=self.tx_iqi, rx_iqi_known=self.rx_iqi,
                                  inner_detector=c.inner_detector, unconjugated_tx=c.unconjugated_tx)

    def replace(self, **changes) -> LinkConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        """設定ファイルと同じ入れ子構造の辞書 (Settings で読み戻せる)。"""
        return {
            "schema_version": SCHEMA_VERSION,
            "afdm": dataclasses.asdict(self.afdm),
            "constellation": self.constellation,
            "channel": {**dataclasses.asdict(self.channel),
                        "covariance": None if self.channel.covariance is None
                        else [list(row) for row in self.channel.covariance]},
            "tx_iqi": self.tx_iqi.to_dict(),
            "rx_iqi": self.rx_iqi.to_dict(),
            "iqi_on_cpp": self.iqi_on_cpp,
            "detector": self.detector,
            "compensation": dataclasses.asdict(self.compensation),
            "snr_grid_db": list(self.snr_grid_db),
            "snr_convention": self.snr_convention,
            "min_bit_errors": self.min_bit_errors,
            "max_frames": self.max_frames,
            "batch_frames": self.batch_frames,
            "seed": self.seed,
            "waveform_mode": self.waveform_mode,
            "workers": self.workers,
            "target_ber": self.target_ber,
            "iqi_sweep": {"axis": self.iqi_sweep.axis, "snr_db": self.iqi_sweep.snr_db,
                          "points": [list(p) for p in self.iqi_sweep.points],
                          "fixed_other": list(self.iqi_sweep.fixed_other)},
            "bound": dataclasses.asdict(self.bound),
            "metadata": dict(self.metadata),
        }

    def digest(self) -> str:
        """意味のあるフィールドだけから作る sha256。並列度とメタデータは含めない。"""
        data = self.to_dict()
        for key in _DIGEST_EXCLUDED + ("metadata",):
            data.pop(key, None)
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
