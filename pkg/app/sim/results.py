"""シミュレーション結果の型と CSV / JSON への書き出し。"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

from app.constants import (BER_CSV_HEADER, BOUND_CSV_HEADER, COMPARE_CSV_HEADER, IQI_SWEEP_CSV_HEADER,
                           RESULT_FORMATS, VALIDATION_CSV_HEADER)
from app.errors import InvalidArgumentError, ResultWriteError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    bit_errors: int
    bits: int
    frames: int
    truncated: bool = False

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else float("nan")

    @property
    def standard_error(self) -> float:
        """二項分布の標準誤差 √(p(1-p)/n)。"""
        if not self.bits:
            return float("nan")
        p = self.ber
        return math.sqrt(p * (1.0 - p) / self.bits)


@dataclass(frozen=True)
class BerCurve:
    points: tuple[BerPoint, ...]
    config_digest: str
    seed: int
    label: str = ""
    config: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def snr_db(self) -> list[float]:
        return [p.snr_db for p in self.points]

    @property
    def ber(self) -> list[float]:
        return [p.ber for p in self.points]

    def rows(self):
        return [(p.snr_db, p.ber, p.bit_errors, p.bits, p.frames) for p in self.points]

    def to_dict(self) -> dict:
        return {
            "kind": "ber_curve",
            "label": self.label,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "points": [{"snr_db": p.snr_db, "ber": p.ber, "bit_errors": p.bit_errors, "bits": p.bits,
                        "frames": p.frames, "truncated": p.truncated} for p in self.points],
        }


@dataclass(frozen=True)
class BoundCurve:
    snr_db: tuple[float, ...]
    abep_bound: tuple[float, ...]
    config_digest: str
    seed: int
    positions_mode: str = "averaged"
    terms_mode: str = "full"
    config: dict = field(default_factory=dict, repr=False, compare=False)

    def rows(self):
        return list(zip(self.snr_db, self.abep_bound))

    def to_dict(self) -> dict:
        return {
            "kind": "bound_curve",
            "config_digest": self.config_digest,
            "seed": self.seed,
            "positions_mode": self.positions_mode,
            "terms_mode": self.terms_mode,
            "points": [{"snr_db": s, "abep_bound": b} for s, b in self.rows()],
        }


@dataclass(frozen=True)
class IqiSweepResult:
    axis: tuple[tuple[float, float], ...]
    simulated_ber: tuple[float, ...]
    analytical_abep: tuple[float, ...]
    snr_db: float
    sweep_axis: str
    config_digest: str
    seed: int
    points: tuple[BerPoint, ...] = field(default=(), repr=False)
    config: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not len(self.axis) == len(self.simulated_ber) == len(self.analytical_abep):
            raise InvalidArgumentError("IQI sweep columns must have equal lengths")

    def rows(self):
        return [(a, p, b, bound) for (a, p), b, bound in zip(self.axis, self.simulated_ber, self.analytical_abep)]

    def to_dict(self) -> dict:
        return {
            "kind": "iqi_sweep",
            "sweep_axis": self.sweep_axis,
            "snr_db": self.snr_db,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "points": [{"aim_db": a, "pim_deg": p, "ber_sim": b, "abep_bound": bound,
                        "bit_errors": pt.bit_errors if pt else None, "bits": pt.bits if pt else None,
                        "truncated": pt.truncated if pt else None}
                       for (a, p, b, bound), pt in zip(self.rows(), self.points or (None,) * len(self.axis))],
        }


@dataclass(frozen=True)
class CompareRow:
    waveform: str
    snr_loss_db: float
    target_ber: float
    reached: bool


@dataclass(frozen=True)
class CompareResult:
    entries: tuple[CompareRow, ...]
    curves: dict = field(default_factory=dict, repr=False, compare=False)
    config_digest: str = ""
    seed: int = 0
    config: dict = field(default_factory=dict, repr=False, compare=False)

    def rows(self):
        return [(r.waveform, r.snr_loss_db, r.target_ber, r.reached) for r in self.entries]

    def to_dict(self) -> dict:
        return {
            "kind": "waveform_compare",
            "config_digest": self.config_digest,
            "seed": self.seed,
            "rows": [{"waveform": r.waveform, "snr_loss_db": r.snr_loss_db, "target_ber": r.target_ber,
                      "reached": r.reached} for r in self.entries],
            "curves": {name: {"ideal": ideal.to_dict(), "impaired": impaired.to_dict()}
                       for name, (ideal, impaired) in self.curves.items()},
        }


def _header_for(result) -> tuple[str, ...]:
    if isinstance(result, BerCurve):
        return BER_CSV_HEADER
    if isinstance(result, IqiSweepResult):
        return IQI_SWEEP_CSV_HEADER
    if isinstance(result, BoundCurve):
        return BOUND_CSV_HEADER
    if isinstance(result, CompareResult):
        return COMPARE_CSV_HEADER
    if isinstance(result, ValidationReport):
        return VALIDATION_CSV_HEADER
    raise InvalidArgumentError(f"Cannot emit results of type {type(result).__name__}")


def _cell(value) -> str:
    # float は repr で書き出す (往復で値が変わらない)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    text = str(value)
    if "," in text or '"' in text:
        return '"' + text.replace('"', '""') + '"'
    return text


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def render_results(result, fmt: str) -> str:
    """結果を文字列にする。出力は入力だけで決まる。"""
    if fmt not in RESULT_FORMATS:
        raise InvalidArgumentError(f"Unknown result format '{fmt}', expected one of {RESULT_FORMATS}")
    header = _header_for(result)
    if fmt == "json":
        data = result.to_dict()
        if result.config:
            data["config"] = result.config
        return json.dumps(_json_safe(data), indent=4, ensure_ascii=False, sort_keys=False) + "\n"
    lines = [",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in result.rows()]
    return "\n".join(lines) + "\n"


def truncated_points(result) -> list:
    """max_frames で打ち切られた点 (BER 曲線なら SNR、IQI スイープなら (AIm, PIm))。"""
    if isinstance(result, BerCurve):
        return [p.snr_db for p in result.points if p.truncated]
    if isinstance(result, IqiSweepResult):
        return [a for a, p in zip(result.axis, result.points) if p.truncated]
    return []


def emit_results(result, fmt: str, path=None) -> str:
    """結果を path に書き出す (path が None なら文字列を返すだけ)。"""
    text = render_results(result, fmt)
    truncated = truncated_points(result) if fmt == "csv" else []
    if truncated:
        # CSV の列は固定なので、打ち切りの印は JSON にだけ残る
        log.warning(f"{len(truncated)} point(s) stopped at max_frames before min_bit_errors: {truncated}; "
                    f"the CSV has no truncated column, use --format json to keep the flag")
    if path is None:
        return text
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise ResultWriteError(f"Could not write results to {path}: {e}", path=str(path)) from e
    log.info(f"Results written to {path} ({fmt})")
    return text


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]
    seed: int = 0
    config: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def rows(self):
        return [(c.name, c.passed, c.detail) for c in self.checks]

    def to_dict(self) -> dict:
        return {
            "kind": "validation",
            "seed": self.seed,
            "passed": self.passed,
            "checks": [{"check": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }
