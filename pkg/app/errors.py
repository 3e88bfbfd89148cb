from __future__ import annotations


class SimulationError(Exception):
    """シミュレーション全体で使う例外の基底クラス。

    `code` は CLI がエラー JSON に書き出す安定した識別子。
    """
    code = "simulation-error"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> dict:
        return {"error": self.code, "message": self.message, "context": self.context}


class InvalidArgumentError(SimulationError, ValueError):
    """引数が事前条件を満たさない。"""
    code = "invalid-argument"


class ConfigError(SimulationError):
    """設定ファイルまたは CLI 上書きが不正。"""
    code = "config-invalid"


class DetectionError(SimulationError):
    """検出器の線形方程式が解けない。"""
    code = "detection-failed"


class SearchSpaceError(SimulationError):
    """ML 全探索の探索空間が上限を超えた。"""
    code = "search-space"


class CompensationError(SimulationError):
    """IQI 補償の分母 |μ|² - |υ|² が退化している。"""
    code = "compensation-degenerate"


class ResultWriteError(SimulationError):
    """結果ファイルを書き込めない。"""
    code = "io-error"


class ValidationFailure(SimulationError):
    """不変条件スイートの一部が失敗した。"""
    code = "validation-failed"
