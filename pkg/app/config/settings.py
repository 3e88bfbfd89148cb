import copy
import json
import logging

from PySide6.QtCore import QObject, Signal

from app.config.link_config import (AfdmSection, BoundSection, ChannelSection, CompensationSection,
                                    IqiSweepSection, LinkConfig)
from app.constants import (DEFAULT_BATCH_FRAMES, DEFAULT_MAX_FRAMES, DEFAULT_MIN_BIT_ERRORS, DEFAULT_N,
                           DEFAULT_NU_MAX, DEFAULT_PATHS, DEFAULT_SCENARIO_METADATA, DEFAULT_SEED,
                           DEFAULT_SNR_GRID_DB, DEFAULT_SWEEP_FIXED_OTHER, DEFAULT_SWEEP_POINTS, DEFAULT_TARGET_BER,
                           DEFAULT_TAU_MAX, DEFAULT_ZETA_NU, SCHEMA_VERSION)
from app.dsp.iqi import IqImbalance
from app.errors import ConfigError, ResultWriteError, SimulationError

log = logging.getLogger(__name__)

_SECTION_TYPES = {
    "afdm": AfdmSection,
    "channel": ChannelSection,
    "compensation": CompensationSection,
    "iqi_sweep": IqiSweepSection,
    "bound": BoundSection,
}


class Settings(QObject):
    """JSON 設定ファイルの読み書き。キーはドット区切り ("afdm.N") でも指定できる。"""
    setting_changed = Signal(str, object)

    def __init__(self, config_file=None):
        super().__init__()
        self.config_file = config_file
        self.settings = self.load_settings()

    @classmethod
    def from_dict(cls, data: dict) -> "Settings":
        s = cls()
        s.settings = s._normalize(copy.deepcopy(data))
        return s

    def get(self, key, default=None):
        node = self.settings
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, key, value):
        parts = key.split(".")
        node = self.settings
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        if node.get(parts[-1]) != value:
            node[parts[-1]] = value
            self.setting_changed.emit(key, value)
            if self.config_file:
                self.save()

    def save(self, path=None):
        path = path or self.config_file
        try:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(self.settings, f, indent=4, ensure_ascii=False)
        except (IOError, TypeError) as e:
            raise ResultWriteError(f"Could not write settings to {path}: {e}", path=str(path)) from e

    def load_settings(self):
        if self.config_file is None:
            return self._get_default_settings()
        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                settings = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {self.config_file}", path=str(self.config_file)) from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file is not valid JSON: {e}", path=str(self.config_file)) from e
        if not isinstance(settings, dict):
            raise ConfigError("Config file must hold a JSON object", path=str(self.config_file))
        return self._normalize(settings)

    def _normalize(self, settings):
        version = settings.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"Unsupported schema_version {version}, expected {SCHEMA_VERSION}",
                              schema_version=version)
        self._migrate(settings)
        merged = self._get_default_settings()
        for key, value in settings.items():
            if key not in merged:
                raise ConfigError(f"Unknown config key '{key}'", key=key)
            if isinstance(merged[key], dict) and key != "metadata":
                if not isinstance(value, dict):
                    raise ConfigError(f"Config section '{key}' must be an object", key=key)
                unknown = set(value) - set(merged[key])
                if unknown:
                    raise ConfigError(f"Unknown keys in '{key}': {sorted(unknown)}", key=key)
                merged[key].update(value)
            else:
                merged[key] = value
        return merged

    def _migrate(self, settings):
        # --- 古い設定キーからの移行 ---
        if "num_subcarriers" in settings:
            settings.setdefault("afdm", {}).setdefault("N", settings.pop("num_subcarriers"))
        if "snr_db" in settings:
            old = settings.pop("snr_db")
            settings.setdefault("snr_grid_db", old if isinstance(old, list) else [old])
        if "modulation" in settings:
            settings.setdefault("constellation", settings.pop("modulation"))
        if "iqi" in settings:
            # 送受信で同じ値を使っていた旧形式
            old = settings.pop("iqi")
            settings.setdefault("tx_iqi", dict(old))
            settings.setdefault("rx_iqi", dict(old))
        if "doppler_mode" in settings:
            settings.setdefault("channel", {}).setdefault("doppler_mode", settings.pop("doppler_mode"))
        if "printed_tx_formula" in settings.get("compensation", {}):
            settings["compensation"]["unconjugated_tx"] = settings["compensation"].pop("printed_tx_formula")

    def _get_default_settings(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "afdm": {
                "N": DEFAULT_N,
                "nu_max": DEFAULT_NU_MAX,
                "tau_max": DEFAULT_TAU_MAX,
                "zeta_nu": DEFAULT_ZETA_NU,
                "c2": None,
                "L_cpp": None
            },
            "constellation": "QPSK",
            "channel": {
                "paths": DEFAULT_PATHS,
                "doppler_mode": "integer",
                "delay_mode": "auto",
                "awgn_only": False,
                "fixed_geometry": False,
                "frames_per_channel": 1,
                "covariance": None
            },
            "tx_iqi": {"amp_db": 0.0, "phase_deg": 0.0, "convention": "power"},
            "rx_iqi": {"amp_db": 0.0, "phase_deg": 0.0, "convention": "power"},
            "iqi_on_cpp": True,
            "detector": "mmse",
            "compensation": {
                "rx_enabled": False,
                "tx_enabled": False,
                "inner_detector": "mmse",
                "unconjugated_tx": False
            },
            "snr_grid_db": list(DEFAULT_SNR_GRID_DB),
            "snr_convention": "es_n0",
            "min_bit_errors": DEFAULT_MIN_BIT_ERRORS,
            "max_frames": DEFAULT_MAX_FRAMES,
            "batch_frames": DEFAULT_BATCH_FRAMES,
            "seed": DEFAULT_SEED,
            "waveform_mode": "afdm",
            "workers": 0,
            "target_ber": DEFAULT_TARGET_BER,
            "iqi_sweep": {
                "axis": "tx",
                "snr_db": 15.0,
                "points": [list(p) for p in DEFAULT_SWEEP_POINTS],
                "fixed_other": list(DEFAULT_SWEEP_FIXED_OTHER)
            },
            "bound": {
                "positions": "averaged",
                "terms": "full"
            },
            "metadata": dict(DEFAULT_SCENARIO_METADATA)
        }

    def to_link_config(self) -> LinkConfig:
        """検証済みの LinkConfig を作る。不正な値は ConfigError。"""
        s = self.settings
        try:
            sections = {name: cls(**s[name]) for name, cls in _SECTION_TYPES.items()}
            return LinkConfig(
                afdm=sections["afdm"],
                constellation=str(s["constellation"]).upper(),
                channel=sections["channel"],
                tx_iqi=IqImbalance(**s["tx_iqi"]),
                rx_iqi=IqImbalance(**s["rx_iqi"]),
                iqi_on_cpp=self._bool(s, "iqi_on_cpp"),
                detector=s["detector"],
                compensation=sections["compensation"],
                snr_grid_db=tuple(s["snr_grid_db"]),
                snr_convention=s["snr_convention"],
                min_bit_errors=self._int(s, "min_bit_errors"),
                max_frames=self._int(s, "max_frames"),
                batch_frames=self._int(s, "batch_frames"),
                seed=self._int(s, "seed"),
                waveform_mode=s["waveform_mode"],
                workers=self._int(s, "workers"),
                target_ber=float(s["target_ber"]),
                iqi_sweep=sections["iqi_sweep"],
                bound=sections["bound"],
                metadata=dict(s["metadata"]),
            )
        except SimulationError as e:
            raise ConfigError(e.message, **e.context) from e
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    @staticmethod
    def _int(s, key):
        value = s[key]
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{key}' must be an integer, got {value!r}", key=key)
        return value

    @staticmethod
    def _bool(s, key):
        value = s[key]
        if not isinstance(value, bool):
            raise ConfigError(f"'{key}' must be true or false, got {value!r}", key=key)
        return value
