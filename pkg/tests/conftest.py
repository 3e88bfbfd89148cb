import sys
import os
import json
import pytest

os.environ.setdefault("QT_QPA_PLATFORM", "offscreen")

from PySide6.QtWidgets import QApplication

# Add project root to path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import numpy as np

from app.config.link_config import AfdmSection, ChannelSection, LinkConfig
from app.dsp.afdm import AfdmParams
from app.dsp.constellation import get_constellation


@pytest.fixture(scope="session")
def qapp():
    """
    Session-scoped fixture to create the QApplication instance.
    pytest-qt requires a QApplication to be running.
    """
    app = QApplication.instance()
    if app is None:
        app = QApplication(sys.argv)
    yield app


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def params():
    """CPP の位相が 1 になる小さなフレーム (N=16, c1=5/32)。"""
    return AfdmParams.from_grid(16, 1, 1, 1)


@pytest.fixture
def table1_params():
    return AfdmParams.from_grid(64, 2, 2, 1)


@pytest.fixture
def qpsk():
    return get_constellation("QPSK")


@pytest.fixture
def settings_file(tmp_path):
    """
    Fixture to write a small settings file into a temporary directory.
    """
    path = tmp_path / "test_config.json"
    data = {
        "schema_version": 1,
        "afdm": {"N": 16, "nu_max": 1, "tau_max": 1, "zeta_nu": 1},
        "channel": {"paths": 2},
        "tx_iqi": {"amp_db": 1.0, "phase_deg": 3.0},
        "rx_iqi": {"amp_db": 1.0, "phase_deg": 3.0},
        "snr_grid_db": [0, 10],
        "min_bit_errors": 100,
        "max_frames": 32,
        "batch_frames": 8,
        "seed": 7,
    }
    path.write_text(json.dumps(data, indent=4), encoding="utf-8")
    return path


@pytest.fixture
def link_config():
    """数秒で終わる BER スイープ用の設定。"""
    return LinkConfig(
        afdm=AfdmSection(N=16, nu_max=1, tau_max=1, zeta_nu=1),
        channel=ChannelSection(paths=2),
        snr_grid_db=(0.0, 10.0),
        min_bit_errors=100,
        max_frames=24,
        batch_frames=8,
        seed=11,
        workers=2,
    )
