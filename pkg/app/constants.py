# --- 定数定義 ---

# アプリケーションバージョン
APP_VERSION = "0.3.0"

# 設定ファイルのスキーマバージョン
SCHEMA_VERSION = 1

# 変調方式 (設定値 -> 表示名)
CONSTELLATIONS = {
    "BPSK": "BPSK (Gray)",
    "QPSK": "QPSK (Gray, (±1±j)/√2)",
    "16QAM": "16-QAM (Gray)",
}

# 検出器 (設定値 -> 表示名)
DETECTORS = {
    "mmse": "Linear MMSE",
    "zf": "Zero forcing",
    "ml": "Exhaustive ML (Ψ model)",
    "wl_mmse": "Widely linear MMSE (augmented)",
}

# カスケード補償の内側で使える検出器
INNER_DETECTORS = ("mmse", "zf")

# ドップラー生成モード
DOPPLER_MODES = ("integer", "fractional", "jakes")

# 遅延の引き方 (auto は P <= tau_max + 1 なら distinct)
DELAY_MODES = ("auto", "distinct", "shared")

# 波形モード (ofdm は c1 = c2 = 0 の AFDM)
WAVEFORM_MODES = ("afdm", "ofdm")

# SNR の定義
SNR_CONVENTIONS = ("es_n0", "eb_n0")

# IQI 振幅 [dB] の読み方 (power: α = 10^{dB/10} - 1, amplitude: α = 10^{dB/20} - 1)
AMP_CONVENTIONS = ("power", "amplitude")

# ABEP の位置の扱いと足し合わせる対
BOUND_POSITIONS_AVERAGED = "averaged"
BOUND_TERMS_MODES = ("full", "dominant")

# 出力形式
RESULT_FORMATS = ("csv", "json")

# IQI スイープの軸
SWEEP_AXES = ("tx", "rx")

# ML 全探索の上限 (N * N_b)
ML_MAX_SEARCH_BITS = 20

# ML 候補の一括評価サイズ
ML_CHUNK_CANDIDATES = 1 << 14

# 固有値を非ゼロとみなす相対しきい値
EIGENVALUE_CUTOFF = 1e-10

# --- 既定値 ---
DEFAULT_N = 64
DEFAULT_NU_MAX = 2
DEFAULT_TAU_MAX = 2
DEFAULT_ZETA_NU = 1
DEFAULT_PATHS = 4
DEFAULT_SNR_GRID_DB = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
DEFAULT_MIN_BIT_ERRORS = 500
DEFAULT_MAX_FRAMES = 20000
DEFAULT_BATCH_FRAMES = 32
DEFAULT_SEED = 2025
DEFAULT_TARGET_BER = 1e-3

# 既定シナリオの物理パラメータ (記録用。シミュレーションは正規化インデックスで行う)
DEFAULT_SCENARIO_METADATA = {
    "bandwidth_hz": 10e6,
    "carrier_frequency_hz": 8e9,
    "subcarrier_spacing_hz": 15e3,
    "speed_kmh": 540.0,
}

# IQI スイープ点 (AIm dB, PIm 度)
DEFAULT_SWEEP_POINTS = [
    (0.0, 0.0),
    (0.5, 1.0),
    (1.0, 2.0),
    (1.5, 3.5),
    (2.0, 4.0),
    (2.5, 5.0),
]

# IQI スイープで固定する側の IQI
DEFAULT_SWEEP_FIXED_OTHER = (1.0, 3.0)

# --- CSV ヘッダ ---
BER_CSV_HEADER = ("snr_db", "ber", "bit_errors", "bits", "frames")
IQI_SWEEP_CSV_HEADER = ("aim_db", "pim_deg", "ber_sim", "abep_bound")
BOUND_CSV_HEADER = ("snr_db", "abep_bound")
COMPARE_CSV_HEADER = ("waveform", "snr_loss_db", "target_ber", "reached")
VALIDATION_CSV_HEADER = ("check", "passed", "detail")

# --- 終了コード ---
EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_CONFIG_ERROR = 2
EXIT_VALIDATION_FAILED = 3
