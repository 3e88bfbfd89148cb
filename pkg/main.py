import argparse
import json
import logging
import math
import sys

from PySide6.QtCore import QCoreApplication
from texttable import Texttable

from app.config.settings import Settings
from app.constants import (APP_VERSION, EXIT_CONFIG_ERROR, EXIT_OK, EXIT_RUNTIME_ERROR, EXIT_VALIDATION_FAILED,
                           RESULT_FORMATS, SWEEP_AXES)
from app.errors import ConfigError, SimulationError, ValidationFailure
from app.sim.results import BerCurve, BoundCurve, CompareResult, IqiSweepResult, ValidationReport, emit_results
from app.sim.runner import SimulationRunner
from app.sim.validation import run_validation_suite

log = logging.getLogger("afdm_iqi_sim")


def parse_snr_range(text: str) -> tuple[float, ...]:
    """"start:step:stop" を stop を含む SNR 列にする。"""
    try:
        start, step, stop = (float(v) for v in text.split(":"))
    except ValueError as e:
        raise ConfigError(f"--snr expects start:step:stop, got '{text}'", value=text) from e
    if step <= 0 or stop < start:
        raise ConfigError(f"--snr needs step > 0 and stop >= start, got '{text}'", value=text)
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


class JsonArgumentParser(argparse.ArgumentParser):
    """使い方の誤りも他のエラーと同じ JSON で標準エラーに出す。"""

    def error(self, message):
        _report_error(ConfigError(message, usage=self.format_usage().strip()).to_dict())
        self.exit(EXIT_CONFIG_ERROR)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON 設定ファイル")
    common.add_argument("--seed", type=int, help="乱数シード (設定ファイルを上書き)")
    common.add_argument("--out", help="結果ファイル (省略時は標準出力)")
    common.add_argument("--format", choices=RESULT_FORMATS, default="csv")
    common.add_argument("--workers", type=int, help="並列スレッド数 (0 = 物理コア数)")
    common.add_argument("--snr", help="SNR グリッド start:step:stop [dB]")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = JsonArgumentParser(prog="main.py", description="AFDM joint Tx/Rx IQ imbalance simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    ber = sub.add_parser("ber", parents=[common], help="Monte Carlo BER sweep")
    ber.add_argument("--label", default="")
    sub.add_parser("abep", parents=[common], help="ABEP upper bound sweep")
    sweep = sub.add_parser("iqi-sweep", parents=[common], help="BER and bound versus one side's IQI")
    sweep.add_argument("--axis", choices=SWEEP_AXES)
    sweep.add_argument("--at-snr", type=float, dest="at_snr")
    sub.add_parser("compare", parents=[common], help="SNR loss of AFDM versus OFDM")
    validate = sub.add_parser("validate", parents=[common], help="run the invariant suite")
    validate.add_argument("--no-timing", action="store_true", help="skip the wall-clock complexity checks")
    return parser


def load_config(args):
    """設定ファイルを読み、CLI の指定で上書きした LinkConfig を返す。"""
    config = Settings(args.config).to_link_config()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.snr is not None:
        changes["snr_grid_db"] = parse_snr_range(args.snr)
    if not changes:
        return config
    try:
        return config.replace(**changes)
    except SimulationError as e:
        raise ConfigError(e.message, **e.context) from e


def summary_table(result) -> str:
    table = Texttable(max_width=0)
    if isinstance(result, BerCurve):
        table.header(["SNR [dB]", "BER", "errors", "bits", "frames"])
        table.add_rows([[p.snr_db, f"{p.ber:.3e}", p.bit_errors, p.bits,
                         f"{p.frames}{' (max)' if p.truncated else ''}"] for p in result.points], header=False)
    elif isinstance(result, BoundCurve):
        table.header(["SNR [dB]", "ABEP bound"])
        table.add_rows([[s, f"{b:.3e}"] for s, b in result.rows()], header=False)
    elif isinstance(result, IqiSweepResult):
        table.header(["AIm [dB]", "PIm [deg]", "BER", "ABEP bound"])
        table.add_rows([[a, p, f"{b:.3e}", f"{bound:.3e}"] for a, p, b, bound in result.rows()], header=False)
    elif isinstance(result, CompareResult):
        table.header(["waveform", "SNR loss [dB]", "target BER", "reached"])
        table.add_rows([[r.waveform, f"{r.snr_loss_db:.2f}", r.target_ber, r.reached] for r in result.entries],
                       header=False)
    elif isinstance(result, ValidationReport):
        table.header(["check", "result", "detail"])
        table.add_rows([[c.name, "PASS" if c.passed else "FAIL", c.detail] for c in result.checks], header=False)
    return table.draw()


def run_command(args):
    config = load_config(args)
    if args.command == "validate":
        return run_validation_suite(seed=config.seed, include_timing=not args.no_timing)

    runner = SimulationRunner(workers=args.workers)
    runner.point_finished.connect(lambda point: log.info(f"point finished: {point}"))
    runner.sweep_finished.connect(lambda result: log.info(f"{args.command} finished ({type(result).__name__})"))
    if args.command == "ber":
        return runner.run_ber_sweep(config, label=args.label)
    if args.command == "abep":
        return runner.run_abep_sweep(config)
    if args.command == "iqi-sweep":
        return runner.run_iqi_sweep(config, sweep_axis=args.axis, snr_db=args.at_snr)
    return runner.run_waveform_compare(config)


def _report_error(error: dict) -> None:
    print(json.dumps(error, ensure_ascii=False, default=str), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    # QThreadPool とシグナルのために Qt のイベント基盤を用意する
    app = QCoreApplication.instance() or QCoreApplication(sys.argv[:1])
    log.debug(f"{app.applicationName() or 'main.py'} {APP_VERSION}, command '{args.command}'")

    try:
        result = run_command(args)
        text = emit_results(result, args.format, args.out)
        if args.out is None:
            sys.stdout.write(text)
        else:
            print(summary_table(result))
        if isinstance(result, ValidationReport) and not result.passed:
            raise ValidationFailure(f"{len(result.failed)} invariant check(s) failed", failed=result.failed)
    except ConfigError as e:
        log.error(e.message)
        _report_error(e.to_dict())
        return EXIT_CONFIG_ERROR
    except ValidationFailure as e:
        log.error(e.message)
        _report_error(e.to_dict())
        return EXIT_VALIDATION_FAILED
    except SimulationError as e:
        log.error(e.message)
        _report_error(e.to_dict())
        return EXIT_RUNTIME_ERROR
    except Exception:
        log.error("Unexpected failure", exc_info=True)
        _report_error({"error": "internal"})
        return EXIT_RUNTIME_ERROR
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
