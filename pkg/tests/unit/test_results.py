import json
import math

import pytest

from app.errors import InvalidArgumentError, ResultWriteError
from app.sim.results import (BerCurve, BerPoint, BoundCurve, CheckResult, CompareResult, CompareRow,
                             IqiSweepResult, ValidationReport, emit_results, render_results, truncated_points)


@pytest.fixture
def ber_curve():
    points = (BerPoint(0.0, 100, 1000, 10), BerPoint(5.0, 120, 64000, 640, truncated=True))
    return BerCurve(points, "abc123", 7, label="mmse", config={"seed": 7})


class TestBerPoint:
    def test_ber_and_standard_error(self):
        p = BerPoint(10.0, 25, 100, 1)
        assert p.ber == 0.25
        assert p.standard_error == pytest.approx(math.sqrt(0.25 * 0.75 / 100))

    def test_empty_point(self):
        p = BerPoint(0.0, 0, 0, 0)
        assert math.isnan(p.ber)
        assert math.isnan(p.standard_error)


class TestCsv:
    def test_ber_curve(self, ber_curve):
        lines = render_results(ber_curve, "csv").splitlines()
        assert lines[0] == "snr_db,ber,bit_errors,bits,frames"
        assert lines[1] == "0.0,0.1,100,1000,10"
        assert lines[2] == "5.0,0.001875,120,64000,640"

    def test_bound_curve(self):
        curve = BoundCurve((0.0, 10.0), (0.2, 0.01), "d", 1)
        assert render_results(curve, "csv") == "snr_db,abep_bound\n0.0,0.2\n10.0,0.01\n"

    def test_iqi_sweep(self):
        result = IqiSweepResult(((0.0, 0.0), (1.0, 2.0)), (0.01, 0.02), (0.05, 0.06), 15.0, "tx", "d", 1)
        lines = render_results(result, "csv").splitlines()
        assert lines[0] == "aim_db,pim_deg,ber_sim,abep_bound"
        assert lines[2] == "1.0,2.0,0.02,0.06"

    def test_validation_report(self):
        report = ValidationReport((CheckResult("transform", True, "max deviation 1e-15"),
                                   CheckResult("noise-covariance", False, "z, too large")))
        lines = render_results(report, "csv").splitlines()
        assert lines[0] == "check,passed,detail"
        assert lines[1] == "transform,true,max deviation 1e-15"
        assert lines[2] == 'noise-covariance,false,"z, too large"'
        assert not report.passed
        assert report.failed == ["noise-covariance"]


class TestJson:
    def test_embeds_config(self, ber_curve):
        data = json.loads(render_results(ber_curve, "json"))
        assert data["kind"] == "ber_curve"
        assert data["config"] == {"seed": 7}
        assert data["points"][1]["truncated"] is True

    def test_nan_becomes_null(self):
        result = CompareResult((CompareRow("ofdm", float("nan"), 1e-3, False),), config_digest="d", seed=1)
        data = json.loads(render_results(result, "json"))
        assert data["rows"][0]["snr_loss_db"] is None
        assert data["rows"][0]["reached"] is False
        assert "config" not in data

    def test_deterministic(self, ber_curve):
        assert render_results(ber_curve, "json") == render_results(ber_curve, "json")


class TestEmit:
    def test_writes_file(self, ber_curve, tmp_path):
        path = tmp_path / "ber.csv"
        text = emit_results(ber_curve, "csv", path)
        assert path.read_text(encoding="utf-8") == text

    def test_returns_text_without_path(self, ber_curve):
        assert emit_results(ber_curve, "csv").startswith("snr_db,")

    def test_unwritable_path(self, ber_curve, tmp_path):
        with pytest.raises(ResultWriteError):
            emit_results(ber_curve, "csv", tmp_path / "missing" / "ber.csv")

    def test_unknown_format(self, ber_curve):
        with pytest.raises(InvalidArgumentError):
            render_results(ber_curve, "xml")

    def test_unknown_result_type(self):
        with pytest.raises(InvalidArgumentError):
            render_results({"ber": 0.1}, "csv")

    def test_iqi_sweep_lengths_must_match(self):
        with pytest.raises(InvalidArgumentError):
            IqiSweepResult(((0.0, 0.0),), (0.1, 0.2), (0.3,), 15.0, "tx", "d", 1)


class TestTruncatedPoints:
    def test_csv_emit_names_truncated_points(self, ber_curve, caplog):
        emit_results(ber_curve, "csv")
        assert "[5.0]" in caplog.text
        assert "--format json" in caplog.text

    def test_json_emit_keeps_flag_without_warning(self, ber_curve, caplog):
        text = emit_results(ber_curve, "json")
        assert "max_frames" not in caplog.text
        assert json.loads(text)["points"][1]["truncated"] is True

    def test_iqi_sweep_points(self):
        result = IqiSweepResult(((0.0, 0.0), (1.0, 3.0)), (0.1, 0.2), (0.3, 0.4), 15.0, "tx", "d", 1,
                                points=(BerPoint(15.0, 10, 100, 1), BerPoint(15.0, 5, 100, 1, truncated=True)))
        assert truncated_points(result) == [(1.0, 3.0)]
