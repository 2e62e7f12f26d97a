import json
import math

from app.experiments import ExperimentOutcome
from app.models import CriterionResult, ExperimentConfig, ExperimentReport, ScanRecord, ScanResult
from app.report_store import ReportStore
from app.settings import load_settings
from app.suite_runner import suite_report


def _outcome():
    config = ExperimentConfig.model_validate({"name": "scan_demo", "experiment": "modulus-scan"})
    criteria = [CriterionResult(name="scan_omega1_bounded", passed=True, value=1.2, threshold=2.0)]
    table = [{"h": 0.125, "estimate": math.nan, "kept": True}, {"h": 0.0625, "ratio_omega1": 0.3, "kept": False}]
    report = ExperimentReport.build(config, criteria, {"scan": table, "extra": [{"a": 1}]})
    return ExperimentOutcome(report=report, plotdata={"scan": table})


def test_out_dir_comes_from_settings(tmp_path, monkeypatch):
    monkeypatch.setenv("MIRANDA_LAYERS_OUT_DIR", str(tmp_path / "from_env"))
    store = ReportStore(load_settings().out_dir)
    assert store.out_dir == tmp_path / "from_env"
    assert store.out_dir.is_dir()


def test_write_outcomes_layout(tmp_path):
    outcome = _outcome()
    store = ReportStore(tmp_path)
    written = store.write_outcomes([outcome], suite_report([outcome], seed=5))

    assert tmp_path / "report.json" in written
    assert (tmp_path / "scan_demo.csv").is_file()
    assert (tmp_path / "scan_demo_extra.csv").is_file()
    assert not (tmp_path / "scan_demo_scan.csv").exists()

    lines = (tmp_path / "plotdata" / "scan_demo_scan.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "h,estimate,kept,ratio_omega1"
    assert lines[2] == "0.0625,,False,0.3"


def test_report_json_is_strict(tmp_path):
    outcome = _outcome()
    store = ReportStore(tmp_path)
    store.write_report(suite_report([outcome], seed=5))
    text = store.report_path.read_text(encoding="utf-8")
    assert "NaN" not in text
    data = json.loads(text)
    assert data["seed"] == 5
    assert data["experiments"][0]["tables"]["scan"][0]["estimate"] is None


def test_scan_verdicts_reach_report_json(tmp_path):
    config = ExperimentConfig.model_validate({"name": "scan_demo", "experiment": "modulus-scan"})
    record = ScanRecord(
        h=0.125, pairs=16, ratios={"omega1": 0.4}, argmax=[[0.1, 0.2], [0.3, 0.4]], estimate=1e-12, kept=True
    )
    scan = ScanResult(records=[record], bounded={"omega1": True, "lipschitz": False}, config_hash=config.config_hash())
    report = ExperimentReport.build(config, [], {"scan": []}, scan=scan)
    store = ReportStore(tmp_path)
    store.write_report(suite_report([ExperimentOutcome(report=report, scan=scan)]))

    data = json.loads(store.report_path.read_text(encoding="utf-8"))
    written = data["experiments"][0]["scan"]
    assert written["bounded"] == {"lipschitz": False, "omega1": True}
    assert written["records"][0]["pairs"] == 16
    assert written["config_hash"] == config.config_hash()
