import csv
import json
from pathlib import Path

import pytest

import main
from utils.config import EXIT_CONFIG, EXIT_OK, EXIT_UNCERTIFIED, EXIT_VIOLATION

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def run(tmp_path: Path, command: str, scenario, *extra: str, out: str = "out") -> int:
    return main.main(
        [command, "--scenario", str(scenario), "--out", str(tmp_path / out), "--log-dir", str(tmp_path / "logs"), *extra]
    )


def write_scenario(tmp_path: Path, payload: dict) -> Path:
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def pair_service_payload() -> dict:
    return json.loads((SCENARIOS / "pair_service.json").read_text(encoding="utf-8"))


def test_bound_on_pair_service(tmp_path):
    assert run(tmp_path, "bound", SCENARIOS / "pair_service.json") == EXIT_OK
    certificate = json.loads((tmp_path / "out" / "certificate.json").read_text())
    assert certificate["certified"] is True
    assert certificate["beta"] == pytest.approx(0.5, abs=1e-12)
    assert certificate["d"] == 0.5
    assert certificate["prefactor"] == pytest.approx(4.0)
    meta = json.loads((tmp_path / "out" / "bound.meta.json").read_text())
    assert meta["exit_code"] == EXIT_OK
    assert "certificate.json" in meta["files"]


def test_bound_equal_rates_is_uncertified(tmp_path, capsys):
    assert run(tmp_path, "bound", SCENARIOS / "equal_rates.json") == EXIT_UNCERTIFIED
    certificate = json.loads((tmp_path / "out" / "certificate.json").read_text())
    assert certificate["certified"] is False
    console = capsys.readouterr().out
    assert console.count("NOT certified") == 1
    assert "[WARNING] NOT certified" in console


def test_malformed_rate_reports_field_path(tmp_path, capsys):
    payload = pair_service_payload()
    payload["model"]["rates"]["birth"] = {"kind": "sin", "amp": 0.5, "freq": 1.0}
    assert run(tmp_path, "bound", write_scenario(tmp_path, payload)) == EXIT_CONFIG
    assert "model.rates.birth.base" in capsys.readouterr().out


def test_unknown_key_rejected(tmp_path, capsys):
    payload = pair_service_payload()
    payload["analysis"]["grid"] = 10
    assert run(tmp_path, "bound", write_scenario(tmp_path, payload)) == EXIT_CONFIG
    assert "analysis.grid" in capsys.readouterr().out


def test_missing_scenario_file(tmp_path):
    assert run(tmp_path, "bound", tmp_path / "absent.json") == EXIT_CONFIG


def test_usage_errors_exit_with_config_code(tmp_path):
    assert main.main(["bound"]) == EXIT_CONFIG
    assert main.main(["frobnicate", "--scenario", "x.json"]) == EXIT_CONFIG


def test_sweep(tmp_path):
    assert run(tmp_path, "sweep", SCENARIOS / "pair_service_sweep.json") == EXIT_OK
    with open(tmp_path / "out" / "sweep.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert [float(r["delta"]) for r in rows] == [1.5, 2.0, 2.5]
    assert [r["best"] for r in rows] == ["0", "0", "1"]
    assert float(rows[1]["beta"]) == pytest.approx(0.5, abs=1e-12)


def test_sweep_needs_delta_grid(tmp_path, capsys):
    payload = pair_service_payload()
    payload["family"] = {"rule": "pair-service", "deltas": []}
    assert run(tmp_path, "sweep", write_scenario(tmp_path, payload)) == EXIT_CONFIG
    assert "family.deltas" in capsys.readouterr().out


def test_oracle_check(tmp_path):
    assert run(tmp_path, "oracle-check", SCENARIOS / "pair_service.json") == EXIT_OK
    report = json.loads((tmp_path / "out" / "oracle_report.json").read_text())
    assert report["passed"] is True
    assert report["display_rows_match"] is True
    assert report["max_discrepancy"] <= 1e-10


def test_oracle_check_batch_classes(tmp_path):
    assert run(tmp_path, "oracle-check", SCENARIOS / "batch_iv.json") == EXIT_OK
    report = json.loads((tmp_path / "out" / "oracle_report.json").read_text())
    assert report["method"] == "dense-product"


def test_injected_bug_fails_oracle_check(tmp_path):
    assert run(tmp_path, "oracle-check", SCENARIOS / "pair_service.json", "--inject-bug") == EXIT_VIOLATION
    report = json.loads((tmp_path / "out" / "oracle_report.json").read_text())
    assert report["passed"] is False
    assert (report["worst_i"], report["worst_j"]) == (1, 1)


def test_dump_matrix(tmp_path):
    assert run(tmp_path, "bound", SCENARIOS / "pair_service.json", "--dump-matrix") == EXIT_OK
    with open(tmp_path / "out" / "matrix_Bstar_t0.csv", newline="") as f:
        entries = {(int(r["row"]), int(r["col"])): float(r["value"]) for r in csv.DictReader(f)}
    assert entries[(1, 1)] == -1.0
    assert entries[(1, 2)] == -4.0
    assert entries[(2, 4)] == 4.0
    assert (tmp_path / "out" / "matrix_A_t0.csv").exists()


def test_simulate(tmp_path):
    assert run(tmp_path, "simulate", SCENARIOS / "pair_service_short_truncation.json") == EXIT_OK
    with open(tmp_path / "out" / "trajectory.csv", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = list(reader)
    assert header[:2] == ["t", "p0"] and len(header) == 12
    assert len(rows) == 129
    assert sum(float(v) for v in rows[-1][1:]) == pytest.approx(1.0, abs=1e-9)


def test_outputs_are_deterministic(tmp_path):
    for out in ("first", "second"):
        assert run(tmp_path, "bound", SCENARIOS / "pair_service_periodic.json", out=out) == EXIT_OK
    for name in ("certificate.json", "alpha_star.csv"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()
