"""End-to-end runs of ``verify`` on the shipped scenarios."""

import json
from pathlib import Path

import pytest

import main
from tests.factories import PERIODIC_PAIR_SERVICE_BETA
from utils.config import EXIT_OK, EXIT_VIOLATION

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

pytestmark = pytest.mark.slow


def verify(tmp_path: Path, scenario: str, *extra: str):
    out = tmp_path / "out"
    code = main.main(
        ["verify", "--scenario", str(SCENARIOS / scenario), "--out", str(out), "--log-dir", str(tmp_path / "logs"), *extra]
    )
    summary_path = out / "verify_summary.json"
    summary = json.loads(summary_path.read_text()) if summary_path.exists() else None
    return code, summary


def test_pair_service_bound_holds(tmp_path):
    code, summary = verify(tmp_path, "pair_service.json")
    assert code == EXIT_OK
    assert summary["holds"] is True
    assert summary["pair"] == [0, 50]
    assert summary["fitted_rate"] >= 0.48
    assert summary["doubling_flagged"] is False
    assert summary["doubling_gap"] <= 1e-8


def test_inflated_beta_is_caught(tmp_path):
    code, summary = verify(tmp_path, "pair_service.json", "--override-beta", "5")
    assert code == EXIT_VIOLATION
    assert summary["holds"] is False
    certificate = json.loads((tmp_path / "out" / "certificate.json").read_text())
    assert certificate["beta_overridden"] is True


def test_birth_death_rate_is_sharp(tmp_path):
    code, summary = verify(tmp_path, "class1.json")
    assert code == EXIT_OK
    certificate = json.loads((tmp_path / "out" / "certificate.json").read_text())
    assert certificate["beta"] == pytest.approx(1.0, abs=1e-12)
    assert summary["fitted_rate"] >= 0.98
    assert summary["doubling_gap"] <= 1e-8


def test_periodic_birth_rate(tmp_path):
    code, summary = verify(tmp_path, "pair_service_periodic.json")
    assert code == EXIT_OK
    assert summary["holds"] is True
    certificate = json.loads((tmp_path / "out" / "certificate.json").read_text())
    assert certificate["envelope_mode"] == "periodic"
    assert certificate["M"] > 1.0
    assert certificate["beta"] == pytest.approx(PERIODIC_PAIR_SERVICE_BETA, abs=1e-4)
    assert summary["doubling_gap"] <= 1e-8


def test_strict_truncation_rejects_small_N(tmp_path):
    code, summary = verify(tmp_path, "pair_service_short_truncation.json", "--strict-truncation")
    assert code == EXIT_VIOLATION
    assert summary["doubling_flagged"] is True
