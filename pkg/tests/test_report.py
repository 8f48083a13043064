import csv
import json

import pytest

from config import VERSION, parse_config
from conftest import small_config
from models.schemas import AttackVariant, CellResult, RunManifest
from services.experiment_service import run_cell, seeds_for
from services.report_service import EmptyResultsError, ReportError, ReportService, fmt, get_report_service


def _manifest(cfg, cells, out_dir):
    return RunManifest(
        tool_version=VERSION, config=cfg, seeds=seeds_for(cfg), output_dir=str(out_dir),
        cells=[c.scenario for c in cells],
        fingerprints={c.scenario: [o.report.fingerprint for o in c.outcomes] for c in cells},
    )


def _rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


@pytest.fixture(scope="module")
def cells():
    cfg = small_config(replications=2, attack_variant="SPOOFED", n_attackers=1)
    return cfg, [run_cell("baseline", small_config(replications=2)), run_cell("spoofed_1s", cfg)]


def test_fmt():
    assert fmt(None) == ""
    assert fmt(0.5) == "0.5"
    assert fmt(1 / 3) == "0.333333"
    assert fmt(123456789.0) == "1.23457e+08"
    assert fmt(True) == "1"
    assert fmt(AttackVariant.SPOOFED) == "SPOOFED"
    assert fmt(7) == "7"


def test_emit_outputs(cells, tmp_path):
    cfg, results = cells
    out = tmp_path / "out"
    written = ReportService(str(out)).emit_outputs(results, _manifest(cfg, results, out))
    assert sorted(p.name for p in written) == sorted([
        "summary.csv", "summary_ci.csv", "node_power.csv", "detector_flags.csv",
        "runs.csv", "manifest.json", "scenario.conf",
    ])

    summary = _rows(out / "summary.csv")
    assert [(r["scenario"], r["seed"]) for r in summary] == [
        ("baseline", "7"), ("baseline", "8"), ("spoofed_1s", "7"), ("spoofed_1s", "8")
    ]
    assert summary[0]["interval_s"] == ""
    assert summary[2]["variant"] == "SPOOFED"

    ci = _rows(out / "summary_ci.csv")
    assert [r["n"] for r in ci] == ["2", "2"]
    assert ci[0]["apc_mw_ci95"] != ""

    power = _rows(out / "node_power.csv")
    assert {r["bin_start_s"] for r in power} == {"0", "60"}

    runs = _rows(out / "runs.csv")
    assert [r["fingerprint"] for r in runs[:2]] == [o.report.fingerprint for o in results[0].outcomes]
    assert runs[0]["exposure"] == ""
    assert runs[2]["exposure"].count(":") == 1

    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["tool_version"] == VERSION
    assert manifest["seeds"] == [7, 8]

    assert parse_config(out / "scenario.conf") == cfg


def test_files_end_with_newline(cells, tmp_path):
    cfg, results = cells
    ReportService(str(tmp_path)).emit_outputs(results, _manifest(cfg, results, tmp_path))
    for name in ("summary.csv", "runs.csv", "manifest.json"):
        data = (tmp_path / name).read_bytes()
        assert data.endswith(b"\n") and b"\r\n" not in data


def test_nothing_to_write(tmp_path):
    cfg = small_config()
    failed = CellResult(scenario="baseline", variant=AttackVariant.NONE, error="boom", error_kind="run")
    service = ReportService(str(tmp_path / "out"))
    with pytest.raises(EmptyResultsError):
        service.emit_outputs([], _manifest(cfg, [], tmp_path))
    with pytest.raises(EmptyResultsError):
        service.emit_outputs([failed], _manifest(cfg, [failed], tmp_path))
    assert not (tmp_path / "out").exists()


def test_unwritable_directory(cells, tmp_path):
    cfg, results = cells
    blocker = tmp_path / "taken"
    blocker.write_text("not a directory", encoding="utf-8")
    with pytest.raises(ReportError):
        ReportService(str(blocker)).emit_outputs(results, _manifest(cfg, results, blocker))


def test_report_service_is_shared_per_directory(tmp_path):
    first = get_report_service(str(tmp_path / "a"))
    assert get_report_service(str(tmp_path / "a")) is first
    other = get_report_service(str(tmp_path / "b"))
    assert other is not first
    assert other.out_dir == tmp_path / "b"
