import json
import subprocess
import sys

import pytest

from geoculture.cli import main
from geoculture.cohort import FEATURES
from geoculture.synth import generate_city, write_config

from .conftest import small_config

REPORT_CORE = {"graph_summary.jsonl", "area_metrics.csv", "area_advantage.csv", "panel.csv",
               "anova_report.json", "diagnostics.json", "group_sizes.json", "run_manifest.json"}


def read_dir(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_synth_writes_six_files(tmp_path, capsys):
    cfg = tmp_path / "s.json"
    write_config(small_config(), cfg)
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert len(list((tmp_path / "o").iterdir())) == 6
    assert main(["synth", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "o" / "venues.csv").read_bytes() != (tmp_path / "p" / "venues.csv").read_bytes()


def test_malformed_json_is_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ nope", encoding="utf-8")
    assert main(["synth", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "malformed JSON" in capsys.readouterr().err
    assert main(["analyze", "--config", str(bad), "--out", str(tmp_path / "r")]) == 2


def test_unknown_synth_field(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"colour": 1}', encoding="utf-8")
    assert main(["synth", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_missing_inputs(tmp_path):
    assert main(["analyze", "--out", str(tmp_path / "r")]) == 2
    assert main(["analyze", "--input-dir", str(tmp_path / "none"), "--out", str(tmp_path / "r")]) == 2
    assert main(["validate", "--input-dir", str(tmp_path), "--alpha", "2"]) == 2


def test_validate_clean(city_dir, tmp_path):
    assert main(["validate", "--input-dir", str(city_dir), "--report", str(tmp_path / "d.json")]) == 0
    assert json.loads((tmp_path / "d.json").read_text()) == []


@pytest.mark.parametrize("unknown,loops", [(0, 1), (4, 0), (2, 3)])
def test_validate_counts_planted_defects(tmp_path, unknown, loops):
    d = tmp_path / "c"
    generate_city(small_config(unknown_id_rows=unknown, self_loop_rows=loops)).write(d)
    rep = tmp_path / "d.json"
    assert main(["validate", "--input-dir", str(d), "--report", str(rep)]) == 1
    diags = json.loads(rep.read_text())
    assert len(diags) == unknown + loops
    assert sum("self-loop" in x["message"] for x in diags) == loops


def test_analyze_bundle(city_dir, tmp_path):
    out = tmp_path / "rep"
    assert main(["analyze", "--input-dir", str(city_dir), "--out", str(out), "--dump-graphs"]) == 0
    names = set(read_dir(out))
    assert REPORT_CORE <= names
    assert {f"means_{f}.{x}" for f in FEATURES for x in ("csv", "svg")} <= names
    assert {"edges_t1.csv", "edges_t2.csv", "edges_t3.csv"} <= names
    lines = (out / "graph_summary.jsonl").read_text().splitlines()
    assert [json.loads(l)["t"] for l in lines] == [1, 2, 3]
    report = json.loads((out / "anova_report.json").read_text())
    effects = {(r["feature"], r["analysis"], r["effect"]) for r in report}
    assert len(effects) == 4 * len(FEATURES)
    svg = (out / "means_node_number.svg").read_text()
    assert svg.startswith("<svg") and 'width="800"' in svg
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert set(manifest["inputs"]) == {"venues", "transitions", "imd", "expenditure", "polygons"}
    assert "threads" not in manifest["config"]


def test_rerun_replaces_report_but_not_foreign_dirs(city_dir, tmp_path):
    out = tmp_path / "rep"
    assert main(["analyze", "--input-dir", str(city_dir), "--out", str(out)]) == 0
    assert main(["analyze", "--input-dir", str(city_dir), "--out", str(out)]) == 0
    foreign = tmp_path / "precious"
    foreign.mkdir()
    (foreign / "keep.txt").write_text("x")
    assert main(["analyze", "--input-dir", str(city_dir), "--out", str(foreign)]) == 2
    assert (foreign / "keep.txt").exists()


def test_thread_count_does_not_change_bytes(city_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["analyze", "--input-dir", str(city_dir), "--out", str(a), "--threads", "1"]) == 0
    assert main(["analyze", "--input-dir", str(city_dir), "--out", str(b), "--threads", "4"]) == 0
    assert read_dir(a) == read_dir(b)


def test_run_config_with_relative_paths(tmp_path):
    write_config(small_config(), tmp_path / "synth.json")
    (tmp_path / "run.json").write_text(json.dumps(
        {"synth_config": "synth.json", "out": "report", "density_mode": "per_venue"}))
    assert main(["analyze", "--config", str(tmp_path / "run.json")]) == 0
    manifest = json.loads((tmp_path / "report" / "run_manifest.json").read_text())
    assert manifest["config"]["density_mode"] == "per_venue"
    assert manifest["inputs"]["venues"]["source"] == "synth:venues.csv"
    (tmp_path / "run2.json").write_text('{"bogus": 1}')
    assert main(["analyze", "--config", str(tmp_path / "run2.json")]) == 2


def test_analysis_failure_exit_code(tmp_path):
    # venues and areas are fine but no transition falls in the analysed years
    d = tmp_path / "c"
    generate_city(small_config(first_year=2016)).write(d)
    assert main(["analyze", "--input-dir", str(d), "--out", str(tmp_path / "r")]) == 1


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "geoculture", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("geoculture ")
    r = subprocess.run([sys.executable, "-m", "geoculture", "analyze", "--bogus"], capture_output=True)
    assert r.returncode == 2
