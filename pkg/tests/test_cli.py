import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from modwit import __version__
from modwit.cli import main

SCHEMA = json.loads(resources.files("modwit").joinpath("report_schema.json").read_text())


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _report(capsys, *argv):
    code, out, err = _run(capsys, *argv)
    assert code == 0, err
    report = json.loads(out)
    jsonschema.validate(report, SCHEMA)
    return report


@pytest.fixture(scope="module")
def maps(tmp_path_factory):
    root = tmp_path_factory.mktemp("maps")
    near, far = root / "near.csv", root / "far.csv"
    assert main(["simulate", "--slits", "2", "--grid", "256", "--bins", "16",
                 "--out-near", str(near), "--out-far", str(far), "--total", "1e6",
                 "--out", str(root / "sim.json")]) == 0
    return near, far


def _inputs(maps):
    near, far = maps
    return ["--near", str(near), "--far", str(far), "--ell", "0.16", "--bins", "16"]


def test_simulate_then_witness_reproduces_reference(tmp_path, capsys):
    near, far = tmp_path / "near.csv", tmp_path / "far.csv"
    rep = _report(capsys, "simulate", "--slits", "2", "--width", "0.08", "--sep", "0.16",
                  "--out-near", str(near), "--out-far", str(far))
    assert rep["config"]["slits"] == {"D": 2, "a_mm": 0.08, "d_mm": 0.16}
    rep = _report(capsys, "witness", "--near", str(near), "--far", str(far), "--ell", "0.16",
                  "--criterion", "ent-ent")
    (result,) = rep["results"]
    assert result["criterion"] == "ent_ent"
    assert result["violation"] == pytest.approx(-0.28, abs=0.02)


def test_witness_all_criteria(maps, capsys):
    rep = _report(capsys, "witness", *_inputs(maps))
    assert [r["criterion"] for r in rep["results"]] == ["var_ent", "ent_ent", "coarse_grained"]
    assert all(r["violation"] < 0 for r in rep["results"])
    cfg = rep["config"]
    assert cfg["ell"] == 0.16 and cfg["bins"] == 16 and cfg["entropy_estimator"] == "histogram_plugin"
    assert len(cfg["inputs"]["near"]["sha256"]) == 64
    assert rep["provenance"]["version"] == __version__


def test_steer(maps, capsys):
    rep = _report(capsys, "steer", *_inputs(maps), "--direction", "2|1")
    assert [r["criterion"] for r in rep["results"]] == ["var_steer", "ent_steer"]
    assert all(r["pairing"] is None for r in rep["results"])


def test_witness_with_error_bars(maps, capsys):
    rep = _report(capsys, "witness", *_inputs(maps), "--criterion", "ent-ent", "--trials", "5")
    assert rep["results"][0]["sd"] > 0


def test_resample(maps, capsys):
    rep = _report(capsys, "resample", *_inputs(maps), "--criterion", "var-steer", "--trials", "5")
    assert rep["resample"]["sd"] > 0
    assert rep["config"]["criterion"] == "var_steer"


def test_constant_c(capsys):
    rep = _report(capsys, "constant-c", "--nmax", "64")
    assert rep["constant"]["c_value"] == pytest.approx(0.078235, abs=5e-6)
    assert rep["constant"]["converged"] is True
    code, out, _ = _run(capsys, "constant-c", "--format", "csv")
    assert code == 0
    header, row = out.strip().splitlines()
    assert header == "n_max,c_value,convergence_delta"
    assert float(row.split(",")[1]) == pytest.approx(0.078235, abs=5e-6)


def test_scan_ell_outputs(tmp_path, capsys):
    curve, svg = tmp_path / "curve.csv", tmp_path / "scan.svg"
    rep = _report(capsys, "scan-ell", "--slits", "2", "--grid", "512", "--bins", "32",
                  "--start", "0.9", "--stop", "1.1", "--step", "0.05",
                  "--curve-csv", str(curve), "--svg", str(svg))
    assert rep["scan"]["ratios"] == [0.9, 0.95, 1.0, 1.05, 1.1]
    assert rep["scan"]["argmin_ratio"] == 1.0
    lines = curve.read_text().splitlines()
    assert lines[0] == "ratio,violation,bins" and len(lines) == 6
    assert svg.read_text().lstrip().startswith("<?xml")


def test_scan_ell_on_files_needs_separation(maps, capsys):
    near, far = maps
    code, _, err = _run(capsys, "scan-ell", "--near", str(near), "--far", str(far),
                        "--start", "1", "--stop", "1")
    assert code == 1 and "--sep" in err
    rep = _report(capsys, "scan-ell", "--near", str(near), "--far", str(far), "--sep", "0.16",
                  "--bins", "16", "--start", "0.95", "--stop", "1.05", "--step", "0.05")
    assert rep["scan"]["argmin_ratio"] == 1.0


def test_bar_chart(maps, tmp_path, capsys):
    svg = tmp_path / "bars.svg"
    _report(capsys, "witness", *_inputs(maps), "--svg", str(svg))
    text = svg.read_text()
    assert "<svg" in text


def test_csv_report(maps, capsys):
    code, out, _ = _run(capsys, "witness", *_inputs(maps), "--format", "csv")
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0] == "criterion,pairing,lhs,threshold,violation,sd"
    assert len(rows) == 4


def test_reports_are_deterministic(maps, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1600000000")
    out = tmp_path / "r.json"
    argv = ["witness", *_inputs(maps), "--trials", "4", "--seed", "9", "--out", str(out)]
    assert main(argv) == 0
    first = out.read_bytes()
    assert main(argv) == 0
    assert out.read_bytes() == first
    report = json.loads(first)
    jsonschema.validate(report, SCHEMA)
    assert report["provenance"]["timestamp"] == "2020-09-13T12:26:40Z"


def test_simulate_poisson_is_seeded(tmp_path):
    def sim(tag, seed):
        near, far = tmp_path / f"n{tag}.csv", tmp_path / f"f{tag}.csv"
        assert main(["simulate", "--grid", "256", "--bins", "16", "--total", "1e5", "--poisson",
                     "--seed", str(seed), "--out-near", str(near), "--out-far", str(far),
                     "--out", str(tmp_path / f"{tag}.json")]) == 0
        return near.read_bytes() + far.read_bytes()

    assert sim("a", 1) == sim("b", 1)
    assert sim("a", 1) != sim("c", 2)


# --- exit codes ------------------------------------------------------------


def test_missing_input_file_exits_2(tmp_path, capsys):
    code, _, err = _run(capsys, "witness", "--near", str(tmp_path / "none.csv"),
                        "--far", str(tmp_path / "none.csv"), "--ell", "0.16")
    assert code == 2
    assert "error" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["witness", "--bogus"],
        ["frobnicate"],
        ["witness", "--near", "a.csv"],
        ["constant-c", "--nmax", "many"],
        [],
    ],
)
def test_usage_errors_exit_1(argv, capsys):
    code, _, err = _run(capsys, *argv)
    assert code == 1
    assert "usage" in err


def test_validation_error_exits_1(maps, capsys):
    near, far = maps
    code, _, err = _run(capsys, "witness", "--near", str(far), "--far", str(near), "--ell", "0.16")
    assert code == 1 and "kind=near" in err
    code, _, err = _run(capsys, "constant-c", "--nmax", "-3")
    assert code == 1


def test_malformed_file_exits_1(tmp_path, maps, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("# kind=near\n# magnification=3.6\nrho1_mm,rho2_mm,counts\n0.0,0.0,1\n")
    code, _, err = _run(capsys, "witness", "--near", str(bad), "--far", str(maps[1]), "--ell", "0.16")
    assert code == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "modwit", "constant-c", "--format", "csv"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "0.0782350" in proc.stdout
