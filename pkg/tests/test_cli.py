import csv
import json
import math
import subprocess
import sys

import pytest

from lllab.cli import EXIT_CONVERGENCE, EXIT_INPUT, EXIT_OK, EXIT_RESOURCE, run


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_yrast_table(tmp_path):
    out = tmp_path / "d"
    assert run(["yrast", "--n", "4", "--lmax", "16", "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "yrast.csv")
    assert len(rows) == 17
    assert float(rows[0]["I_of_L"]) == pytest.approx(3 / math.pi, abs=1e-12)
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["command"] == "yrast"
    assert {"wall_time_s", "versions", "config", "seed"} <= set(meta)


def test_plasma_is_byte_identical_and_config_reruns(tmp_path):
    args = ["plasma", "--n", "16", "--m", "2", "--sweeps", "3000", "--seed", "7"]
    assert run(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert run(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    a = (tmp_path / "a" / "density.csv").read_bytes()
    assert a == (tmp_path / "b" / "density.csv").read_bytes()
    assert run(["plasma", "--config", str(tmp_path / "a" / "config.json"), "--out", str(tmp_path / "c")]) == EXIT_OK
    assert a == (tmp_path / "c" / "density.csv").read_bytes()


def test_phases_tags_all_three_regimes(tmp_path):
    out = tmp_path / "p"
    code = run(["phases", "--n", "4", "--omega-grid", "0.5,-1,-8", "--k-grid", "0.1", "--ed-max-dim", "3000", "--out", str(out)])
    assert code == EXIT_OK
    rows = read_csv(out / "phases.csv")
    assert {r["regime"] for r in rows} == {"laughlin", "annulus", "thermal"}
    laughlin = [r for r in rows if r["regime"] == "laughlin"][0]
    assert laughlin["L_star"] != ""
    # the thermal point needs sectors above the dimension cap, so ED is skipped
    thermal = [r for r in rows if r["regime"] == "thermal"][0]
    assert thermal["L_star"] == "" and int(thermal["m_opt"]) > 16


def test_trial_scan_and_gp_outputs(tmp_path):
    assert run(["trial", "--n", "4", "--m", "1", "--omega", "-3", "--k", "0.2", "--out", str(tmp_path / "t")]) == EXIT_OK
    assert read_csv(tmp_path / "t" / "scan.csv")
    assert run(["gp", "--omega", "0.2", "--ng", "20", "--lmax", "16", "--restarts", "2", "--out", str(tmp_path / "g")]) == EXIT_OK
    coeffs = read_csv(tmp_path / "g" / "coefficients.csv")
    assert len(coeffs) >= 17


def test_meanfield_profile(tmp_path):
    assert run(["meanfield", "--n", "32", "--m", "8", "--out", str(tmp_path / "mf")]) == EXIT_OK
    assert read_csv(tmp_path / "mf" / "profile.csv")


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        ["yrast", "--n", "4", "--lmax", "3", "--nonsense"],
        ["yrast", "--n", "0", "--lmax", "3"],
        ["ground", "--n", "4", "--omega", "-2", "--k", "0.05", "--lmax", "6"],
    ],
)
def test_input_errors_exit_with_code_two(argv, tmp_path):
    assert run(argv + ["--out", str(tmp_path / "x")]) == EXIT_INPUT


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 3, "lmax": 4, "colour": "red"}))
    assert run(["yrast", "--config", str(cfg), "--out", str(tmp_path / "y")]) == EXIT_INPUT


def test_non_convergence_exit_code(tmp_path):
    code = run(["meanfield", "--n", "64", "--m", "0", "--max-iter", "2", "--out", str(tmp_path / "m")])
    assert code == EXIT_CONVERGENCE


def test_resource_exit_code(tmp_path):
    code = run(["trial", "--n", "9", "--out", str(tmp_path / "r")])
    assert code == EXIT_RESOURCE


def test_console_script_usage():
    proc = subprocess.run([sys.executable, "-m", "lllab.cli", "yrast", "--bad"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage" in proc.stderr
