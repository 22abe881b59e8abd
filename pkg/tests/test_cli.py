from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from trajsim.calibration import vasicek_zc_rate
from trajsim.cli import build_parser, main
from trajsim.experiments import RECIPES
from trajsim.sde import VasicekParams


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def curve_file(tmp_path):
    t = np.arange(1.0, 21.0)
    rates = vasicek_zc_rate(VasicekParams(0.3, 0.06, 0.02, 0.05), t)
    path = tmp_path / "curve.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["maturity_years", "zero_rate"])
        w.writerows(zip(t, rates))
    return path


# --- rng -------------------------------------------------------------------


def test_rng_gen_seventeen_digits(tmp_path, capsys):
    out = tmp_path / "u.csv"
    code, _, _ = run(["rng", "gen", "--source", "lcg", "--seed", "1", "--count", "3", "--out", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    assert float(lines[0]) == 48271 / 2147483647
    assert lines[0] == format(48271 / 2147483647, ".17g")


def test_rng_gen_torus_stdout(capsys):
    code, out, _ = run(["rng", "gen", "--source", "torus", "--prime", "5", "--count", "3"], capsys)
    assert code == 0
    assert float(out.splitlines()[2]) == pytest.approx(0.70820393, abs=1e-8)


def test_rng_transform_normal_and_poisson(capsys):
    code, out, _ = run(["rng", "transform", "--dist", "normal", "--count", "5"], capsys)
    assert code == 0 and len(out.splitlines()) == 5
    code, out, _ = run(["rng", "transform", "--dist", "poisson", "--lambda", "0", "--count", "4"], capsys)
    assert code == 0 and out.split() == ["0"] * 4


def test_rng_transform_negative_lambda_is_domain_error(capsys):
    code, _, err = run(["rng", "transform", "--dist", "poisson", "--lambda", "-1", "--count", "2"], capsys)
    assert code == 1 and "lambda" in err


def test_rng_test_torus_report(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, _, _ = run(["rng", "test", "--source", "torus", "--prime", "5", "--out", str(out)], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["config_echo"]["prime"] == 5
    tests = {r["test"]: r for r in doc["reports"]}
    assert set(tests) == {"chi2", "ks", "ad", "poker", "correlogram"}
    for r in doc["reports"]:
        assert set(r) == {"test", "statistic", "p_value", "verdict", "details"}
    assert tests["correlogram"]["statistic"] > 0.5


def test_torus_precision_error_exit_code(capsys):
    code, _, err = run(["rng", "gen", "--source", "mixed", "--count", "20000000"], capsys)
    assert code == 1 and "precision" in err


# --- sde -------------------------------------------------------------------


def test_sde_simulate_header_and_shape(tmp_path, capsys):
    out = tmp_path / "paths.csv"
    code, _, _ = run(["sde", "simulate", "--model", "cir", "--scheme", "milstein", "--delta", "0.25",
                      "-T", "1", "-n", "3", "--seed", "2", "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["t", "path_0", "path_1", "path_2"]
    assert len(rows) == 6
    assert [float(v) for v in rows[1][1:]] == [0.04] * 3


def test_sde_simulate_non_integral_grid(tmp_path, capsys):
    out = tmp_path / "paths.csv"
    code, _, err = run(["sde", "simulate", "--delta", "0.3", "-T", "1", "--out", str(out)], capsys)
    assert code == 1
    assert not out.exists()


def test_sde_convergence_outputs(tmp_path, capsys):
    out, table = tmp_path / "conv.json", tmp_path / "conv.csv"
    code, _, _ = run(["sde", "convergence", "--scheme", "milstein", "-n", "2000", "--out", str(out),
                      "--csv", str(table)], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert 0.7 < doc["fitted_order"] < 1.3
    assert doc["config_echo"]["scheme"] == "milstein"
    rows = list(csv.reader(table.open()))
    assert rows[0] == ["delta", "log_delta", "mean_abs_error", "log_error"]
    assert len(rows) == 6


# --- price -----------------------------------------------------------------


def test_price_call_columns(tmp_path, capsys):
    out = tmp_path / "errors.csv"
    code, _, _ = run(["price", "call", "--n", "1000", "--step", "250", "--source", "torus", "--out", str(out)],
                     capsys)
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["n", "estimate", "rho"]
    assert [r[0] for r in rows[1:]] == ["250", "500", "750", "1000"]


# --- calib -----------------------------------------------------------------


def test_calib_adhoc_fixed_sigma(curve_file, tmp_path, capsys):
    out = tmp_path / "fit.json"
    code, _, _ = run(["calib", "adhoc", "--curve", str(curve_file), "--objective", "prices",
                      "--fix", "sigma=0.05", "--r0", "0.02", "--out", str(out)], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert {"method", "a", "b", "sigma", "r0", "objective_value", "iterations", "config_echo"} <= set(doc)
    assert doc["a"] == pytest.approx(0.3, abs=1e-5)
    assert doc["sigma"] == 0.05


def test_calib_adhoc_empty_curve_exit_2_no_output(tmp_path, capsys):
    curve = tmp_path / "empty.csv"
    curve.write_text("")
    out = tmp_path / "fit.json"
    code, _, err = run(["calib", "adhoc", "--curve", str(curve), "--out", str(out)], capsys)
    assert code == 2
    assert "empty" in err
    assert not out.exists()
    assert list(tmp_path.iterdir()) == [curve]


def test_calib_adhoc_malformed_row_reports_line(tmp_path, capsys):
    curve = tmp_path / "bad.csv"
    curve.write_text("maturity_years,zero_rate\n1,0.02\n2,0.03\n3,oops\n")
    code, _, err = run(["calib", "adhoc", "--curve", str(curve)], capsys)
    assert code == 2 and ":4:" in err


def test_calib_adhoc_missing_file(tmp_path, capsys):
    code, _, err = run(["calib", "adhoc", "--curve", str(tmp_path / "nope.csv")], capsys)
    assert code == 2 and "I/O" in err


def test_calib_adhoc_bad_fix_is_validation_error(curve_file, capsys):
    code, _, _ = run(["calib", "adhoc", "--curve", str(curve_file), "--fix", "kappa=1"], capsys)
    assert code == 1


def test_calib_indirect_and_ar1(tmp_path, capsys):
    from trajsim.calibration import simulate_short_rate
    from trajsim.dist_transforms import NormalSource
    from trajsim.rng_core import LcgSource

    series = simulate_short_rate("vasicek", 0.5, 0.05, 0.1, 0.05, 1 / 12,
                                 NormalSource(LcgSource(3)).normals(600))[0]
    path = tmp_path / "rates.csv"
    path.write_text("rate\n" + "\n".join(format(v, ".17g") for v in series) + "\n")
    out = tmp_path / "fit.json"
    code, _, _ = run(["calib", "indirect", "--series", str(path), "--H", "3", "--seed", "5",
                      "--out", str(out)], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["method"] == "indirect" and doc["naive"]["method"] == "naive_euler"
    code, out_text, _ = run(["calib", "ar1", "--series", str(path)], capsys)
    assert code == 0 and json.loads(out_text)["method"] == "mle_exact"


def test_series_malformed_line(tmp_path, capsys):
    path = tmp_path / "rates.csv"
    path.write_text("rate\n0.01\n0.02\nx\n")
    code, _, err = run(["calib", "ar1", "--series", str(path)], capsys)
    assert code == 2 and ":4:" in err


# --- recipes / plumbing ----------------------------------------------------


def test_every_figure_and_table_has_a_recipe():
    required = {"figure1", "figure2", "figure7", "figure8", "figure9", "figure11", "figure12", "table2", "table3"}
    assert required <= set(RECIPES)
    choices = build_parser()._subparsers._group_actions[0].choices["sim"]._actions
    recipe_arg = next(a for a in choices if a.dest == "recipe")
    assert set(recipe_arg.choices) == set(RECIPES)


def test_sim_recipe_respects_count(tmp_path, capsys):
    out = tmp_path / "f9.csv"
    code, _, _ = run(["sim", "figure9", "-n", "500", "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["h", "rho"] and len(rows) == 51


def test_sim_figure1_plot_ready(tmp_path, capsys):
    out = tmp_path / "f1.csv"
    code, _, _ = run(["sim", "figure1", "-n", "200", "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["t", "exact", "euler", "milstein"]
    assert len(rows) == 122
    # constant diffusion: the two discretisations coincide
    assert all(r[2] == r[3] for r in rows[1:])


def test_outputs_are_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert main(["rng", "test", "--source", "mixed", "--count", "4000", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["rng", "gen", "--bogus"])
    assert info.value.code == 2


def test_threads_flag_accepted(capsys):
    code, out, _ = run(["--threads", "2", "rng", "gen", "--count", "1"], capsys)
    assert code == 0 and out.strip()


def test_help_documents_flags(capsys):
    with pytest.raises(SystemExit):
        main(["sde", "simulate", "--help"])
    text = capsys.readouterr().out
    for flag in ("--model", "--scheme", "--a", "--b", "--r0", "--sigma", "--delta", "-T", "-n", "--seed", "--out"):
        assert flag in text


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "trajsim.cli", "rng", "gen", "--count", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert len(proc.stdout.splitlines()) == 2


def test_threads_must_be_positive_and_is_not_echoed(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["--threads", "0", "rng", "gen"])
    assert info.value.code == 2
    out = tmp_path / "r.json"
    assert main(["--threads", "3", "rng", "test", "--count", "1000", "--out", str(out)]) == 0
    assert "threads" not in json.loads(out.read_text())["config_echo"]
