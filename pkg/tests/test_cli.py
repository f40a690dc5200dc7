import json
import os

import pytest

from cli import build_parser, main

WALL_3D = """
[potential]
kind = "radial_euclidean"
dimension = 3

[potential.params]
profile = "wall"
height = 10.0
radius = 1.0
"""

WEAK_METRIC_WALL = """
[potential]
kind = "radial_metric"
dimension = 6

[potential.params]
profile = "wall"
height = 0.1
radius = 1.2
"""


@pytest.fixture
def wall_file(tmp_path):
    path = tmp_path / "wall.toml"
    path.write_text(WALL_3D)
    return str(path)


@pytest.fixture
def metric_file(tmp_path):
    path = tmp_path / "metric_wall.toml"
    path.write_text(WEAK_METRIC_WALL)
    return str(path)


def run_cli(tmp_path, *argv):
    out = str(tmp_path / "report.json")
    code = main([*argv, "--out", out])
    report = None
    if os.path.exists(out):
        with open(out) as f:
            report = json.load(f)
    return code, report

# -------------------------------
# Usage errors
# -------------------------------
def test_unknown_command_is_a_config_error():
    assert main(["integrate"]) == 1
    assert main([]) == 1


def test_missing_config_file(tmp_path, wall_file):
    code, report = run_cli(tmp_path, "scatter", "--potential", wall_file, "--config", str(tmp_path / "nope.json"))
    assert code == 1
    assert report is None


def test_missing_potential_file(tmp_path):
    code, _ = run_cli(tmp_path, "scatter", "--potential", str(tmp_path / "missing.toml"))
    assert code == 1


def test_parser_lists_every_command():
    parser = build_parser()
    for command in ("scatter", "dyson", "diag", "sandwich"):
        assert parser.parse_args([command, "--potential", "v.toml"]).command == command
    args = parser.parse_args(["temple", "--rho", "1e-3", "--alpha", "0.5", "--beta", "0.19"])
    assert (args.command, args.seed, args.boxes) == ("temple", 0, 8)
    assert parser.parse_args(["bounds", "--potential", "v.toml", "--rho", "1e-3"]).alpha_upper == pytest.approx(1.0 / 75.0)

# -------------------------------
# Commands
# -------------------------------
def test_scatter_report(tmp_path, wall_file):
    code, report = run_cli(tmp_path, "scatter", "--potential", wall_file, "--d", "3")
    assert code == 0
    assert report["command"] == "scatter"
    assert report["seed"] == 0
    results = report["results"]
    assert results["b"] == pytest.approx(results["references"]["soft_sphere"], rel=1e-2)
    assert 0 < results["relative_to_hard_sphere"] < 1
    sweep = report["csv_files"]["radius_sweep"]
    assert os.path.exists(sweep["path"])
    assert sweep["columns"] == ["R", "b_R_coarse", "b_R_fine"]


def test_scatter_dimension_mismatch(tmp_path, wall_file):
    code, _ = run_cli(tmp_path, "scatter", "--potential", wall_file, "--d", "6")
    assert code == 1


def test_temple_report(tmp_path):
    code, report = run_cli(tmp_path, "temple", "--rho", "1e-2", "--alpha", "0.5", "--beta", "0.19",
                           "--draws", "2")
    assert code == 0
    results = report["results"]
    assert results["nu_at_parameters"] == pytest.approx(0.07)
    assert results["optimum"]["nu"] == pytest.approx(1.0 / 7.0, abs=1e-6)
    assert set(report["csv_files"]) == {"nu_grid", "c_err_sensitivity", "c_k"}
    assert results["assembly"]["e_lower"] <= results["assembly"]["leading_density"]


def test_temple_outside_window_is_a_precondition_error(tmp_path):
    code, report = run_cli(tmp_path, "temple", "--rho", "1e-2", "--alpha", "0.7", "--beta", "0.19")
    assert code == 2
    assert report is None


def test_dyson_report(tmp_path, metric_file):
    code, report = run_cli(tmp_path, "dyson", "--potential", metric_file, "--r1-ratio", "10",
                           "--configs", "256")
    assert code == 0
    results = report["results"]
    certificate = results["certificate"]
    assert certificate["pass"]
    assert certificate["metric"] == "M"
    assert certificate["R1"] == pytest.approx(10.0 * certificate["R0"])
    assert results["no_four_body"]["configurations"] == 256
    assert results["no_four_body"]["violations"] == 0
    assert results["pass"]


def test_bounds_sandwich_in_dilute_regime(tmp_path, metric_file):
    rho, b = 1e-2, 1.0
    assert rho * b**0.75 <= 1e-2
    code, report = run_cli(tmp_path, "bounds", "--potential", metric_file, "--rho", str(rho), "--b", str(b))
    assert code == 0
    results = report["results"]
    assert results["b_M"] == b
    assert results["leading_density"] == pytest.approx(rho**3 * b / 6.0)
    assert results["sandwich"]
    assert results["e_lower"] <= results["leading_density"] <= results["e_upper"]


def test_bounds_outside_window_is_a_precondition_error(tmp_path, metric_file):
    code, _ = run_cli(tmp_path, "bounds", "--potential", metric_file, "--rho", "1e-2", "--b", "1.0",
                      "--alpha", "0.7")
    assert code == 2


def test_diag_report(tmp_path, metric_file):
    code, report = run_cli(tmp_path, "diag", "--potential", metric_file, "--n", "3", "--sites", "4")
    assert code == 0
    results = report["results"]
    assert results["E0"] >= -1e-10
    assert results["symmetry"]["passed"]
    assert 0 < results["ratio"] < 2


def test_diag_rejects_small_boxes(tmp_path, metric_file):
    code, _ = run_cli(tmp_path, "diag", "--potential", metric_file, "--sites", "3")
    assert code == 2


def assert_sandwich(results):
    assert all(results["flags"].values())
    assert results["pass"]
    assert results["lower_route"] == "temple"
    assert results["temple"]["cond_temple"]
    assert results["upper_route"] == "diagonalized"
    assert results["e_lower"] <= results["E0_density"] <= results["e_upper_diagonalized"] <= results["e_upper"]
    assert results["e_upper"] == pytest.approx(results["E_upper_analytic"] / results["box"]["side"] ** 3)
    assert results["e_upper_tiled"] <= results["e_upper"]


def test_sandwich_flags(tmp_path, metric_file):
    code, report = run_cli(tmp_path, "sandwich", "--potential", metric_file, "--n", "3", "--sites", "4")
    assert code == 0
    assert_sandwich(report["results"])


@pytest.mark.slow
def test_sandwich_flags_six_sites(tmp_path, metric_file):
    code, report = run_cli(tmp_path, "sandwich", "--potential", metric_file, "--n", "3", "--sites", "6")
    assert code == 0
    results = report["results"]
    assert_sandwich(results)


def test_xlsx_export(tmp_path):
    code, _ = run_cli(tmp_path, "temple", "--rho", "1e-2", "--alpha", "0.5", "--beta", "0.19",
                      "--draws", "1", "--export", "xlsx")
    assert code == 0
    assert (tmp_path / "report.xlsx").exists()
