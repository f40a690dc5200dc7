import json

import numpy as np
import pandas as pd
import pytest

from utils import (DEFAULT_CONFIG, ConfigError, ConvergenceError, GridResolutionError, build_report,
                   deep_merge, format_number, load_config, save_config, to_jsonable, write_csv_tables,
                   write_json_report, write_pdf_summary)

# -------------------------------
# Configuration
# -------------------------------
def test_deep_merge_keeps_base_intact():
    merged = deep_merge(DEFAULT_CONFIG, {"diag": {"boundary": "periodic"}})
    assert merged["diag"]["boundary"] == "periodic"
    assert merged["diag"]["dense_limit"] == DEFAULT_CONFIG["diag"]["dense_limit"]
    assert DEFAULT_CONFIG["diag"]["boundary"] == "neumann"


def test_load_json_and_toml(tmp_path):
    json_path = tmp_path / "cfg.json"
    json_path.write_text(json.dumps({"upper": {"eps_max": 0.3}}))
    assert load_config(str(json_path))["upper"]["eps_max"] == 0.3

    toml_path = tmp_path / "cfg.toml"
    toml_path.write_text("[runtime]\nthreads = 4\n")
    config = load_config(str(toml_path))
    assert config["runtime"]["threads"] == 4
    assert config["scattering"] == DEFAULT_CONFIG["scattering"]


def test_explicit_config_must_exist_and_parse(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))
    listed = tmp_path / "list.json"
    listed.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(str(listed))


def test_save_then_load(tmp_path):
    path = str(tmp_path / "saved.json")
    config = deep_merge(DEFAULT_CONFIG, {"dyson": {"c_eff_max": 4.0}})
    assert save_config(config, path)
    assert load_config(path)["dyson"]["c_eff_max"] == 4.0
    assert not save_config(config, str(tmp_path / "no" / "such" / "dir.json"))


def test_exit_codes():
    assert ConfigError("x").exit_code == 1
    assert GridResolutionError("x").exit_code == 2
    assert ConvergenceError("x").exit_code == 3

# -------------------------------
# Reports
# -------------------------------
def test_format_number_sentinel():
    assert format_number(1.0 / 3.0, 3) == "0.333"
    assert format_number(None) == "n/a"
    assert format_number(float("nan")) == "n/a"


def test_to_jsonable_converts_numpy():
    converted = to_jsonable({"a": np.float64(1.5), "b": np.arange(3), "c": np.bool_(True), "d": np.inf})
    assert converted == {"a": 1.5, "b": [0, 1, 2], "c": True, "d": "inf"}


def test_reports_are_deterministic(tmp_path):
    paths = []
    for name in ("one.json", "two.json"):
        report = build_report("temple", {"rho": 1e-4}, {"nu": np.float64(0.07)}, seed=0)
        report["timestamp"] = "fixed"
        paths.append(write_json_report(report, str(tmp_path / name)))
    with open(paths[0]) as a, open(paths[1]) as b:
        assert a.read() == b.read()


def test_csv_tables_document_columns(tmp_path):
    written = write_csv_tables({"sweep": pd.DataFrame({"R": [1.0, 2.0], "b": [3.0, 4.0]})},
                               str(tmp_path / "report"))
    assert written["sweep"]["columns"] == ["R", "b"]
    assert pd.read_csv(written["sweep"]["path"])["b"].tolist() == [3.0, 4.0]


def test_pdf_summary(tmp_path):
    report = build_report("scatter", {}, {"b": 1.25, "route": "radial", "nested": {"ok": True}})
    path = write_pdf_summary(report, str(tmp_path / "summary.pdf"))
    assert path is not None
    with open(path, "rb") as f:
        assert f.read(4) == b"%PDF"
