"""Tests for run configuration resolution."""

import pytest

from src.exceptions import ContractError, ParseError
from src.settings import OUTPUT_DIR_ENV, RunConfig, load_run_config, read_config_file


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    monkeypatch.chdir(tmp_path)


def test_defaults():
    config = load_run_config("rsed", {})
    assert config.f_level == 0.05
    assert config.f_grid == [0.001, 0.01, 0.05, 0.1, 0.125]
    assert config.measure == "hamming_loss"
    assert config.output_dir == "outputs"


def test_precedence(tmp_path, monkeypatch):
    path = tmp_path / "run.toml"
    path.write_text('f-level = 0.1\nmin-leaf = 4\noutput-dir = "from-file"\n', encoding="utf-8")
    monkeypatch.setenv(OUTPUT_DIR_ENV, "from-env")
    config = load_run_config("tree-learn", {"min_leaf": 3, "f_level": None}, config_file=path)
    assert config.f_level == 0.1
    assert config.min_leaf == 3
    assert config.output_dir == "from-env"
    config = load_run_config("tree-learn", {"output_dir": "from-flag"}, config_file=path)
    assert config.output_dir == "from-flag"


def test_measure_alias():
    assert load_run_config("landscape", {"measure": ["F1.macro", "hamming_loss"]}).measures == [
        "F1.macro",
        "hamming_loss",
    ]
    assert load_run_config("perf-model", {"measure": "F1.macro"}).measures == ["F1.macro"]


def test_unknown_config_keys(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("colour = 'blue'\n", encoding="utf-8")
    with pytest.raises(ParseError, match="colour"):
        read_config_file(path)


def test_malformed_toml(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("f-level = \n", encoding="utf-8")
    with pytest.raises(ParseError):
        read_config_file(path)


@pytest.mark.parametrize(
    "overrides",
    [{"f_level": 1.5}, {"f_grid": [0.0]}, {"min_leaf": 0}, {"k_top": 0}, {"formats": ["xml"]}],
)
def test_range_checks(overrides):
    with pytest.raises(ContractError):
        load_run_config("landscape", overrides)


def test_missing_input_path(tmp_path):
    with pytest.raises(ContractError, match="meta"):
        load_run_config("landscape", {}, inputs={"meta": str(tmp_path / "nope.csv")})


def test_provenance_excludes_output_dir():
    record = RunConfig(command="rsed", output_dir="somewhere").provenance()
    assert "output_dir" not in record
    assert record["command"] == "rsed"
