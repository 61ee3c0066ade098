"""
Tests for experiment files, CSV output and the experiment drivers.
"""

import math

import numpy as np
import pandas as pd
import pytest

from gwp_transform.core.config import GWPTSettings
from gwp_transform.core.errors import ConfigError
from gwp_transform.experiments.config import (
    ExperimentConfig,
    parse_counts,
    parse_length,
    preset,
    preset_names,
)
from gwp_transform.experiments.io import SWEEP_COLUMNS, read_records, records_frame, write_csv
from gwp_transform.experiments.runner import (
    FIT_COLUMNS,
    SUMMATION_COLUMNS,
    run_fits,
    run_overlap_check,
    run_semi_discrete_check,
    run_summation,
    run_sweep,
    samples_for,
    sweep_tasks,
)
from gwp_transform.reconstruction import ErrorSweepRecord
from gwp_transform.settings import Settings


@pytest.fixture
def settings():
    return GWPTSettings(jobs=1, timings=False)


@pytest.fixture
def small_config():
    return ExperimentConfig.from_dict(
        {
            "name": "small",
            "psi0": {"q0": 0.0, "p0": 0.5, "eps": 1.0},
            "basis": {"gamma_imag": 2.0},
            "box": {"L_q": 3.0, "M": [4, 8], "samples_per_dim": 65},
            "rules": [
                {"rule": "TcM", "N": [2, 4], "L_p": ["pi", "2pi"]},
                {"rule": "GH", "N": "4:6:2"},
            ],
        }
    )


class TestParsing:
    """Test scalar parsing helpers."""

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("4pi", 4 * math.pi),
            ("4*pi", 4 * math.pi),
            ("pi/2", math.pi / 2),
            ("π", math.pi),
            ("2.5", 2.5),
            (3, 3.0),
        ],
    )
    def test_parse_length(self, text, expected):
        assert parse_length(text) == pytest.approx(expected)

    @pytest.mark.parametrize("text", ["", "tau", "pi pi", True])
    def test_parse_length_rejects(self, text):
        with pytest.raises(ValueError):
            parse_length(text)

    def test_parse_counts(self):
        assert parse_counts("2:10:4") == [2, 6, 10]
        assert parse_counts("3:5") == [3, 4, 5]
        assert parse_counts(7) == [7]
        with pytest.raises(ValueError):
            parse_counts("2-10")


class TestExperimentConfig:
    """Test experiment validation and presets."""

    def test_scalars_become_lists(self, small_config):
        assert small_config.psi0.eps == [1.0]
        assert small_config.basis.gamma_imag == [2.0]
        assert small_config.rules[0].L_p == pytest.approx([math.pi, 2 * math.pi])
        assert small_config.rules[1].N == [4, 6]
        assert small_config.dim == 1

    def test_dump_round_trip(self, small_config):
        again = ExperimentConfig.from_yaml(small_config.dump())
        assert again.model_dump() == small_config.model_dump()

    def test_field_path(self):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_dict({"box": {"M": [0]}})
        assert info.value.field == "box.M"

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"psi0": {"q": [0.0]}})

    def test_rule_parameters(self):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_dict({"rules": [{"rule": "TcM", "N": [2, 4]}]})
        assert info.value.field.startswith("rules")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"rules": [{"rule": "GH", "N": [4, 2]}]})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"rules": [{"rule": "RS"}]})

    def test_basis_matrix(self):
        config = ExperimentConfig.from_dict(
            {"psi0": {"q0": [0, 0], "p0": [0, 0]}, "basis": {"im_matrix": [[2.0, 0.5], [0.5, 1.0]]}}
        )
        [(sigma, width)] = config.basis.widths(2)
        assert sigma == pytest.approx(float(np.linalg.eigvalsh([[2.0, 0.5], [0.5, 1.0]])[0]))
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(
                {
                    "psi0": {"q0": [0, 0], "p0": [0, 0]},
                    "basis": {"im_matrix": [[1.0, 0.0], [0.0, -1.0]]},
                }
            )

    def test_yaml_line_number(self):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_yaml("name: broken\nbox: {L_q: 1\nrules: []\n")
        assert "line" in str(info.value)

    def test_presets(self):
        assert {"example1", "example2"} <= set(preset_names())
        example1 = preset("example1")
        assert example1.box.M == [16, 64]
        assert example1.rules[0].N[:3] == [2, 4, 6]
        assert example1.rules[2].dp[-1] == pytest.approx(math.pi / 8)
        example2 = preset("example2")
        assert example2.psi0.eps == [0.1, 0.05]
        with pytest.raises(ConfigError):
            preset("example9")

    def test_with_overrides(self, small_config, tmp_path):
        target = tmp_path / "out.csv"
        config = small_config.with_overrides(out=str(target), samples=128)
        assert config.output.path == str(target)
        assert config.box.samples_per_dim == 128
        assert small_config.box.samples_per_dim == 65


class TestSettingsFiles:
    """Test loading raw experiment files."""

    def test_yaml_and_json(self, tmp_path):
        yml = tmp_path / "a.yml"
        yml.write_text("name: a\nbox:\n  L_q: 2\n")
        js = tmp_path / "a.json"
        js.write_text('{"name": "a", "box": {"L_q": 2}}')
        assert Settings(yml).config == Settings(js).config
        assert ExperimentConfig.load_from_file(js).box.L_q == 2.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            Settings(tmp_path / "missing.yml")

    def test_unsupported_suffix(self, tmp_path):
        path = tmp_path / "a.txt"
        path.write_text("name: a\n")
        with pytest.raises(ConfigError):
            Settings(path)

    def test_top_level_list(self, tmp_path):
        path = tmp_path / "a.yml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            Settings(path)

    def test_get_set(self):
        settings = Settings()
        settings.set("name", "x")
        assert settings.get("name") == "x"
        assert settings.get("missing", 3) == 3


class TestRuntimeSettings:
    """Test GWPT_ environment settings."""

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("GWPT_JOBS", raising=False)
        settings = GWPTSettings.load()
        assert settings.samples_per_dim == 2048
        assert settings.rs_tail_tol == 1e-16

    def test_environment(self, monkeypatch):
        monkeypatch.setenv("GWPT_SAMPLES_PER_DIM", "256")
        assert GWPTSettings.load().samples_per_dim == 256

    def test_overrides_win(self, monkeypatch):
        monkeypatch.setenv("GWPT_JOBS", "4")
        assert GWPTSettings.load(jobs=2).jobs == 2

    def test_samples_for(self, small_config, settings):
        assert samples_for(small_config, settings) == 65
        assert samples_for(ExperimentConfig(), settings) == settings.samples_per_dim


class TestCsv:
    """Test deterministic CSV output."""

    @pytest.fixture
    def sweep_records(self):
        return [
            ErrorSweepRecord("TcM", 4, 16, 2.0, 1.0, math.pi, 0.125, predicted_bound=3.5),
            ErrorSweepRecord("GH", 4, 16, 2.0, 1.0, None, 1e-7),
        ]

    def test_byte_identical(self, sweep_records, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "nested" / "b.csv"
        write_csv(records_frame(sweep_records), first)
        write_csv(records_frame(sweep_records), second)
        assert first.read_bytes() == second.read_bytes()
        text = first.read_text()
        assert "\r" not in text
        assert text.splitlines()[0] == ",".join(SWEEP_COLUMNS)
        assert text.splitlines()[2] == "GH,4,16,2.0,1.0,,1e-07,,"

    def test_read_back(self, sweep_records, tmp_path):
        path = tmp_path / "sweep.csv"
        write_csv(records_frame(sweep_records), path)
        assert read_records(path) == sweep_records

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("rule,N\nGH,4\n")
        with pytest.raises(ConfigError):
            read_records(path)

    def test_stdout(self, sweep_records, capsys):
        write_csv(records_frame(sweep_records))
        assert capsys.readouterr().out.startswith("rule,N,M")


class TestRunners:
    """Test the experiment drivers."""

    def test_sweep_task_order(self, small_config, settings):
        tasks = sweep_tasks(small_config, settings)
        keys = [(t.M, t.rule, t.L_p, t.N) for t in tasks]
        assert keys[:6] == [
            (4, "TcM", math.pi, 2),
            (4, "TcM", math.pi, 4),
            (4, "TcM", 2 * math.pi, 2),
            (4, "TcM", 2 * math.pi, 4),
            (4, "GH", None, 4),
            (4, "GH", None, 6),
        ]
        assert len(tasks) == 12
        assert all(task.samples_per_dim == 65 for task in tasks)

    def test_sweep_needs_rules(self, settings):
        with pytest.raises(ConfigError):
            sweep_tasks(ExperimentConfig(), settings)

    def test_sweep_rows(self, small_config, settings):
        frame = run_sweep(small_config, settings)
        assert list(frame.columns) == SWEEP_COLUMNS
        assert len(frame) == 12
        assert frame["wall_time_s"].isna().all()
        assert (frame["sup_error"] >= 0).all()

    def test_parallel_matches_serial(self, small_config, settings):
        serial = run_sweep(small_config, settings)
        parallel = run_sweep(small_config, GWPTSettings(jobs=2))
        pd.testing.assert_frame_equal(serial, parallel)

    def test_fits(self):
        records = [
            ErrorSweepRecord("TcM", n, 16, 2.0, 1.0, math.pi, float(n) ** -2) for n in (2, 4, 8, 16)
        ] + [ErrorSweepRecord("GH", n, 16, 2.0, 1.0, None, 1.0 / n) for n in (2, 4, 8)]
        frame = run_fits(records)
        assert list(frame.columns) == FIT_COLUMNS
        assert len(frame) == 1
        assert frame.loc[0, "algebraic_slope"] == pytest.approx(-2.0)

    def test_summation(self, settings):
        config = ExperimentConfig.from_dict(
            {
                "psi0": {"q0": 0.0, "p0": 0.0},
                "basis": {"gamma_imag": 1.0},
                "box": {"L_q": 4.0, "M": 8, "samples_per_dim": 65},
            }
        )
        frame = run_summation(config, settings)
        assert list(frame.columns) == SUMMATION_COLUMNS
        assert len(frame) == 65
        assert frame["inv_dq"].iloc[0] == pytest.approx(1.0)
        center = frame.iloc[32]
        assert center["x"] == pytest.approx(0.0)
        assert center["S_direct"] == pytest.approx(center["S_expansion"], rel=1e-6)

    def test_summation_one_dimensional_only(self, settings):
        config = ExperimentConfig.from_dict({"psi0": {"q0": [0, 0], "p0": [0, 0]}})
        with pytest.raises(ConfigError):
            run_summation(config, settings)

    def test_semi_discrete_check(self, small_config, settings):
        frame = run_semi_discrete_check(small_config, settings)
        assert len(frame) == 2
        assert frame["sup_error"].max() <= 1e-9

    def test_overlap_check(self):
        frame = run_overlap_check(trials_1d=5, trials_2d=1, seed=3)
        assert len(frame) == 6
        assert list(frame["d"]) == [1] * 5 + [2]
        assert frame["rel_error"].astype(float).max(skipna=True) < 1e-6


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
