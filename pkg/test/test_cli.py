"""
Tests for the gwpt command line.
"""

from argparse import Namespace

import pandas as pd
import pytest

from gwp_transform.bin.gwpt_sweep import main as sweep_main
from gwp_transform.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, build_parser, main, run_command
from gwp_transform.core.errors import ConfigError, NTooLargeError

SMALL_EXPERIMENT = """\
name: small
psi0:
  q0: [0.0]
  p0: [0.5]
  eps: 1.0
basis:
  gamma_imag: 2.0
box:
  L_q: 3.0
  M: [4]
  samples_per_dim: 64
rules:
  - rule: TcM
    N: "2:8:2"
    L_p: [pi]
  - rule: GH
    N: [2, 4, 6, 8]
"""


@pytest.fixture
def experiment(tmp_path):
    path = tmp_path / "small.yml"
    path.write_text(SMALL_EXPERIMENT)
    return path


class TestParser:
    """Test argument parsing."""

    def test_commands(self):
        parser = build_parser()
        args = parser.parse_args(["sweep", "--preset", "example1", "--jobs", "2"])
        assert args.command == "sweep"
        assert args.jobs == 2
        args = parser.parse_args(["overlap-check"])
        assert args.trials_1d == 200 and args.trials_2d == 50 and args.tol == 1e-6

    def test_unknown_preset(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["sweep", "--preset", "example9"])

    def test_config_and_preset_exclusive(self, experiment):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["sweep", "--config", str(experiment), "--preset", "example1"])

    def test_no_command(self, capsys):
        assert main([]) == EXIT_OK
        assert "commands" in capsys.readouterr().out


class TestCommands:
    """Test command execution and exit codes."""

    def test_sweep_and_fit(self, experiment, tmp_path):
        sweep_out = tmp_path / "sweep.csv"
        assert main(["sweep", "--config", str(experiment), "--out", str(sweep_out)]) == EXIT_OK
        frame = pd.read_csv(sweep_out)
        assert len(frame) == 8
        assert list(frame["rule"].unique()) == ["TcM", "GH"]

        fit_out = tmp_path / "fit.csv"
        assert main(["fit", str(sweep_out), "--out", str(fit_out)]) == EXIT_OK
        fits = pd.read_csv(fit_out)
        assert list(fits["rule"]) == ["TcM", "GH"]

    def test_sweep_timings(self, experiment, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["sweep", "--config", str(experiment), "--out", str(out), "--timings"]) == EXIT_OK
        assert pd.read_csv(out)["wall_time_s"].notna().all()

    @pytest.mark.slow
    def test_preset_sweep_byte_identical(self, tmp_path):
        first, second = tmp_path / "first.csv", tmp_path / "second.csv"
        for out, jobs in ((first, "1"), (second, "2")):
            args = ["sweep", "--preset", "example1", "--samples", "65", "--jobs", jobs]
            assert main(args + ["--out", str(out)]) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()
        assert len(pd.read_csv(first)) > 0

    def test_summation_preset(self, tmp_path):
        out = tmp_path / "summation.csv"
        assert main(["summation", "--preset", "example1", "--samples", "64", "--out", str(out)]) == EXIT_OK
        frame = pd.read_csv(out)
        assert len(frame) == 4 * 64
        assert sorted(frame["M"].unique()) == [16, 64]

    def test_output_dir_setting(self, experiment, tmp_path, monkeypatch):
        monkeypatch.setenv("GWPT_OUTPUT_DIR", str(tmp_path / "results"))
        assert main(["summation", "--config", str(experiment)]) == EXIT_OK
        assert (tmp_path / "results" / "small-summation.csv").exists()

    def test_semi_discrete_check(self, experiment, tmp_path):
        out = tmp_path / "semi.csv"
        assert main(["semi-discrete-check", "--config", str(experiment), "--out", str(out)]) == EXIT_OK
        assert pd.read_csv(out)["sup_error"].max() <= 1e-9

    def test_overlap_check_tolerance(self, tmp_path):
        out = tmp_path / "overlap.csv"
        args = ["overlap-check", "--trials-1d", "3", "--trials-2d", "0", "--out", str(out)]
        assert main(args) == EXIT_OK
        assert main(args + ["--tol", "0"]) == EXIT_NUMERIC
        assert len(pd.read_csv(out)) == 3

    def test_missing_source(self):
        assert main(["sweep"]) == EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        assert main(["sweep", "--config", str(tmp_path / "missing.yml")]) == EXIT_CONFIG

    def test_invalid_experiment(self, tmp_path):
        path = tmp_path / "bad.yml"
        path.write_text("rules:\n  - rule: TcM\n    N: [2, 4]\n")
        assert main(["sweep", "--config", str(path)]) == EXIT_CONFIG

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "bad.yml"
        path.write_text("box: {L_q: 1\n")
        assert main(["sweep", "--config", str(path)]) == EXIT_CONFIG

    def test_invalid_environment(self, experiment, monkeypatch):
        monkeypatch.setenv("GWPT_SAMPLES_PER_DIM_2D", "0")
        assert main(["sweep", "--config", str(experiment)]) == EXIT_CONFIG

    def test_gh_limit_is_config_error(self, tmp_path):
        path = tmp_path / "big.yml"
        path.write_text("rules:\n  - rule: GH\n    N: [8, 600]\n")
        assert main(["sweep", "--config", str(path)]) == EXIT_CONFIG

    def test_computation_errors_are_numeric(self):
        def too_large(args):
            raise NTooLargeError("N=600 exceeds 512")

        def bad_config(args):
            raise ConfigError("broken", "box.M")

        assert run_command(too_large, Namespace()) == EXIT_NUMERIC
        assert run_command(bad_config, Namespace()) == EXIT_CONFIG

    def test_missing_fit_input(self, tmp_path):
        assert main(["fit", str(tmp_path / "none.csv")]) == EXIT_CONFIG


class TestSweepScript:
    """Test the gwpt-sweep entry point."""

    def test_sweep(self, experiment, tmp_path):
        out = tmp_path / "sweep.csv"
        assert sweep_main(["--config", str(experiment), "--out", str(out), "--jobs", "1"]) == EXIT_OK
        assert len(pd.read_csv(out)) == 8


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
