import json
import subprocess
import sys

import pytest

from fronsim.config import RunConfig, apply_overrides, load_config
from fronsim.errors import ConfigurationError


class TestConfig:
    def test_defaults_validate(self):
        RunConfig().validate()

    def test_ini_round_trip(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text(
            "[scenario]\n"
            "width = 24\n"
            "height = 18\n"
            "n_robots = 5\n"
            "p_occ = 0.2\n"
            "[assignment]\n"
            "lam0 = 0.4\n"
            "reassign_every = 7\n"
            "[gate]\n"
            "tau_high = 0.8\n"
            "dwell = 2\n"
            "[metrics]\n"
            "strict_contact = true\n"
        )
        config = load_config(str(path))
        assert config.scenario.width == 24
        assert config.scenario.n_robots == 5
        assert config.assignment.lam0 == 0.4
        assert config.assignment.reassign_every == 7
        assert config.gate.tau_high == 0.8
        assert config.metrics.strict_contact is True

    def test_overrides(self):
        config = RunConfig()
        apply_overrides(config, ["scenario.width=33", "gate.lr=0.1", "assignment.beta=0.9"])
        assert config.scenario.width == 33
        assert config.gate.lr == 0.1
        assert config.assignment.beta == 0.9

    def test_bad_overrides(self):
        config = RunConfig()
        with pytest.raises(ConfigurationError):
            apply_overrides(config, ["scenario.width"])
        with pytest.raises(ConfigurationError):
            apply_overrides(config, ["nosection.key=1"])
        with pytest.raises(ConfigurationError):
            apply_overrides(config, ["scenario.nokey=1"])

    def test_horizon_auto(self):
        config = RunConfig()
        assert config.scenario.effective_horizon() == 8 * 80
        apply_overrides(config, ["scenario.horizon=100"])
        assert config.scenario.effective_horizon() == 100

    def test_validation_errors(self):
        config = RunConfig()
        config.scenario.p_occ = 1.5
        with pytest.raises(ConfigurationError):
            config.validate()


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "fronsim.cli", *args],
        capture_output=True,
        text=True,
        timeout=300,
    )


class TestCli:
    def test_run_emits_metrics_and_log(self, tmp_path):
        log = tmp_path / "episode.jsonl"
        proc = run_cli(
            "run", "--width", "12", "--height", "12", "--robots", "2",
            "--obstacles", "3", "--seed", "4", "--variant", "full+cold-adaptive",
            "--log", str(log),
        )
        assert proc.returncode == 0, proc.stderr
        payload = json.loads(proc.stdout.strip().splitlines()[-1])
        assert "success" in payload and "planner_fraction" in payload
        assert log.exists()
        assert log.read_text().splitlines()[0].startswith('{"height":12')

    def test_generic_key_value_flags(self, tmp_path):
        proc = run_cli(
            "run", "--width", "10", "--height", "10", "--robots", "1",
            "--obstacles", "0", "--seed", "1", "--variant", "full+cold-adaptive",
            "--scenario.sense_radius=4", "--gate.dwell=2",
        )
        assert proc.returncode == 0, proc.stderr

    def test_config_error_exit_code(self):
        proc = run_cli("run", "--density", "1.5", "--variant", "full+cold-adaptive")
        assert proc.returncode == 2
        assert "config error" in proc.stderr

    def test_matrix_replay_and_plot_data(self, tmp_path):
        out = tmp_path / "matrix.csv"
        proc = run_cli(
            "matrix", "--width", "12", "--height", "12", "--robots", "2",
            "--obstacles", "3", "--variants", "full+cold-adaptive,base+cold-adaptive",
            "--seeds", "0:3", "--out", str(out), "--workers", "2",
        )
        assert proc.returncode == 0, proc.stderr
        lines = out.read_text().splitlines()
        assert lines[0] == "variant,seed,SR,EL,overlap,recoveries,planner_fraction,wall_time"
        assert len(lines) == 1 + 6 + 2  # header, six episodes, two aggregates

        log = tmp_path / "ep.jsonl"
        proc = run_cli(
            "run", "--width", "12", "--height", "12", "--robots", "2",
            "--obstacles", "3", "--seed", "0", "--variant", "full+cold-adaptive",
            "--log", str(log),
        )
        assert proc.returncode == 0, proc.stderr
        run_metrics = json.loads(proc.stdout.strip().splitlines()[-1])

        proc = run_cli("replay", "--log", str(log))
        assert proc.returncode == 0, proc.stderr
        replay_metrics = json.loads(proc.stdout.strip().splitlines()[-1])
        for key in ("success", "t_star", "overlap", "recoveries", "planner_fraction"):
            assert replay_metrics[key] == run_metrics[key]

        proc = run_cli("emit-plot-data", str(log))
        assert proc.returncode == 0, proc.stderr
        rows = proc.stdout.strip().splitlines()
        assert rows[0] == "variant,seed,t,newly_known,known_cells"
        assert len(rows) > 1
