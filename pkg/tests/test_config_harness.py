import io
import os

import numpy as np
import pytest

from conftest import make_cfg
from ringadmm.cli import main
from ringadmm.config import ConfigError, ExperimentConfig, parse_kv_text
from ringadmm.harness import parse_sweep_spec, run_attack, run_experiment, run_sweep
from ringadmm.records import Transcript
from ringadmm.solver import GammaSpec, InitSpec, Variant


BASE_CONFIG = """\
# small deterministic experiment
problem = ridge
p = 2
b = 30
network.n_agents = 6
network.eta = 0.5
solver.variant = iadmm
solver.x_update = exact_prox
solver.rho = 10.0
solver.max_iters = 300
solver.stop_eps = 0.0
seeds.graph = 1
seeds.data = 2
seeds.solver = 3
"""


class TestConfigFormat:
    def test_parse_basic(self):
        kv = parse_kv_text("a = 1\n# comment\nb.c = two words\n")
        assert kv == {"a": "1", "b.c": "two words"}

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_kv_text("a = 1\na = 2\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_kv_text("just some words\n")

    def test_roundtrip_identity(self):
        cfg = ExperimentConfig.from_text(BASE_CONFIG)
        text = cfg.to_text()
        again = ExperimentConfig.from_text(text)
        assert again.to_text() == text
        assert again == cfg

    def test_roundtrip_with_all_specs(self):
        cfg = make_cfg(
            variant=Variant.PIADMM1,
            gamma=GammaSpec.uniform(0.9, 1.1),
            init=InitSpec.uniform(0, 100),
            sigma=1e-3,
        )
        again = ExperimentConfig.from_text(cfg.to_text())
        assert again == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            ExperimentConfig.from_text(BASE_CONFIG + "solver.typo = 1\n")

    def test_field_level_messages(self):
        bad = BASE_CONFIG.replace("network.eta = 0.5", "network.eta = 7")
        with pytest.raises(ConfigError, match="network.eta"):
            ExperimentConfig.from_text(bad)

    def test_logistic_requires_first_order(self):
        bad = BASE_CONFIG.replace("problem = ridge", "problem = logistic")
        with pytest.raises(ConfigError, match="first_order"):
            ExperimentConfig.from_text(bad)

    def test_gamma_spec_grammar(self):
        cfg = ExperimentConfig.from_text(
            BASE_CONFIG + "solver.gamma = uniform:0.9,1.1\n"
        )
        assert cfg.gamma == GammaSpec.uniform(0.9, 1.1)
        with pytest.raises(ConfigError, match="gamma"):
            ExperimentConfig.from_text(BASE_CONFIG + "solver.gamma = uniform:-1,2\n")


class TestHarness:
    def test_run_experiment_writes_outputs(self, tmp_path):
        cfg = ExperimentConfig.from_text(BASE_CONFIG)
        result, summary = run_experiment(cfg, out_dir=str(tmp_path))
        assert (tmp_path / "run_trace.csv").exists()
        assert (tmp_path / "transcript.csv").exists()
        assert "accuracy=" in summary.line()
        first = (tmp_path / "run_trace.csv").read_text().splitlines()[0]
        assert first == "#schema=1"

    def test_bit_reproducible_outputs(self, tmp_path):
        cfg = ExperimentConfig.from_text(BASE_CONFIG)
        run_experiment(cfg, out_dir=str(tmp_path / "a"))
        run_experiment(cfg, out_dir=str(tmp_path / "b"))
        for name in ("run_trace.csv", "transcript.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_transcript_csv_roundtrip(self, tmp_path):
        cfg = ExperimentConfig.from_text(BASE_CONFIG)
        result, _ = run_experiment(cfg, out_dir=str(tmp_path))
        with open(tmp_path / "transcript.csv") as fh:
            transcript = Transcript.read_csv(fh)
        assert transcript.n_agents == 6
        assert transcript.rho == 10.0
        assert np.array_equal(transcript.senders, result.transcript.senders)
        assert np.array_equal(transcript.z_values, result.transcript.z_values)

    def test_attack_scored_when_transcript_matches(self, tmp_path):
        cfg = ExperimentConfig.from_text(BASE_CONFIG + "attack.kind = exact\n")
        result, _ = run_experiment(cfg)
        reports = run_attack(cfg, result.transcript, out_dir=str(tmp_path))
        rep = reports[1]
        assert rep.err_x[1].max() <= 1e-9
        assert (tmp_path / "attack_agent1.csv").exists()

    def test_attack_unscored_on_mismatch(self):
        cfg = ExperimentConfig.from_text(BASE_CONFIG + "attack.kind = exact\n")
        result, _ = run_experiment(cfg)
        other = ExperimentConfig.from_text(BASE_CONFIG.replace(
            "seeds.data = 2", "seeds.data = 99"
        ) + "attack.kind = exact\n")
        reports = run_attack(other, result.transcript)
        assert 1 not in reports[1].err_x

    def test_attack_rejects_wrong_network(self):
        cfg = ExperimentConfig.from_text(BASE_CONFIG)
        result, _ = run_experiment(cfg)
        bad = ExperimentConfig.from_text(
            BASE_CONFIG.replace("network.n_agents = 6", "network.n_agents = 8")
        )
        with pytest.raises(ConfigError, match="agents"):
            run_attack(bad, result.transcript)

    def test_sweep_long_format_and_failures(self, tmp_path):
        sweep_spec = "network.eta = 0.5, 2.0\nseed = 1, 2\n"
        out = tmp_path / "sweep.csv"
        failures = run_sweep(BASE_CONFIG, sweep_spec, str(out))
        text = out.read_text().splitlines()
        assert text[0] == "#schema=1"
        assert failures == 2  # eta = 2.0 is invalid for both seeds
        ok_rows = [ln for ln in text[2:] if ln.endswith(",ok")]
        err_rows = [ln for ln in text[2:] if "error:ConfigError" in ln]
        assert ok_rows and len(err_rows) == 2

    def test_sweep_spec_parsing(self):
        grid, seeds = parse_sweep_spec("solver.rho = 1, 10\nseed = 3, 4, 5\n")
        assert grid == {"solver.rho": ["1", "10"]}
        assert seeds == [3, 4, 5]
        _, no_seeds = parse_sweep_spec("solver.rho = 1\n")
        assert no_seeds is None

    def test_sweep_without_seed_key_keeps_base_seeds(self, tmp_path):
        out = tmp_path / "sweep.csv"
        run_sweep(BASE_CONFIG, "solver.rho = 10.0\n", str(out))
        sweep_rows = [ln for ln in out.read_text().splitlines()[2:] if ln]
        cfg = ExperimentConfig.from_text(BASE_CONFIG)
        result, _ = run_experiment(cfg)
        last = sweep_rows[-1].split(",")
        assert last[2] == ""  # no sweep seed applied
        assert float(last[5]) == result.trace.final.accuracy

    def test_sweep_reproducible(self, tmp_path):
        spec = "solver.rho = 5, 10\n"
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_sweep(BASE_CONFIG, spec, str(a))
        run_sweep(BASE_CONFIG, spec, str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_logistic_first_order_run_converges(self):
        text = BASE_CONFIG.replace("problem = ridge", "problem = logistic")
        text = text.replace("solver.x_update = exact_prox",
                            "solver.x_update = first_order")
        text = text.replace("solver.rho = 10.0", "solver.rho = 1.0")
        text = text.replace("network.n_agents = 6", "network.n_agents = 10")
        text = text.replace("solver.max_iters = 300", "solver.max_iters = 2000")
        cfg = ExperimentConfig.from_text(text)
        result, summary = run_experiment(cfg)
        assert not result.trace.diverged
        assert result.trace.final.accuracy < 0.05  # well below the start at 1.0


class TestCli:
    def write(self, tmp_path, text, name="exp.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)

    def test_run_ok(self, tmp_path, capsys):
        cfg = self.write(tmp_path, BASE_CONFIG)
        code = main(["run", "--config", cfg, "--out", str(tmp_path / "out"),
                     "--gnuplot"])
        assert code == 0
        assert "accuracy=" in capsys.readouterr().out
        assert (tmp_path / "out" / "run_trace.csv").exists()
        assert (tmp_path / "out" / "graph.txt").read_text().splitlines()[0] == "6"
        assert "run_trace.csv" in (tmp_path / "out" / "plot_trace.gp").read_text()

    def test_run_validation_error_exit_1(self, tmp_path, capsys):
        cfg = self.write(tmp_path, BASE_CONFIG + "network.eta = -1\n")
        assert main(["run", "--config", cfg]) == 1

    def test_run_missing_config_exit_1(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 1

    def test_run_divergence_exit_2(self, tmp_path):
        text = BASE_CONFIG.replace("solver.rho = 10.0", "solver.rho = 0.01")
        text = text.replace("solver.x_update = exact_prox",
                            "solver.x_update = first_order")
        text = text.replace("solver.max_iters = 300", "solver.max_iters = 5000")
        cfg = self.write(tmp_path, text)
        assert main(["run", "--config", cfg, "--quiet"]) == 2

    def test_seed_override_changes_run(self, tmp_path):
        cfg = self.write(tmp_path, BASE_CONFIG)
        main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--quiet"])
        main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--quiet",
              "--seed-override", "77"])
        assert (tmp_path / "a" / "transcript.csv").read_bytes() != (
            tmp_path / "b" / "transcript.csv"
        ).read_bytes()

    def test_attack_end_to_end(self, tmp_path, capsys):
        cfg = self.write(tmp_path, BASE_CONFIG + "attack.kind = exact\n")
        out = str(tmp_path / "out")
        assert main(["run", "--config", cfg, "--out", out, "--quiet"]) == 0
        code = main(["attack", "--config", cfg, "--out", out,
                     "--transcript", os.path.join(out, "transcript.csv")])
        assert code == 0
        assert "max_err_x" in capsys.readouterr().out
        assert os.path.exists(os.path.join(out, "attack_agent1.csv"))

    def test_sweep_cli(self, tmp_path):
        cfg = self.write(tmp_path, BASE_CONFIG)
        spec = self.write(tmp_path, "solver.rho = 5, 10\n", name="sweep.cfg")
        code = main(["sweep", "--config", cfg, "--sweep", spec,
                     "--out", str(tmp_path), "--quiet"])
        assert code == 0
        assert (tmp_path / "sweep.csv").exists()

    def test_verify_cli_passes(self, capsys):
        assert main(["verify", "--quiet"]) == 0

    def test_verify_cli_exit_3_on_failure(self, monkeypatch):
        from ringadmm import verify

        monkeypatch.setattr(
            verify, "ALL_CHECKS",
            [("always_fails", lambda: (False, "forced"))],
        )
        assert main(["verify", "--quiet"]) == 3
