"""Experiment runner, summaries, serialization, snapshots, and the CLI."""

import math
import os
from dataclasses import replace

import numpy as np
import pytest
import yaml

from optbandits.cli import main as cli_main
from optbandits.harness import (
    ExperimentConfig,
    default_config,
    emit_plots,
    run_experiment,
    summarize,
    theory_bound,
    write_outputs,
)
from optbandits.optimism import SolverConfig


def tiny_bandit_cfg(**over):
    base = dict(kind="bandit", A=3, horizon=25, seeds=(0, 1), agents=("ts", "vbos"),
                audit_mc_samples=2000)
    base.update(over)
    return ExperimentConfig(**base)


class TestTheoryBound:
    def test_frozen_values(self):
        assert theory_bound("bandit", 10, 1, 10.0, 1000) == pytest.approx(
            603.4613396801694, abs=1e-9)
        assert theory_bound("game_bestresponse", 7, 5, 10.0, 200) == pytest.approx(
            414.22630963945323, abs=1e-9)
        assert theory_bound("constrained", 50, 25, 10.0, 2000) == pytest.approx(
            57563.83605929738, abs=1e-6)
        assert theory_bound("counterexample", 2, 2, 10.0, 100) == pytest.approx(
            39.42186150336541 * math.sqrt(2.0), abs=1e-9)

    def test_monotone_in_horizon(self):
        vals = [theory_bound("bandit", 10, 1, 10.0, t) for t in (10, 100, 1000)]
        assert vals[0] < vals[1] < vals[2]


class TestSummaries:
    def test_stderr_matches_hand_rolled_oracle(self):
        cfg = tiny_bandit_cfg(agents=("ts",), seeds=(0, 1, 2), horizon=3)
        # three synthetic series
        from optbandits.environments import Transcript

        series = [np.array([1.0, 2.0, 3.0]), np.array([2.0, 2.0, 2.0]),
                  np.array([0.0, 1.0, 4.0])]
        transcripts = {}
        for seed, cum in zip(cfg.seeds, series):
            regret = np.diff(np.concatenate([[0.0], cum]))
            transcripts[("ts", seed)] = Transcript(
                agent="ts", seed=seed, t=np.arange(1, 4),
                action=np.zeros(3, dtype=int), reward=np.zeros(3),
                regret=regret, cum_regret=cum)
        rows = summarize(cfg, transcripts)
        for k, row in enumerate(rows):
            vals = [s[k] for s in series]
            mean = sum(vals) / 3.0
            sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / 2.0)
            assert row.mean_cumulative_regret == pytest.approx(mean, abs=1e-12)
            assert row.stderr == pytest.approx(sd / math.sqrt(3.0), abs=1e-12)
            assert row.seed == 3

    def test_summary_covers_grid(self):
        cfg = tiny_bandit_cfg()
        res = run_experiment(cfg)
        assert len(res.summaries) == len(cfg.agents) * cfg.horizon


class TestReproducibility:
    def test_identical_config_gives_identical_bytes(self, tmp_path):
        cfg = tiny_bandit_cfg()
        out1, out2 = tmp_path / "a", tmp_path / "b"
        write_outputs(run_experiment(cfg), str(out1))
        write_outputs(run_experiment(cfg), str(out2))
        files1 = sorted(os.listdir(out1))
        assert files1 == sorted(os.listdir(out2))
        assert files1
        for name in files1:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_seed_changes_output(self):
        a = run_experiment(tiny_bandit_cfg(seeds=(0,)))
        b = run_experiment(tiny_bandit_cfg(seeds=(1,)))
        assert not np.array_equal(a.transcripts[("ts", 0)].reward,
                                  b.transcripts[("ts", 1)].reward)

    def test_transcript_prefix_sums(self):
        res = run_experiment(tiny_bandit_cfg())
        for tr in res.transcripts.values():
            np.testing.assert_allclose(tr.cum_regret, np.cumsum(tr.regret), atol=1e-12)


class TestOutputs:
    def test_written_files_and_schema(self, tmp_path):
        cfg = tiny_bandit_cfg()
        res = run_experiment(cfg)
        write_outputs(res, str(tmp_path))
        names = sorted(os.listdir(tmp_path))
        assert f"{cfg.name}__summary.csv" in names
        assert f"{cfg.name}__ts__transcript.csv" in names
        assert f"{cfg.name}__config.yaml" in names
        header = (tmp_path / f"{cfg.name}__ts__transcript.csv").read_text().splitlines()[0]
        assert header == "seed,t,action,reward,regret,cum_regret,solver_flag"
        sheader = (tmp_path / f"{cfg.name}__summary.csv").read_text().splitlines()[0]
        assert sheader == ("experiment,agent,seed,t,mean_cumulative_regret,stderr,"
                           "constraint_violation,theory_bound")
        # config round-trips
        loaded = ExperimentConfig.from_yaml(str(tmp_path / f"{cfg.name}__config.yaml"))
        assert loaded == cfg

    def test_membership_audit_file(self, tmp_path):
        cfg = tiny_bandit_cfg(audit_schedule="dyadic")
        res = run_experiment(cfg)
        write_outputs(res, str(tmp_path))
        audit = (tmp_path / f"{cfg.name}__membership.csv").read_text().splitlines()
        assert audit[0] == "experiment,agent,seed,t,member,margin,std_error"
        assert len(audit) > 1

    def test_emit_plots(self, tmp_path):
        cfg = tiny_bandit_cfg()
        write_outputs(run_experiment(cfg), str(tmp_path))
        written = emit_plots(str(tmp_path), svg=True)
        assert any(p.endswith("__regret_plot.csv") for p in written)
        assert any(p.endswith("__regret.svg") for p in written)
        plot = [p for p in written if p.endswith("__regret_plot.csv")][0]
        header = open(plot).read().splitlines()[0].split(",")
        assert header[0] == "t"
        assert "ts_mean" in header and "vbos_mean" in header

    def test_emit_plots_requires_summaries(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            emit_plots(str(tmp_path))


class TestSnapshots:
    def test_bandit_snapshot_structure(self, tmp_path):
        cfg = ExperimentConfig(kind="simplex_snapshot", A=3, m=1, horizon=8,
                               seeds=(0,), snapshot_times=(1, 8), grid_spacing=0.1,
                               audit_mc_samples=20000)
        res = run_experiment(cfg)
        assert len(res.snapshots) == 2
        snap = res.snapshots[0]
        assert snap.grid.shape[1] == 3
        assert snap.g_values.shape[0] == snap.grid.shape[0]
        # the vbos point attains the max over the grid (up to grid resolution)
        assert snap.g_values.max() <= snap.g_values.max() + 1e-9
        assert snap.member.any()
        write_outputs(res, str(tmp_path))
        names = os.listdir(tmp_path)
        assert any("snapshot_t1" in n for n in names)
        lines = (tmp_path / [n for n in names if "snapshot_t8" in n][0]).read_text().splitlines()
        assert lines[0] == "kind,p1,p2,p3,g_value,member"
        assert lines[-1].startswith("vbos,")
        assert lines[-2].startswith("ts,")

    def test_game_snapshot_runs(self):
        cfg = ExperimentConfig(kind="simplex_snapshot", A=3, m=3, horizon=4,
                               seeds=(0,), snapshot_times=(2,), grid_spacing=0.2,
                               snapshot_follow="saddle_vbos", audit_value_samples=100,
                               solver=SolverConfig(tolerance=1e-6))
        res = run_experiment(cfg)
        snap = res.snapshots[0]
        assert snap.member.any()
        assert snap.vbos_point.shape == (3,)


class TestConfig:
    def test_defaults_fill_agents(self):
        cfg = ExperimentConfig(kind="constrained")
        assert cfg.agents == ("saddle_ts", "saddle_vbos", "saddle_klearning")

    def test_yaml_round_trip(self, tmp_path):
        cfg = default_config("counterexample")
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump(cfg.to_dict()))
        assert ExperimentConfig.from_yaml(str(path)) == cfg

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(kind="bogus")
        with pytest.raises(ValueError):
            ExperimentConfig(kind="bandit", horizon=0)
        with pytest.raises(ValueError):
            ExperimentConfig(kind="bandit", seeds=())


class TestCli:
    def test_run_and_plot(self, tmp_path):
        cfg = tiny_bandit_cfg()
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(yaml.safe_dump(cfg.to_dict()))
        out = tmp_path / "results"
        assert cli_main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert (out / "bandit__summary.csv").exists()
        assert cli_main(["plot", "--out", str(out)]) == 0
        assert (out / "bandit__regret_plot.csv").exists()

    def test_seed_offset(self, tmp_path):
        cfg = tiny_bandit_cfg(seeds=(0,))
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(yaml.safe_dump(cfg.to_dict()))
        out = tmp_path / "r"
        assert cli_main(["run", "--config", str(cfg_path), "--out", str(out),
                         "--seed-offset", "5"]) == 0
        text = (out / "bandit__ts__transcript.csv").read_text()
        assert text.splitlines()[1].startswith("5,")

    def test_requires_exactly_one_source(self, tmp_path):
        assert cli_main(["run", "--out", str(tmp_path)]) == 2

    def test_verify_single_check(self, capsys):
        assert cli_main(["verify", "--check", "perspective_identity"]) == 0
        out = capsys.readouterr().out
        assert "[PASS] perspective_identity" in out

    def test_threads_env_round_trip(self, tmp_path, monkeypatch):
        monkeypatch.setenv("OPTBANDITS_THREADS", "2")
        cfg = tiny_bandit_cfg()
        res_par = run_experiment(cfg)
        monkeypatch.setenv("OPTBANDITS_THREADS", "1")
        res_ser = run_experiment(cfg)
        for key in res_ser.transcripts:
            np.testing.assert_array_equal(res_par.transcripts[key].reward,
                                          res_ser.transcripts[key].reward)
