"""CLI surface: subcommands, exit codes, file outputs, manifest replay."""

from dataclasses import replace

import pytest

from aoi_uav import cli
from aoi_uav.config import TrainConfig, tiny_scenario
from aoi_uav.config_io import dump_config


@pytest.fixture()
def mini_cfg(tmp_path):
    scen = replace(tiny_scenario(), horizon=12)
    tconf = TrainConfig(episodes=2, episodes_per_update=2, epochs=2,
                        hidden_size=8, head_hidden=8,
                        critic_hidden1=8, critic_hidden2=8, eval_interval=10)
    path = tmp_path / "mini.cfg"
    path.write_text(dump_config(scen, tconf))
    return path


def read_metrics_rows(path, drop_wall_ms=True):
    lines = path.read_text().strip().split("\n")
    if drop_wall_ms:
        lines = [line.rsplit(",", 1)[0] for line in lines]
    return lines


class TestTrain:
    def test_outputs_and_layout(self, mini_cfg, tmp_path):
        out = tmp_path / "run"
        code = cli.main(["train", "--config", str(mini_cfg), "--seed", "3",
                         "--out", str(out)])
        assert code == 0
        assert (out / "manifest.txt").is_file()
        assert (out / "metrics.csv").is_file()
        assert (out / "checkpoints" / "ep_2.ckpt").is_file()
        rows = read_metrics_rows(out / "metrics.csv", drop_wall_ms=False)
        assert rows[0] == ("episode,cum_reward,aoi_reward,energy_reward,"
                           "peak_aoi,collections,collisions,clips,wall_ms")
        assert len(rows) == 3  # header + 2 episodes

    def test_same_seed_same_metrics(self, mini_cfg, tmp_path):
        cli.main(["train", "--config", str(mini_cfg), "--seed", "7",
                  "--out", str(tmp_path / "a")])
        cli.main(["train", "--config", str(mini_cfg), "--seed", "7",
                  "--out", str(tmp_path / "b")])
        # Identical apart from the wall-clock column.
        rows_a = read_metrics_rows(tmp_path / "a" / "metrics.csv")
        rows_b = read_metrics_rows(tmp_path / "b" / "metrics.csv")
        assert rows_a == rows_b

    def test_manifest_replay_reproduces_run(self, mini_cfg, tmp_path):
        out_a = tmp_path / "a"
        cli.main(["train", "--config", str(mini_cfg), "--seed", "5",
                  "--out", str(out_a)])
        out_b = tmp_path / "b"
        code = cli.main(["train", "--config", str(out_a / "manifest.txt"),
                         "--out", str(out_b)])
        assert code == 0
        assert (read_metrics_rows(out_a / "metrics.csv")
                == read_metrics_rows(out_b / "metrics.csv"))

    def test_missing_config_exit_2_names_path(self, tmp_path, capsys):
        code = cli.main(["train", "--config", str(tmp_path / "gone.cfg"),
                         "--out", str(tmp_path / "x")])
        assert code == 2
        assert "gone.cfg" in capsys.readouterr().err

    def test_bad_key_exit_2_names_key(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[scenario]\nwarp_speed = 3\n")
        code = cli.main(["train", "--config", str(bad),
                         "--out", str(tmp_path / "x")])
        assert code == 2
        assert "warp_speed" in capsys.readouterr().err

    def test_events_flag_writes_event_logs(self, mini_cfg, tmp_path):
        out = tmp_path / "run"
        cli.main(["train", "--config", str(mini_cfg), "--seed", "1",
                  "--out", str(out), "--events"])
        ep0 = out / "events" / "ep_0.csv"
        assert ep0.is_file()
        assert ep0.read_text().startswith("slot,entity_kind,entity_id,event,value")


class TestEval:
    def test_random_policy_deterministic_output(self, mini_cfg, capsys):
        args = ["eval", "--config", str(mini_cfg), "--policy", "random",
                "--episodes", "3", "--seed", "1"]
        assert cli.main(args) == 0
        first = capsys.readouterr().out
        assert cli.main(args) == 0
        second = capsys.readouterr().out
        assert first == second
        assert "mean peak AoI" in first

    def test_learned_policy_from_checkpoint(self, mini_cfg, tmp_path, capsys):
        out = tmp_path / "run"
        cli.main(["train", "--config", str(mini_cfg), "--seed", "2",
                  "--out", str(out)])
        code = cli.main(["eval", "--config", str(mini_cfg),
                         "--checkpoint", str(out / "checkpoints" / "ep_2.ckpt"),
                         "--episodes", "2", "--policy", "learned", "--seed", "1"])
        assert code == 0
        assert "policy             : learned" in capsys.readouterr().out

    def test_corrupted_checkpoint_exit_4(self, mini_cfg, tmp_path, capsys):
        out = tmp_path / "run"
        cli.main(["train", "--config", str(mini_cfg), "--seed", "2",
                  "--out", str(out)])
        ckpt = out / "checkpoints" / "ep_2.ckpt"
        blob = bytearray(ckpt.read_bytes())
        blob[len(blob) // 2] ^= 0xFF
        ckpt.write_bytes(bytes(blob))
        code = cli.main(["eval", "--config", str(mini_cfg),
                         "--checkpoint", str(ckpt), "--policy", "learned"])
        assert code == 4
        assert "CRC" in capsys.readouterr().err

    def test_learned_without_checkpoint_exit_2(self, mini_cfg):
        assert cli.main(["eval", "--config", str(mini_cfg),
                         "--policy", "learned"]) == 2


class TestSweep:
    def test_sweep_csv_sorted_with_header(self, mini_cfg, tmp_path):
        out = tmp_path / "sw"
        code = cli.main(["sweep", "--param", "eta_le",
                         "--values", "0.25,0.05,0.15",
                         "--config", str(mini_cfg), "--episodes", "2",
                         "--seed", "3", "--out", str(out)])
        assert code == 0
        lines = (out / "sweep.csv").read_text().strip().split("\n")
        assert lines[0] == "param_value,mean_peak_aoi,std_peak_aoi"
        assert len(lines) == 4
        values = [float(line.split(",")[0]) for line in lines[1:]]
        assert values == sorted(values) == [0.05, 0.15, 0.25]

    def test_unknown_param_exit_2(self, mini_cfg, tmp_path):
        assert cli.main(["sweep", "--param", "mass", "--values", "1,2",
                         "--config", str(mini_cfg),
                         "--out", str(tmp_path)]) == 2


class TestDivergenceExit:
    def test_non_finite_loss_exit_3(self, mini_cfg, tmp_path, monkeypatch, capsys):
        from aoi_uav import trainer as trainer_mod

        def explode(*args, **kwargs):
            raise trainer_mod.TrainingDiverged("non-finite loss (surrogate=nan)")

        monkeypatch.setattr(trainer_mod, "train", explode)
        code = cli.main(["train", "--config", str(mini_cfg),
                         "--out", str(tmp_path / "x")])
        assert code == 3
        assert "non-finite" in capsys.readouterr().err


class TestSweepTrainMode:
    def test_train_mode_produces_rows(self, mini_cfg, tmp_path):
        out = tmp_path / "sw"
        code = cli.main(["sweep", "--param", "n_iots", "--values", "4,6",
                         "--config", str(mini_cfg), "--mode", "train",
                         "--episodes", "2", "--seed", "2", "--out", str(out)])
        assert code == 0
        lines = (out / "sweep.csv").read_text().strip().split("\n")
        assert len(lines) == 3


class TestOracleAndGradcheck:
    def test_bundled_instance_by_name(self, capsys):
        assert cli.main(["oracle", "--instance", "two_iot_symmetric"]) == 0
        out = capsys.readouterr().out
        assert "optimum  : 3" in out
        assert "witness" in out

    def test_oversized_instance_exit_5(self, tmp_path, capsys):
        inst = tmp_path / "big.txt"
        inst.write_text("CFG horizon 8\nUAV 0 0\nUAV 5 0\nUAV 10 0\n"
                        "IOT 0 10\nLBD 0 0 0\n")
        assert cli.main(["oracle", "--instance", str(inst)]) == 5
        assert "guard" in capsys.readouterr().err

    def test_gradcheck_passes(self, capsys):
        assert cli.main(["gradcheck", "--trials", "4"]) == 0
        assert "4/4 passed" in capsys.readouterr().out

    def test_gradcheck_detects_broken_derivative(self, monkeypatch, capsys):
        # Negative control: corrupt the tanh derivative and expect a failure.
        import numpy as np
        from aoi_uav import tensor as tt
        from aoi_uav.tensor import Tensor, _record

        def broken_tanh(a):
            a = a if isinstance(a, Tensor) else Tensor(a)
            out_data = np.tanh(a.data)
            out = Tensor(out_data)

            def backward(g):
                if a.requires_grad:
                    a.accumulate_grad(g * (1.0 - 0.5 * out_data * out_data))

            return _record(out, (a,), backward)

        monkeypatch.setattr(tt, "tanh", broken_tanh)
        assert cli.main(["gradcheck", "--trials", "2"]) != 0


class TestWorkerEnv:
    def test_threads_env_parsed(self, monkeypatch):
        monkeypatch.setenv("AOIUAV_THREADS", "3")
        assert cli._rollout_workers() == 3
        monkeypatch.setenv("AOIUAV_THREADS", "junk")
        assert cli._rollout_workers() == 1
        monkeypatch.delenv("AOIUAV_THREADS")
        assert cli._rollout_workers() == 1

    def test_eval_out_writes_csv(self, mini_cfg, tmp_path):
        out = tmp_path / "evalout"
        cli.main(["eval", "--config", str(mini_cfg), "--policy", "greedy",
                  "--episodes", "2", "--seed", "1", "--out", str(out)])
        lines = (out / "eval.csv").read_text().strip().split("\n")
        assert lines[0].startswith("policy,episodes,mean_peak_aoi")
        assert lines[1].startswith("greedy,2,")


class TestPresets:
    @pytest.mark.parametrize("name", ["tiny", "canonical", "canonical_ring"])
    def test_bundled_presets_parse(self, name):
        from aoi_uav.cli import _resolve_input
        from aoi_uav.config_io import load_config
        scenario, tconf, _ = load_config(_resolve_input(name, "presets"))
        scenario.validate()
        tconf.validate()
