import json
from pathlib import Path

import pytest

from app.cli import parse_and_dispatch
from app.config.run_config import load_run_config
from app.core.errors import ConfigError

TINY_TOML = """
seed = 2

[world]
building = "custom"
samples_per_rp = 4
ap_margin_m = 5.0

[world.custom]
grid_x = 4
grid_y = 2
n_aps = 10

[[devices]]
acronym = "BLU"

[[devices]]
acronym = "HTC"
intro_time_index = 1

[model]
encoder_hidden = 8
latent_dim = 6
expert_hidden = 6
r_max = 2

[train]
batch_size = 8
epochs = 2

[scenario]
tracks = ["cdil"]
n_rp = 4
naive_baseline = false
latency_calls = 2
"""


@pytest.fixture
def tiny_toml(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(TINY_TOML, encoding="utf-8")
    return path


class TestParsing:
    def test_help(self):
        assert parse_and_dispatch(["--help"]) == 0

    def test_unknown_command(self):
        assert parse_and_dispatch(["frobnicate"]) == 2

    def test_no_command(self):
        assert parse_and_dispatch([]) == 2

    def test_missing_config_file(self, tmp_path):
        assert parse_and_dispatch(["run", "--config", str(tmp_path / "absent.toml")]) == 2

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[train]\nbatch_sise = 4\n", encoding="utf-8")
        assert parse_and_dispatch(["check", "--config", str(path)]) == 2


class TestConfig:
    def test_file_values(self, tiny_toml):
        config = load_run_config(tiny_toml)
        assert config.seed == 2
        assert config.world.custom.grid_x == 4
        assert [d.acronym for d in config.devices] == ["BLU", "HTC"]
        assert config.train.epochs == 2

    def test_overrides_win(self, tiny_toml):
        config = load_run_config(tiny_toml, {"seed": 9, "scenario": {"n_rp": 2}, "output_dir": None})
        assert config.seed == 9
        assert config.scenario.n_rp == 2
        assert config.scenario.tracks == ["cdil"]

    def test_malformed_toml(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[train\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_run_config(path)

    def test_invalid_value_names_the_key(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[train]\nreplay_fraction = 1.5\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="train.replay_fraction"):
            load_run_config(path)

    def test_example_config_is_valid(self):
        config = load_run_config(Path(__file__).resolve().parent.parent / "run.example.toml")
        assert config.scenario.n_rp == 10
        assert len(config.devices) == 3


class TestCommands:
    def test_gen_data(self, tiny_toml, tmp_path, capsys):
        out = tmp_path / "data"
        assert parse_and_dispatch(["gen-data", "--config", str(tiny_toml), "--out", str(out)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["fingerprints"] == 2 * 8 * 4
        assert (out / "dataset.csv").is_file()

    def test_run_then_eval(self, tiny_toml, tmp_path, capsys):
        out = tmp_path / "run"
        assert parse_and_dispatch(["run", "--config", str(tiny_toml), "--out", str(out)]) == 0
        digest = json.loads(capsys.readouterr().out)
        assert digest[0]["track"] == "CDIL"
        assert (out / "metrics.csv").is_file()

        assert parse_and_dispatch(["eval", "--config", str(tiny_toml), "--out", str(out), "--checkpoint", str(out / "model.json")]) == 0
        report = json.loads(capsys.readouterr().out)
        assert set(report["units"]) == {"0", "1"}
        assert (out / "eval.csv").is_file()

    def test_run_is_reproducible(self, tiny_toml, tmp_path):
        for name in ("a", "b"):
            assert parse_and_dispatch(["run", "--config", str(tiny_toml), "--out", str(tmp_path / name)]) == 0
        assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()

    def test_resume_after_completion(self, tiny_toml, tmp_path):
        out = tmp_path / "run"
        assert parse_and_dispatch(["run", "--config", str(tiny_toml), "--out", str(out)]) == 0
        first = (out / "metrics.csv").read_bytes()
        assert parse_and_dispatch(["run", "--config", str(tiny_toml), "--out", str(out), "--resume"]) == 0
        assert (out / "metrics.csv").read_bytes() == first

    def test_check(self, tmp_path, capsys):
        assert parse_and_dispatch(["check", "--out", str(tmp_path)]) == 0
        assert json.loads(capsys.readouterr().out)["passed"] is True
        assert (tmp_path / "check.json").is_file()

    def test_serve_without_checkpoint(self, monkeypatch):
        from app.config.settings import Config

        monkeypatch.setattr(Config, "CHECKPOINT_PATH", None)
        assert parse_and_dispatch(["serve"]) == 2
