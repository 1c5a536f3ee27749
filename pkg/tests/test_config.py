import json

import pytest

from idloc.config import PRESETS, RunConfig, load_config, parse_config_text


class TestRunConfig:
    def test_defaults(self):
        c = RunConfig()
        assert (c.max_seq_len, c.grad_clip, c.schedule, c.prompt_mode, c.max_keywords) == (
            200, 1.0, "linear", "verbalizer_plus_keywords", 3
        )

    @pytest.mark.parametrize(
        "change",
        [{"batch_size": 0}, {"loss": "hinge"}, {"aggregation": "median"}, {"prompt_template": "no mask"}, {"epochs": -1}],
    )
    def test_invalid(self, change):
        with pytest.raises(ValueError):
            RunConfig().replace(**change)

    def test_from_mapping_coerces_strings(self):
        c = RunConfig.from_mapping({"epochs": "3", "learning_rate": "0.5", "constrained": "false"})
        assert (c.epochs, c.learning_rate, c.constrained) == (3, 0.5, False)

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="bogus"):
            RunConfig.from_mapping({"bogus": 1})

    def test_json_round_trip(self):
        c = RunConfig(epochs=3, aggregation="wavg")
        assert RunConfig.from_mapping(json.loads(json.dumps(c.to_json()))) == c

    def test_presets(self):
        assert PRESETS["few_shot"].learning_rate == 2e-5 and PRESETS["few_shot"].batch_size == 8
        assert PRESETS["ace"].warmup_steps == 1000 and PRESETS["ace"].epochs == 10


class TestLoadConfig:
    def test_key_value_file(self, tmp_path):
        (tmp_path / "run.cfg").write_text("# comment\nepochs = 4\ntrain_path = data/train.jsonl\n")
        c = load_config(tmp_path / "run.cfg")
        assert c.epochs == 4 and c.train_path == str(tmp_path / "data" / "train.jsonl")

    def test_json_file_with_preset(self, tmp_path):
        (tmp_path / "run.json").write_text('{"preset": "ace", "epochs": 2}')
        c = load_config(tmp_path / "run.json")
        assert c.encoder == "roberta-large" and c.epochs == 2

    def test_malformed_line(self):
        with pytest.raises(ValueError, match="line 1"):
            parse_config_text("epochs 3")

    def test_bundled_toy_config(self):
        from pathlib import Path

        c = load_config(Path(__file__).resolve().parent.parent / "configs" / "toy.cfg")
        assert c.encoder == "toy" and c.epochs <= 30 and Path(c.train_path).exists()
