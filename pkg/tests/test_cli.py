import json
import subprocess
import sys
from pathlib import Path

import pytest
import torch

from idloc.cli import run
from idloc.corpus import load_corpus
from idloc.model import EventDetector

ROOT = Path(__file__).resolve().parent.parent
TOY = ROOT / "data" / "toy"
TOY_CFG = ROOT / "configs" / "toy.cfg"


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "model"
    assert run(["train", "--config", str(TOY_CFG), "--out", str(out)]) == 0
    return out


class TestEvaluate:
    def test_identical_files(self, capsys):
        gold = str(TOY / "train.jsonl")
        assert run(["evaluate", "--pred", gold, "--gold", gold]) == 0
        assert capsys.readouterr().out.strip().splitlines()[-1] == "F1 1.0000"

    def test_json_report(self, tmp_path):
        gold = str(TOY / "train.jsonl")
        assert run(["evaluate", "--pred", gold, "--gold", gold, "--output", str(tmp_path / "r.json")]) == 0
        assert json.loads((tmp_path / "r.json").read_text())["f1"] == 1.0

    def test_misaligned_ids(self, tmp_path, capsys):
        (tmp_path / "p.jsonl").write_text('{"id":"zzz","tokens":["a"],"mentions":[]}\n')
        assert run(["evaluate", "--pred", str(tmp_path / "p.jsonl"), "--gold", str(TOY / "train.jsonl")]) == 1
        assert "zzz" in capsys.readouterr().err


class TestErrors:
    def test_missing_file(self, tmp_path, capsys):
        assert run(["evaluate", "--pred", str(tmp_path / "none.jsonl"), "--gold", str(TOY / "train.jsonl")]) == 1
        assert "none.jsonl" in capsys.readouterr().err

    def test_unknown_flag(self):
        assert run(["evaluate", "--bogus"]) == 1

    def test_no_command(self):
        assert run([]) == 1

    def test_invalid_config_value(self, tmp_path):
        assert run(["train", "--config", str(TOY_CFG), "--loss", "hinge", "--out", str(tmp_path / "m")]) == 1

    def test_malformed_corpus(self, tmp_path, capsys):
        (tmp_path / "bad.jsonl").write_text("{oops\n")
        assert run(["sample-split", "--corpus", str(tmp_path / "bad.jsonl"), "--k", "2",
                    "--out-train", str(tmp_path / "a"), "--out-test", str(tmp_path / "b")]) == 1
        assert "line 1" in capsys.readouterr().err

    def test_divergence_exit_code(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(EventDetector, "identification_loss", lambda self, ex: torch.tensor(float("inf"), requires_grad=True))
        assert run(["train", "--config", str(TOY_CFG), "--epochs", "1", "--out", str(tmp_path / "m")]) == 2
        assert "e0:id0" in capsys.readouterr().err


class TestCorpusCommands:
    def test_sample_split_deterministic(self, tmp_path):
        outputs = []
        for tag in ("a", "b"):
            args = ["sample-split", "--corpus", str(TOY / "train.jsonl"), "--ontology", str(TOY / "ontology.json"),
                    "--k", "2", "--seed", "3", "--out-train", str(tmp_path / f"{tag}-tr"), "--out-test", str(tmp_path / f"{tag}-te")]
            assert run(args) == 0
            outputs.append(((tmp_path / f"{tag}-tr").read_bytes(), (tmp_path / f"{tag}-te").read_bytes()))
        assert outputs[0] == outputs[1]

    def test_inject_null(self, tmp_path, capsys):
        (tmp_path / "test.jsonl").write_text('{"id":"held-0","tokens":["a"],"mentions":[]}\n')
        args = ["inject-null", "--train", str(TOY / "train.jsonl"), "--test", str(tmp_path / "test.jsonl"),
                "--pool", str(TOY / "null_pool.jsonl"), "--ratio", "0.5", "--train-only",
                "--out-train", str(tmp_path / "tr"), "--out-test", str(tmp_path / "te")]
        assert run(args) == 0
        assert "injected 8 NULL" in capsys.readouterr().out
        assert [s.id for s in load_corpus(tmp_path / "te").sentences] == ["held-0"]
        assert len((tmp_path / "tr").read_text().splitlines()) == 28

    def test_select_verbalizers(self, tmp_path):
        args = ["select-verbalizers", "--config", str(TOY_CFG), "--output", str(tmp_path / "o.json")]
        assert run(args) == 0
        types = json.loads((tmp_path / "o.json").read_text())
        assert len(types) == 5 if isinstance(types, list) else len(types["types"]) == 5


class TestTrainPredict:
    def test_model_files(self, trained):
        for name in ("config.json", "ontology.json", "encoder.pt", "crf.pt", "history.json", "train_report.json"):
            assert (trained / name).exists()
        report = json.loads((trained / "train_report.json").read_text())
        assert report["train_mention"]["f1"] == 1.0

    def test_predict_deterministic_and_scores(self, trained, tmp_path, capsys):
        for name in ("a", "b"):
            assert run(["predict", "--model", str(trained), "--input", str(TOY / "train.jsonl"),
                        "--output", str(tmp_path / name), "--seed", "0"]) == 0
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()
        capsys.readouterr()
        assert run(["evaluate", "--pred", str(tmp_path / "a"), "--gold", str(TOY / "train.jsonl")]) == 0
        assert "F1 1.0000" in capsys.readouterr().out

    def test_missing_model_dir(self, tmp_path):
        assert run(["predict", "--model", str(tmp_path / "nope"), "--input", str(TOY / "train.jsonl"),
                    "--output", str(tmp_path / "p")]) == 1

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "idloc", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0 and "select-verbalizers" in proc.stdout


class TestPreset:
    def test_preset_then_config_overrides(self):
        from idloc.cli import _run_config, build_parser

        args = build_parser().parse_args(["train", "--preset", "ace", "--config", str(TOY_CFG), "--out", "x"])
        c = _run_config(args)
        # The toy config file sets the encoder and learning rate; warmup comes from the preset.
        assert c.encoder == "toy" and c.learning_rate == 0.01 and c.warmup_steps == 1000

    def test_unknown_preset(self):
        assert run(["train", "--preset", "huge", "--out", "x"]) == 1
