import importlib.util
import json
from pathlib import Path

import pytest

from idloc.corpus import load_corpus, load_ontology
from idloc.types import EventMention

_spec = importlib.util.spec_from_file_location("convert", Path(__file__).resolve().parent.parent / "scripts" / "convert.py")
convert = importlib.util.module_from_spec(_spec)
_spec.loader.exec_module(convert)


class TestNameVerbalizer:
    @pytest.mark.parametrize(
        "name, expected",
        [("Business.Lay_off", "lay off"), ("Life:Die", "die"), ("Catastrophe", "catastrophe"), ("Transfer-Money", "transfer money"), ("StartPosition", "start position")],
    )
    def test_examples(self, name, expected):
        assert convert.name_verbalizer(name) == expected


class TestFewEvent:
    def test_dict_instances_with_position(self):
        obj = {"Life.Die": [{"tokens": ["He", "died", "today"], "trigger": ["died"], "position": [1, 2]}]}
        (s,) = convert.fewevent_sentences(obj)
        assert s.mentions == (EventMention("Life.Die", 1, 1),) and s.id == "Life.Die-0"

    def test_list_instances_search_trigger(self):
        obj = {"Business.Lay_off": [["they were laid off", "laid off"], ["no trigger here", "fired"]]}
        with pytest.warns(UserWarning, match="skipped 1"):
            out = convert.fewevent_sentences(obj)
        assert [m.span for m in out[0].mentions] == [(2, 3)]


class TestMaven:
    def test_offsets_and_null_sentences(self, tmp_path):
        doc = {
            "id": "d1",
            "content": [{"tokens": ["A", "storm", "hit"]}, {"tokens": ["Calm", "day"]}],
            "events": [{"type": "Catastrophe", "mention": [{"sent_id": 0, "offset": [1, 2]}]}],
        }
        (tmp_path / "in.jsonl").write_text(json.dumps(doc) + "\n")
        convert.main(["maven", str(tmp_path / "in.jsonl"), "--output", str(tmp_path / "out.jsonl"),
                      "--ontology", str(tmp_path / "o.json"), "--null-pool", str(tmp_path / "null.jsonl")])
        corpus = load_corpus(tmp_path / "out.jsonl")
        assert [s.id for s in corpus.sentences] == ["d1-0"]
        assert corpus.sentences[0].mentions == (EventMention("Catastrophe", 1, 1),)
        assert corpus.sentences[0].sentence.doc_id == "d1"
        assert [s.id for s in load_corpus(tmp_path / "null.jsonl").sentences] == ["d1-1"]
        assert load_ontology(tmp_path / "o.json").get("Catastrophe").verbalizers == ("catastrophe",)


class TestOneIE:
    def test_exclusive_end(self):
        rec = {"doc_id": "d", "sent_id": "d-3", "tokens": ["They", "laid", "off", "staff"],
               "event_mentions": [{"event_type": "Personnel:End-Position", "trigger": {"start": 1, "end": 3, "text": "laid off"}}]}
        (s,) = convert.oneie_sentences([json.dumps(rec)])
        assert s.mentions == (EventMention("Personnel:End-Position", 1, 2),)


class TestKeywords:
    def test_most_frequent_first(self):
        obj = {"Life.Die": [["he died", "died"], ["she died", "died"], ["he was killed", "killed"], ["x passed", "passed"]]}
        sentences = convert.fewevent_sentences(obj)
        ontology = convert.fill_keywords(convert.ontology_for({"Life.Die"}), sentences, 2)
        assert ontology.get("Life.Die").keywords == ("died", "killed")
