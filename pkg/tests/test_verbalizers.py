import random

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from idloc.encoder import Encoder, ToyEncoder
from idloc.identification import ClozePrompt, split_prompt_words
from idloc.types import AnnotatedSentence, EventMention, EventTypeSpec, Ontology, Sentence
from idloc.verbalizers import (
    CandidateTable,
    build_candidate_table,
    collect_candidates,
    rank_candidates,
    score_candidate,
    select_verbalizers,
)

from oracles import reciprocal_rank_score


class CopyEncoder(Encoder):
    """Mask logits count each vocabulary word in the context.

    A stand-in for a pretrained LM whose top guesses at the mask slot are the
    sentence's own salient words, which makes the selection outcome forced.
    """

    def __init__(self, words):
        self.vocab = ["[UNK]", "[CLS]", "[SEP]", "[MASK]"] + sorted(set(words))
        super().__init__(len(self.vocab))
        self.index = {w: i for i, w in enumerate(self.vocab)}

    @property
    def vocab_size(self):
        return len(self.vocab)

    def tokenize_word(self, word):
        return [word.lower()] if word.lower() in self.index else ["[UNK]"]

    def token_to_id(self, token):
        return self.index.get(token, self.index.get(token.lower()))

    def add_token(self, surface, init_from):
        self.index[surface] = len(self.vocab)
        self.vocab.append(surface)
        return self.index[surface]

    def forward_ids(self, ids, inputs):
        c0, c1 = inputs.context_span
        bag = torch.bincount(ids[c0:c1], minlength=self.vocab_size).float()
        return bag.expand(len(ids), -1)

    def lm_logits(self, hidden_at_mask):
        return hidden_at_mask

    def state(self):
        return {"kind": "copy"}


def mention(t, start, end=None):
    return EventMention(t, start, start if end is None else end)


def annotated(sid, text, *mentions):
    return AnnotatedSentence(Sentence(sid, tuple(text.split())), tuple(mentions))


class TestCollectCandidates:
    def test_trigger_words(self):
        train = [annotated("a", "they hire", mention("S", 1)), annotated("b", "she hired", mention("S", 1))]
        assert collect_candidates(train) == {"hire", "hired"}

    def test_multi_word_trigger(self):
        assert collect_candidates([annotated("a", "they lay off staff", mention("L", 1, 2))]) == {"lay", "off"}

    def test_no_mentions_warns(self):
        with pytest.warns(UserWarning):
            assert collect_candidates([annotated("a", "nothing here")]) == set()


class TestRanks:
    def test_single_candidate(self):
        enc = CopyEncoder(["he", "quit"])
        assert rank_candidates(Sentence("s", ("he", "quit")), ClozePrompt("[MASK]"), ["quit"], enc) == {"quit": 1}

    def test_rank_follows_logits(self):
        enc = CopyEncoder(["a", "b", "c"])
        ranks = rank_candidates(Sentence("s", ("b", "b", "b", "c", "c", "a")), ClozePrompt("[MASK]"), ["a", "b", "c"], enc)
        assert ranks == {"b": 1, "c": 2, "a": 3}

    def test_ties_break_lexicographically(self):
        enc = CopyEncoder(["x", "y"])
        assert rank_candidates(Sentence("s", ("y", "x")), ClozePrompt("[MASK]"), ["y", "x"], enc) == {"x": 1, "y": 2}

    def test_out_of_vocabulary_dropped(self):
        enc = CopyEncoder(["a"])
        with pytest.warns(UserWarning, match="dropped"):
            ranks = rank_candidates(Sentence("s", ("a",)), ClozePrompt("[MASK]"), ["a", "zzz"], enc)
        assert ranks == {"a": 1}


class TestScore:
    def test_two_instances(self):
        table = CandidateTable(("v", "w"), {("s1", "v"): 1, ("s1", "w"): 2, ("s2", "v"): 2, ("s2", "w"): 1})
        assert score_candidate("v", "T", table, {"s1": "T", "s2": "T"}) == pytest.approx(1.5)

    def test_no_instances(self):
        table = CandidateTable(("v",), {("s1", "v"): 1})
        assert score_candidate("v", "T", table, {"s1": "U"}) == 0.0

    @settings(max_examples=200)
    @given(st.data())
    def test_matches_double_loop(self, data):
        n_sent = data.draw(st.integers(1, 6))
        cands = ["c%d" % i for i in range(data.draw(st.integers(1, 5)))]
        types = ["A", "B", "C"]
        ranks, by_sentence, labels = {}, {}, {}
        for i in range(n_sent):
            sid = "s%d" % i
            order = data.draw(st.permutations(cands))
            by_sentence[sid] = {c: r for r, c in enumerate(order, 1)}
            ranks.update({(sid, c): r for c, r in by_sentence[sid].items()})
            labels[sid] = set(data.draw(st.lists(st.sampled_from(types), max_size=3)))
        table = CandidateTable(tuple(cands), ranks)
        for c in cands:
            for t in types:
                expected = reciprocal_rank_score(c, t, by_sentence, labels)
                assert abs(score_candidate(c, t, table, labels) - expected) <= 1e-12


def planted_corpus(seed=0):
    """Each type's sentences repeat its planted trigger; fillers are shared."""
    rng = random.Random(seed)
    planted = {"Hire": "hired", "Quit": "resigned", "Attack": "bombed"}
    noise = ["the", "city", "staff", "officials", "today", "report"]
    sentences = []
    for t, word in planted.items():
        for i in range(4):
            words = rng.sample(noise, 4)
            # A competing trigger of another type, seen once per sentence.
            other = rng.choice([w for w in planted.values() if w != word])
            words += [word, word, other]
            rng.shuffle(words)
            pos = words.index(word)
            sentences.append(annotated(f"{t}-{i}", " ".join(words), mention(t, pos)))
    ontology = Ontology(tuple(EventTypeSpec(t, (t.lower(),)) for t in planted))
    return sentences, ontology, planted, noise


class TestSelect:
    def test_planted_trigger_selected(self):
        train, ontology, planted, noise = planted_corpus()
        enc = CopyEncoder(noise + list(planted.values()) + ["none"])
        chosen = select_verbalizers(train, ontology, enc, prompt=ClozePrompt("[MASK]"))
        assert chosen == {t: [w] for t, w in planted.items()}

    def test_top_n_order(self):
        train, ontology, planted, noise = planted_corpus(1)
        enc = CopyEncoder(noise + list(planted.values()) + ["none"])
        chosen = select_verbalizers(train, ontology, enc, top_n=2, prompt=ClozePrompt("[MASK]"))
        for t, w in planted.items():
            assert chosen[t][0] == w and len(chosen[t]) == 2

    def test_fallback_to_type_name(self):
        train = [annotated("a", "they hired staff", mention("Hire", 1))]
        ontology = Ontology((EventTypeSpec("Hire", ("x",)), EventTypeSpec("Lay-Off", ("y",))))
        enc = ToyEncoder.from_words(["they", "hired", "staff", "lay", "off"] + split_prompt_words(ClozePrompt().template), ["none"], dim=8)
        chosen = select_verbalizers(train, ontology, enc)
        assert chosen["Hire"] == ["hired"]
        assert chosen["Lay-Off"] == ["<lay_off>"] and enc.token_to_id("<lay_off>") is not None

    def test_null_verbalizer_never_selected(self):
        train = [annotated("a", "none happened", mention("T", 0))]
        ontology = Ontology((EventTypeSpec("T", ("t",)),))
        enc = CopyEncoder(["none", "happened", "t"])
        assert select_verbalizers(train, ontology, enc, prompt=ClozePrompt("[MASK]"))["T"] == ["t"]

    def test_table_covers_every_pair(self):
        train, ontology, planted, noise = planted_corpus()
        enc = CopyEncoder(noise + list(planted.values()))
        table = build_candidate_table(train, ClozePrompt("[MASK]"), collect_candidates(train), enc)
        assert len(table.ranks) == len(train) * len(table.candidates)
