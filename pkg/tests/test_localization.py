import math

import pytest
import torch

from idloc.encoder import ToyEncoder
from idloc.identification import ClozePrompt, split_prompt_words
from idloc.localization import (
    CrfParameters,
    attention_weights,
    build_localization_input,
    emission_scores,
    input_emissions,
    localize,
    type_aware_prompt,
)
from idloc.types import BioTag, EventTypeSpec, Sentence

from oracles import central_difference, relative_error

SPEC = EventTypeSpec(
    "End-Position",
    ("resign",),
    "A person stops working in a position.",
    ("resigned", "quit", "retired", "left", "stepped"),
)


@pytest.fixture
def enc():
    words = ["he", "quit", "the", "bank"] + split_prompt_words(ClozePrompt().template)
    words += split_prompt_words(SPEC.definition) + list(SPEC.keywords) + [","]
    return ToyEncoder.from_words(words, ["none", "resign"], dim=8, seed=1)


def params64(dim, **kwargs):
    return CrfParameters(dim, **kwargs).double()


class TestTypeAwarePrompt:
    def test_verbalizer_only(self):
        p = type_aware_prompt(SPEC, "verbalizer_only")
        assert p.rendered == "This text describes a resign event."
        assert p.extra_words == ()

    def test_keywords_capped_at_three(self):
        p = type_aware_prompt(SPEC, "verbalizer_plus_keywords")
        assert p.rendered.endswith("resign event. resigned, quit, retired")

    def test_definition_appended_verbatim(self):
        p = type_aware_prompt(SPEC, "verbalizer_plus_definition")
        assert p.rendered == "This text describes a resign event. " + SPEC.definition

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            type_aware_prompt(SPEC, "everything")

    def test_input_segments(self, enc):
        s = Sentence("s", ("he", "quit"))
        only = build_localization_input(s, SPEC, "verbalizer_only", enc)
        kw = build_localization_input(s, SPEC, "verbalizer_plus_keywords", enc)
        assert len(only.segments) == 2 and len(kw.segments) == 3
        assert only.subtoken_ids[: only.segments[1][1]] == kw.subtoken_ids[: kw.segments[1][1]]
        assert only.mask_position is None


class TestAttention:
    def test_singleton(self):
        p = params64(4)
        h = torch.randn(1, 4, dtype=torch.float64)
        assert torch.equal(attention_weights(h, p), torch.ones(1, 1, dtype=torch.float64))

    def test_identical_states_uniform(self):
        p = params64(4)
        h = torch.randn(1, 4, dtype=torch.float64).expand(5, 4)
        assert torch.allclose(attention_weights(h, p), torch.full((5, 5), 0.2, dtype=torch.float64))

    def test_rows_stochastic(self):
        p = params64(6)
        a = attention_weights(torch.randn(4, 6, dtype=torch.float64), p, torch.randn(9, 6, dtype=torch.float64))
        assert a.shape == (4, 9) and torch.allclose(a.sum(1), torch.ones(4, dtype=torch.float64))

    def test_matches_formula(self):
        p = params64(3, seed=5).requires_grad_(False)
        h = torch.randn(3, 3, dtype=torch.float64)
        expected = torch.empty(3, 3, dtype=torch.float64)
        for i in range(3):
            logits = [float((p.W_q @ h[i]) @ (p.W_k @ h[j])) / math.sqrt(3) for j in range(3)]
            z = sum(math.exp(x) for x in logits)
            expected[i] = torch.tensor([math.exp(x) / z for x in logits])
        assert torch.allclose(attention_weights(h, p), expected)


class TestEmissions:
    def test_singleton_sums_projections(self):
        p = params64(4)
        h = torch.randn(1, 4, dtype=torch.float64)
        assert torch.allclose(emission_scores(h, p), ((p.W_l + p.W_v) @ h[0]).unsqueeze(0))

    def test_attention_off_is_affine(self):
        p = params64(4, attention_enabled=False)
        h = torch.randn(3, 4, dtype=torch.float64)
        assert torch.allclose(emission_scores(h, p), h @ p.W_l.T)

    def test_keys_restricted_to_context(self, enc):
        s = Sentence("s", ("he", "quit", "the", "bank"))
        inputs = build_localization_input(s, SPEC, "verbalizer_plus_keywords", enc)
        hidden = enc.encode(inputs).hidden.double()
        full = input_emissions(hidden, inputs, params64(8, attend_prompt=True))
        ctx = input_emissions(hidden, inputs, params64(8, attend_prompt=False))
        assert full.shape == ctx.shape == (4, 3)
        assert not torch.allclose(full, ctx)


class TestGradients:
    def test_crf_nll_through_attention(self):
        torch.manual_seed(0)
        dim, n = 4, 5
        p = params64(dim, seed=2)
        with torch.no_grad():
            p.transitions.normal_()
            p.start.normal_()
            p.end.normal_()
        hidden = torch.randn(n + 2, dim, dtype=torch.float64, requires_grad=True)
        tags = [BioTag.O, BioTag.B, BioTag.I, BioTag.O, BioTag.B]

        def loss_of_hidden(h):
            return p.nll(emission_scores(h[:n], p, h), tags)

        loss_of_hidden(hidden).backward()
        numeric = central_difference(loss_of_hidden, hidden.detach())
        assert relative_error(hidden.grad, numeric) <= 1e-4

        for name in ("W_q", "W_k", "W_v", "W_l", "transitions", "start", "end"):
            param = getattr(p, name)
            p.zero_grad()
            loss_of_hidden(hidden.detach()).backward()
            analytic = param.grad.clone()

            def f(x, name=name):
                with torch.no_grad():
                    saved = getattr(p, name).detach().clone()
                    getattr(p, name).copy_(x)
                    value = loss_of_hidden(hidden.detach())
                    getattr(p, name).copy_(saved)
                return value

            assert relative_error(analytic, central_difference(f, param.detach().clone())) <= 1e-4, name


class TestLocalize:
    def test_all_o_gives_no_mentions(self, enc):
        p = CrfParameters(8)
        with torch.no_grad():
            p.start.copy_(torch.tensor([50.0, 0.0, 0.0]))
            p.transitions.copy_(torch.tensor([[50.0, 0, 0], [50.0, 0, 0], [50.0, 0, 0]]))
        assert localize(Sentence("s", ("he", "quit")), SPEC, enc, p) == []

    def test_mentions_carry_type(self, enc):
        p = CrfParameters(8)
        with torch.no_grad():
            p.start.copy_(torch.tensor([-50.0, 50.0, 0.0]))
            p.transitions.copy_(torch.tensor([[0.0, 0, 0], [50.0, 0, 0], [50.0, 0, 0]]))
        out = localize(Sentence("s", ("he", "quit")), SPEC, enc, p)
        assert [(m.event_type, m.span) for m in out] == [("End-Position", (0, 0))]
