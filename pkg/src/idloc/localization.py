"""Type-conditioned, type-agnostic trigger localization.

The input is ``context | filled cloze prompt | type-aware content``. Context
words (first subtokens) get BIO emissions from an attention-enhanced scorer
and are decoded by a three-tag CRF, so no parameter is tied to an event type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import torch
from torch import nn

from . import crf
from .encoder import EncodedInput, Encoder, assemble_input
from .identification import ClozePrompt, resolve_verbalizer, split_prompt_words
from .types import NUM_TAGS, BioTag, EventMention, EventTypeSpec, Sentence, bio_to_spans

PROMPT_MODES = ("verbalizer_only", "verbalizer_plus_definition", "verbalizer_plus_keywords")
DEFAULT_PROMPT_MODE = "verbalizer_plus_keywords"


@dataclass(frozen=True)
class TypeAwarePrompt:
    content: str
    rendered: str
    filled_words: Tuple[str, ...]
    extra_words: Tuple[str, ...]


def type_aware_prompt(
    type_spec: EventTypeSpec,
    mode: str = DEFAULT_PROMPT_MODE,
    prompt: ClozePrompt = ClozePrompt(),
    max_keywords: int = 3,
) -> TypeAwarePrompt:
    if mode not in PROMPT_MODES:
        raise ValueError(f"unknown prompt mode {mode!r}; expected one of {PROMPT_MODES}")
    verbalizer = type_spec.primary_verbalizer
    filled = prompt.filled_text(verbalizer)
    extra = ""
    if mode == "verbalizer_plus_definition" and type_spec.definition:
        extra = type_spec.definition
    elif mode == "verbalizer_plus_keywords" and type_spec.keywords:
        extra = ", ".join(type_spec.keywords[:max_keywords])
    rendered = f"{filled} {extra}" if extra else filled
    return TypeAwarePrompt(
        mode, rendered, tuple(prompt.filled(verbalizer)), tuple(split_prompt_words(extra))
    )


def build_localization_input(
    sentence: Sentence,
    type_spec: EventTypeSpec,
    prompt_mode: str,
    encoder: Encoder,
    prompt: ClozePrompt = ClozePrompt(),
    max_keywords: int = 3,
    verbalizer_id: Optional[int] = None,
) -> EncodedInput:
    tap = type_aware_prompt(type_spec, prompt_mode, prompt, max_keywords)
    if verbalizer_id is None:
        verbalizer_id = resolve_verbalizer(encoder, type_spec.primary_verbalizer)
    # The verbalizer goes in as a resolved id so composite tokens stay atomic.
    filled = prompt.filled(verbalizer_id)
    segments = [filled]
    if tap.extra_words:
        segments.append(list(tap.extra_words))
    return assemble_input(encoder, sentence.tokens, segments)


class CrfParameters(nn.Module):
    """Emission projections, attention maps and CRF potentials."""

    def __init__(
        self,
        dim: int,
        attention_enabled: bool = True,
        constrained: bool = True,
        attend_prompt: bool = True,
        seed: int = 0,
    ):
        super().__init__()
        self.dim = dim
        self.attention_enabled = attention_enabled
        self.constrained = constrained
        self.attend_prompt = attend_prompt
        g = torch.Generator().manual_seed(seed)
        scale = 1.0 / math.sqrt(dim)
        self.W_l = nn.Parameter(torch.randn(NUM_TAGS, dim, generator=g) * scale)
        self.W_v = nn.Parameter(torch.randn(NUM_TAGS, dim, generator=g) * scale)
        self.W_q = nn.Parameter(torch.randn(dim, dim, generator=g) * scale)
        self.W_k = nn.Parameter(torch.randn(dim, dim, generator=g) * scale)
        self.transitions = nn.Parameter(torch.zeros(NUM_TAGS, NUM_TAGS))
        self.start = nn.Parameter(torch.zeros(NUM_TAGS))
        self.end = nn.Parameter(torch.zeros(NUM_TAGS))

    def nll(self, emissions: torch.Tensor, tags: Sequence) -> torch.Tensor:
        return crf.crf_nll(emissions, tags, self.transitions, self.start, self.end, self.constrained)

    def decode(self, emissions: torch.Tensor) -> List[BioTag]:
        return crf.viterbi_decode(emissions, self.transitions, self.start, self.end, self.constrained)

    def log_partition(self, emissions: torch.Tensor) -> torch.Tensor:
        t, s = self.transitions, self.start
        if self.constrained:
            t, s = crf.apply_constraints(t, s)
        return crf.crf_log_partition(emissions, t, s, self.end)


def attention_weights(
    queries: torch.Tensor, params: CrfParameters, keys: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """Row-stochastic weights softmax_j((W_q h_i) . (W_k h_j) / sqrt(m))."""
    keys = queries if keys is None else keys
    q = queries @ params.W_q.T
    k = keys @ params.W_k.T
    return torch.softmax(q @ k.T / math.sqrt(queries.shape[-1]), dim=-1)


def emission_scores(
    hidden: torch.Tensor, params: CrfParameters, keys: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """(n, 3) emissions: W_l h_i plus the attention-weighted W_v h_j."""
    own = hidden @ params.W_l.T
    if not params.attention_enabled:
        return own
    keys = hidden if keys is None else keys
    alpha = attention_weights(hidden, params, keys)
    return own + alpha @ (keys @ params.W_v.T)


def context_states(
    hidden: torch.Tensor, inputs: EncodedInput, attend_prompt: bool = True
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Word (first-subtoken) states and the attention key states."""
    words = hidden[list(inputs.word_to_subtoken)]
    if attend_prompt:
        return words, hidden
    c0, c1 = inputs.context_span
    return words, hidden[c0:c1]


def input_emissions(hidden: torch.Tensor, inputs: EncodedInput, params: CrfParameters) -> torch.Tensor:
    words, keys = context_states(hidden, inputs, params.attend_prompt)
    return emission_scores(words, params, keys)


def localize(
    sentence: Sentence,
    type_spec: EventTypeSpec,
    encoder: Encoder,
    params: CrfParameters,
    prompt_mode: str = DEFAULT_PROMPT_MODE,
    prompt: ClozePrompt = ClozePrompt(),
    max_keywords: int = 3,
    verbalizer_id: Optional[int] = None,
) -> List[EventMention]:
    inputs = build_localization_input(
        sentence, type_spec, prompt_mode, encoder, prompt, max_keywords, verbalizer_id
    )
    with torch.no_grad():
        hidden = encoder.encode(inputs).hidden
        tags = params.decode(input_emissions(hidden, inputs, params))
    return [EventMention(type_spec.name, s, e) for s, e in bio_to_spans(tags)]
