"""Cloze-prompted multi-label event type identification.

Each event type is scored by the mask logits of its verbalizer tokens; the
NULL verbalizer's logit is the per-sentence threshold.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import AbstractSet, List, Optional, Sequence, Tuple

import torch

from .encoder import MASK_PLACEHOLDER, ConfigurationError, EncodedInput, Encoder, EncoderOutput, assemble_input
from .types import Ontology, Sentence, TypeScores
from .aggregation import aggregate

DEFAULT_TEMPLATE = "This text describes a [MASK] event."

_WORD_RE = re.compile(r"\[MASK\]|\w+|[^\w\s]")


def split_prompt_words(text: str) -> List[str]:
    return _WORD_RE.findall(text)


@dataclass(frozen=True)
class ClozePrompt:
    template: str = DEFAULT_TEMPLATE
    placement: str = "after_context"

    def __post_init__(self):
        count = self.template.count(MASK_PLACEHOLDER)
        if count != 1:
            raise ValueError(f"prompt template needs exactly one {MASK_PLACEHOLDER}, found {count}")
        if self.placement != "after_context":
            raise ValueError(f"unsupported prompt placement {self.placement!r}")

    @property
    def words(self) -> List[str]:
        return split_prompt_words(self.template)

    def filled(self, verbalizer) -> list:
        """Prompt words with the mask replaced by ``verbalizer`` (a word or token id)."""
        return [verbalizer if w == MASK_PLACEHOLDER else w for w in self.words]

    def filled_text(self, verbalizer: str) -> str:
        return self.template.replace(MASK_PLACEHOLDER, verbalizer)


@dataclass(frozen=True)
class IdentificationLossConfig:
    kind: str = "threshold_ce"
    margin: float = 1.0

    def __post_init__(self):
        if self.kind not in ("threshold_ce", "margin"):
            raise ValueError(f"unknown identification loss {self.kind!r}")
        if not self.margin > 0:
            raise ValueError("margin must be positive")


@dataclass(frozen=True)
class VerbalizerIndex:
    """Vocabulary ids of each type's verbalizers, resolved once at setup."""

    type_names: Tuple[str, ...]
    type_ids: Tuple[Tuple[int, ...], ...]
    null_id: int


def composite_surface(parts: Sequence[str]) -> str:
    return "<" + "_".join(p.lower() for p in parts) + ">"


def resolve_verbalizer(encoder: Encoder, verbalizer: str) -> int:
    """Vocabulary id for ``verbalizer``, adding a composite token when needed.

    Multi-word verbalizers (``"lay off"``, ``"lay_off"``, ``"<lay_off>"``) and
    words the tokenizer splits into pieces become a new token whose embeddings
    average the constituents'.
    """
    idx = encoder.token_to_id(verbalizer)
    if idx is not None:
        return idx
    core = verbalizer[1:-1] if verbalizer.startswith("<") and verbalizer.endswith(">") else verbalizer
    parts = [p for p in re.split(r"[\s_\-:]+", core) if p]
    if len(parts) > 1 and all(encoder.token_to_id(p) is not None for p in parts):
        return encoder.add_token(composite_surface(parts), parts)
    pieces = [piece for p in parts for piece in encoder.tokenize_word(p)]
    ids = [encoder.token_to_id(p) for p in pieces]
    if len(pieces) > 1 and None not in ids and encoder.special_id(encoder.unk_token) not in ids:
        return encoder.add_token(composite_surface(parts), pieces)
    raise ConfigurationError(f"verbalizer {verbalizer!r} is not a single vocabulary token")


def resolve_verbalizers(ontology: Ontology, encoder: Encoder) -> VerbalizerIndex:
    type_ids = tuple(tuple(resolve_verbalizer(encoder, v) for v in spec.verbalizers) for spec in ontology)
    null_id = encoder.token_to_id(ontology.null_verbalizer)
    if null_id is None:
        raise ConfigurationError(f"NULL verbalizer {ontology.null_verbalizer!r} missing from vocabulary")
    return VerbalizerIndex(tuple(ontology.names), type_ids, null_id)


def build_cloze_input(sentence: Sentence, prompt: ClozePrompt, encoder: Encoder) -> EncodedInput:
    return assemble_input(encoder, sentence.tokens, [prompt.words])


def type_logits(
    vocab_logits: torch.Tensor,
    index: VerbalizerIndex,
    aggregation: str = "avg",
    weights: Optional[Sequence[torch.Tensor]] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Per-type aggregated logits (differentiable) and the NULL logit."""
    per_type = []
    for i, ids in enumerate(index.type_ids):
        scores = vocab_logits[list(ids)]
        w = None
        if aggregation == "wavg":
            w = torch.softmax(weights[i], dim=0)
        per_type.append(aggregate(scores, aggregation, w))
    return torch.stack(per_type), vocab_logits[index.null_id]


def score_event_types(
    output: EncoderOutput,
    index: VerbalizerIndex,
    aggregation: str = "avg",
    weights: Optional[Sequence[torch.Tensor]] = None,
) -> TypeScores:
    if output.vocab_logits_at_mask is None:
        raise ValueError("encoder output has no mask logits")
    with torch.no_grad():
        scores, null = type_logits(output.vocab_logits_at_mask, index, aggregation, weights)
    return TypeScores(dict(zip(index.type_names, scores.tolist())), float(null))


def decode_identification(scores: TypeScores) -> set:
    # Ties with NULL count as negative.
    return {t for t, s in scores.scores.items() if s > scores.null_score}


def classification_probability(scores: TypeScores, label: str) -> float:
    """Single-label softmax probability of ``label`` over all type logits."""
    if label not in scores.scores:
        raise KeyError(label)
    names = list(scores.scores)
    logits = torch.tensor([scores.scores[n] for n in names], dtype=torch.float64)
    return float(torch.softmax(logits, dim=0)[names.index(label)])


def threshold_ce(type_scores: torch.Tensor, null_score: torch.Tensor, positive: torch.Tensor) -> torch.Tensor:
    """Sum of the positive and negative terms for one sentence.

    Each positive type is paired against NULL alone; all negatives share one
    softmax with NULL, whose probability is maximized. An empty positive set
    contributes no positive term.
    """
    positive = positive.bool()
    pos = type_scores[positive]
    if pos.numel():
        pair = torch.logaddexp(pos, null_score.expand_as(pos))
        loss_pos = (pair - pos).mean()
    else:
        loss_pos = type_scores.new_zeros(())
    pool = torch.cat([null_score.reshape(1), type_scores[~positive]])
    loss_neg = torch.logsumexp(pool, dim=0) - null_score
    return loss_pos + loss_neg


def margin_ranking(
    type_scores: torch.Tensor, null_score: torch.Tensor, positive: torch.Tensor, margin: float = 1.0
) -> torch.Tensor:
    """Hinge loss keeping positives ``margin`` above NULL and negatives below it."""
    positive = positive.bool()
    gap = torch.where(positive, type_scores - null_score, null_score - type_scores)
    return torch.clamp(margin - gap, min=0).mean()


def _as_tensors(scores: TypeScores, gold_types: AbstractSet[str]):
    unknown = set(gold_types) - set(scores.scores)
    if unknown:
        raise KeyError(f"gold types not in scores: {sorted(unknown)}")
    names = list(scores.scores)
    s = torch.tensor([scores.scores[n] for n in names], dtype=torch.float64)
    null = torch.tensor(scores.null_score, dtype=torch.float64)
    pos = torch.tensor([n in gold_types for n in names], dtype=torch.bool)
    return s, null, pos


def threshold_ce_loss(scores: TypeScores, gold_types: AbstractSet[str]) -> float:
    return float(threshold_ce(*_as_tensors(scores, gold_types)))


def margin_loss(scores: TypeScores, gold_types: AbstractSet[str], margin: float = 1.0) -> float:
    return float(margin_ranking(*_as_tensors(scores, gold_types), margin=margin))


def identification_loss(
    type_scores: torch.Tensor,
    null_score: torch.Tensor,
    positive: torch.Tensor,
    config: IdentificationLossConfig = IdentificationLossConfig(),
) -> torch.Tensor:
    if config.kind == "margin":
        return margin_ranking(type_scores, null_score, positive, config.margin)
    return threshold_ce(type_scores, null_score, positive)


def gold_mask(type_names: Sequence[str], gold_types: AbstractSet[str]) -> torch.Tensor:
    return torch.tensor([n in gold_types for n in type_names], dtype=torch.bool)
