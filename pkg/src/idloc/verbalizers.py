"""Automatic verbalizer selection by reciprocal-rank voting of a frozen encoder."""

from __future__ import annotations

import re
import warnings
from collections import defaultdict
from dataclasses import dataclass
from typing import Collection, Dict, List, Mapping, Sequence, Set, Tuple, Union

import torch

from .aggregation import METHODS, aggregate
from .encoder import Encoder
from .identification import ClozePrompt, build_cloze_input, composite_surface, resolve_verbalizer
from .types import AnnotatedSentence, Ontology, Sentence

__all__ = [
    "METHODS",
    "CandidateTable",
    "aggregate",
    "build_candidate_table",
    "collect_candidates",
    "rank_candidates",
    "score_candidate",
    "select_verbalizers",
]


@dataclass(frozen=True)
class CandidateTable:
    candidates: Tuple[str, ...]
    ranks: Mapping[Tuple[str, str], int]

    def rank(self, sentence_id: str, candidate: str) -> int:
        return self.ranks[(sentence_id, candidate)]


def collect_candidates(train: Sequence[AnnotatedSentence]) -> Set[str]:
    """Lowercased trigger words; multi-word triggers contribute each word."""
    out = set()
    for s in train:
        for m in s.mentions:
            out.update(w.lower() for w in s.trigger_words(m))
    if not out:
        warnings.warn("no trigger words found; candidate verbalizer set is empty")
    return out


def _candidate_ids(candidates: Collection[str], encoder: Encoder) -> Dict[str, int]:
    ids = {}
    missing = []
    for c in sorted(candidates):
        idx = encoder.token_to_id(c)
        if idx is None:
            missing.append(c)
        else:
            ids[c] = idx
    if missing:
        warnings.warn(f"{len(missing)} candidates not in the encoder vocabulary were dropped: {missing[:10]}")
    return ids


def _rank(logits: torch.Tensor, ids: Mapping[str, int]) -> Dict[str, int]:
    # Highest logit first; equal logits fall back to lexicographic order.
    order = sorted(ids, key=lambda c: (-float(logits[ids[c]]), c))
    return {c: r for r, c in enumerate(order, 1)}


def _mask_logits(sentence: Sentence, prompt: ClozePrompt, encoder: Encoder) -> torch.Tensor:
    was_training = encoder.training
    encoder.eval()
    try:
        with torch.no_grad():
            return encoder.encode(build_cloze_input(sentence, prompt, encoder)).vocab_logits_at_mask
    finally:
        encoder.train(was_training)


def rank_candidates(
    sentence: Sentence, prompt: ClozePrompt, candidates: Collection[str], encoder: Encoder
) -> Dict[str, int]:
    """1-based rank of each candidate among the candidates at the mask slot."""
    return _rank(_mask_logits(sentence, prompt, encoder), _candidate_ids(candidates, encoder))


def build_candidate_table(
    train: Sequence[AnnotatedSentence], prompt: ClozePrompt, candidates: Collection[str], encoder: Encoder
) -> CandidateTable:
    ids = _candidate_ids(candidates, encoder)
    ranks = {}
    for s in train:
        for c, r in _rank(_mask_logits(s.sentence, prompt, encoder), ids).items():
            ranks[(s.id, c)] = r
    return CandidateTable(tuple(sorted(ids)), ranks)


def _label_set(label: Union[str, Collection[str]]) -> Collection[str]:
    return {label} if isinstance(label, str) else label


def score_candidate(
    candidate: str,
    event_type: str,
    table: CandidateTable,
    labels: Mapping[str, Union[str, Collection[str]]],
) -> float:
    """Sum of reciprocal ranks of ``candidate`` over instances labeled ``event_type``.

    ``labels`` maps sentence id to its type (or set of types, for
    multi-event sentences).
    """
    total = 0.0
    for sid, label in labels.items():
        if event_type in _label_set(label):
            total += 1.0 / table.rank(sid, candidate)
    return total


def _name_fallback(name: str, encoder: Encoder) -> str:
    parts = [p.lower() for p in re.split(r"[\s_\-:.]+", name) if p]
    joined = "_".join(parts)
    resolve_verbalizer(encoder, joined)
    return joined if encoder.token_to_id(joined) is not None else composite_surface(parts)


def select_verbalizers(
    train: Sequence[AnnotatedSentence],
    ontology: Ontology,
    encoder: Encoder,
    top_n: int = 1,
    prompt: ClozePrompt = ClozePrompt(),
) -> Dict[str, List[str]]:
    """Top-``top_n`` candidates per type by reciprocal-rank score.

    Types without any scoring candidate fall back to their name, added as a
    composite token when it spans several words.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    candidates = collect_candidates(train) - {ontology.null_verbalizer}
    table = build_candidate_table(train, prompt, candidates, encoder) if candidates else CandidateTable((), {})
    labels = {s.id: s.event_types for s in train}

    scores: Dict[str, Dict[str, float]] = defaultdict(dict)
    for sid, types in labels.items():
        for c in table.candidates:
            inv = 1.0 / table.rank(sid, c)
            for t in types:
                scores[t][c] = scores[t].get(c, 0.0) + inv

    selected = {}
    for spec in ontology:
        ranked = sorted(
            ((c, s) for c, s in scores.get(spec.name, {}).items() if s > 0),
            key=lambda cs: (-cs[1], cs[0]),
        )
        if ranked:
            selected[spec.name] = [c for c, _ in ranked[:top_n]]
        else:
            selected[spec.name] = [_name_fallback(spec.name, encoder)]
    return selected
