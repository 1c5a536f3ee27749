"""Shared data model: sentences, event mentions, ontologies and BIO tags."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

Span = Tuple[int, int]

DEFAULT_NULL_VERBALIZER = "none"
DEFAULT_MAX_KEYWORDS = 3


class ValidationError(ValueError):
    """Raised when a value object violates one of its invariants."""


class BioTag(enum.IntEnum):
    # Index order doubles as the Viterbi tie-break preference.
    O = 0
    B = 1
    I = 2

    @classmethod
    def parse(cls, value) -> "BioTag":
        if isinstance(value, BioTag):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(int(value))


NUM_TAGS = len(BioTag)


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: Tuple[str, ...]
    doc_id: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValidationError(f"sentence {self.id!r} has no tokens")
        for tok in self.tokens:
            if not tok or any(ch.isspace() for ch in tok):
                raise ValidationError(f"sentence {self.id!r}: bad token {tok!r}")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True, order=True)
class EventMention:
    event_type: str
    trigger_start: int
    trigger_end: int

    def __post_init__(self):
        if not 0 <= self.trigger_start <= self.trigger_end:
            raise ValidationError(
                f"invalid trigger span ({self.trigger_start}, {self.trigger_end})"
            )

    @property
    def span(self) -> Span:
        return (self.trigger_start, self.trigger_end)


@dataclass(frozen=True)
class AnnotatedSentence:
    """A sentence plus its event mentions. No mentions means a NULL instance."""

    sentence: Sentence
    mentions: Tuple[EventMention, ...] = ()

    def __post_init__(self):
        seen = set()
        unique = []
        for m in self.mentions:
            if m.trigger_end >= len(self.sentence.tokens):
                raise ValidationError(
                    f"sentence {self.sentence.id!r}: span {m.span} out of range "
                    f"for {len(self.sentence.tokens)} tokens"
                )
            if m not in seen:
                seen.add(m)
                unique.append(m)
        object.__setattr__(self, "mentions", tuple(unique))

    @property
    def id(self) -> str:
        return self.sentence.id

    @property
    def is_null(self) -> bool:
        return not self.mentions

    @property
    def event_types(self) -> frozenset:
        return frozenset(m.event_type for m in self.mentions)

    def spans_for(self, event_type: str) -> List[Span]:
        return sorted(m.span for m in self.mentions if m.event_type == event_type)

    def trigger_words(self, mention: EventMention) -> Tuple[str, ...]:
        return self.sentence.tokens[mention.trigger_start : mention.trigger_end + 1]


@dataclass(frozen=True)
class EventTypeSpec:
    name: str
    verbalizers: Tuple[str, ...]
    definition: Optional[str] = None
    keywords: Tuple[str, ...] = ()
    max_keywords: int = DEFAULT_MAX_KEYWORDS

    def __post_init__(self):
        object.__setattr__(self, "verbalizers", tuple(self.verbalizers))
        object.__setattr__(self, "keywords", tuple(self.keywords)[: self.max_keywords])
        if not self.verbalizers:
            raise ValidationError(f"event type {self.name!r} has no verbalizers")

    @property
    def primary_verbalizer(self) -> str:
        return self.verbalizers[0]

    def to_json(self) -> dict:
        out = {"name": self.name, "verbalizers": list(self.verbalizers)}
        if self.definition is not None:
            out["definition"] = self.definition
        if self.keywords:
            out["keywords"] = list(self.keywords)
        return out

    @classmethod
    def from_json(cls, obj: Mapping, max_keywords: int = DEFAULT_MAX_KEYWORDS) -> "EventTypeSpec":
        return cls(
            name=obj["name"],
            verbalizers=tuple(obj["verbalizers"]),
            definition=obj.get("definition"),
            keywords=tuple(obj.get("keywords", ())),
            max_keywords=max_keywords,
        )


@dataclass(frozen=True)
class Ontology:
    types: Tuple[EventTypeSpec, ...]
    null_verbalizer: str = DEFAULT_NULL_VERBALIZER
    _index: Dict[str, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        index = {}
        for i, spec in enumerate(self.types):
            if spec.name in index:
                raise ValidationError(f"duplicate event type {spec.name!r}")
            if self.null_verbalizer in spec.verbalizers:
                raise ValidationError(
                    f"event type {spec.name!r} reuses the NULL verbalizer {self.null_verbalizer!r}"
                )
            index[spec.name] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.types)

    def __iter__(self):
        return iter(self.types)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    @property
    def names(self) -> List[str]:
        return [t.name for t in self.types]

    def index(self, name: str) -> int:
        return self._index[name]

    def get(self, name: str) -> EventTypeSpec:
        try:
            return self.types[self._index[name]]
        except KeyError:
            raise ValidationError(f"unknown event type {name!r}") from None

    def with_verbalizers(self, mapping: Mapping[str, Sequence[str]]) -> "Ontology":
        types = [
            replace(t, verbalizers=tuple(mapping[t.name])) if t.name in mapping else t
            for t in self.types
        ]
        return Ontology(tuple(types), self.null_verbalizer)

    def to_json(self) -> dict:
        return {
            "types": [t.to_json() for t in self.types],
            "null_verbalizer": self.null_verbalizer,
        }

    @classmethod
    def from_json(cls, obj: Mapping, max_keywords: int = DEFAULT_MAX_KEYWORDS) -> "Ontology":
        return cls(
            tuple(EventTypeSpec.from_json(t, max_keywords) for t in obj["types"]),
            obj.get("null_verbalizer", DEFAULT_NULL_VERBALIZER),
        )


@dataclass(frozen=True)
class TypeScores:
    """Identification logits per event type plus the NULL logit."""

    scores: Mapping[str, float]
    null_score: float

    def __post_init__(self):
        object.__setattr__(self, "scores", dict(self.scores))
        values = list(self.scores.values()) + [self.null_score]
        if not all(math.isfinite(v) for v in values):
            raise ValidationError("type scores must be finite")

    def shifted(self, constant: float) -> "TypeScores":
        return TypeScores({k: v + constant for k, v in self.scores.items()}, self.null_score + constant)


def bio_to_spans(tags: Sequence) -> List[Span]:
    """Convert BIO tags to inclusive (start, end) spans.

    A stray ``I`` (one not following ``B`` or ``I``) opens a new span rather
    than being dropped.
    """
    spans: List[Span] = []
    start = None
    for i, raw in enumerate(tags):
        tag = BioTag.parse(raw)
        if tag is BioTag.B or (tag is BioTag.I and start is None):
            if start is not None:
                spans.append((start, i - 1))
            start = i
        elif tag is BioTag.O and start is not None:
            spans.append((start, i - 1))
            start = None
    if start is not None:
        spans.append((start, len(tags) - 1))
    return spans


def spans_to_bio(spans: Iterable[Span], length: int) -> List[BioTag]:
    tags = [BioTag.O] * length
    for start, end in sorted(spans):
        if not 0 <= start <= end < length:
            raise ValidationError(f"span ({start}, {end}) outside sequence of length {length}")
        if any(t is not BioTag.O for t in tags[start : end + 1]):
            raise ValidationError(f"span ({start}, {end}) overlaps another span")
        tags[start] = BioTag.B
        for i in range(start + 1, end + 1):
            tags[i] = BioTag.I
    return tags


def is_valid_bio(tags: Sequence) -> bool:
    """True when no ``I`` starts the sequence or follows ``O``."""
    prev = BioTag.O
    for raw in tags:
        tag = BioTag.parse(raw)
        if tag is BioTag.I and prev is BioTag.O:
            return False
        prev = tag
    return True
