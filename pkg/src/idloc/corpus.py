"""Corpus and ontology serialization, K-per-type sampling and NULL injection.

Corpus files are JSONL, one annotated sentence per line::

    {"id": "s1", "tokens": ["He", "quit"], "mentions": [{"type": "End-Position", "start": 1, "end": 1}]}

Ontology files are a single JSON object::

    {"types": [{"name": ..., "verbalizers": [...], "definition": ..., "keywords": [...]}],
     "null_verbalizer": "none"}
"""

from __future__ import annotations

import json
import math
import random
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from .types import (
    DEFAULT_MAX_KEYWORDS,
    AnnotatedSentence,
    EventMention,
    Ontology,
    Sentence,
    ValidationError,
)


class CorpusError(ValueError):
    """A corpus file could not be parsed or failed validation."""

    def __init__(self, path, problems: Sequence[Tuple[int, str]]):
        self.path = str(path)
        self.problems = list(problems)
        lines = "; ".join(f"line {n}: {msg}" for n, msg in self.problems[:10])
        more = f" (+{len(self.problems) - 10} more)" if len(self.problems) > 10 else ""
        super().__init__(f"{self.path}: {lines}{more}")


@dataclass(frozen=True)
class Corpus:
    sentences: Tuple[AnnotatedSentence, ...]
    ontology: Optional[Ontology] = None

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        ids = Counter(s.id for s in self.sentences)
        dupes = sorted(i for i, c in ids.items() if c > 1)
        if dupes:
            raise ValidationError(f"duplicate sentence ids: {dupes[:5]}")
        if self.ontology is not None:
            for s in self.sentences:
                for m in s.mentions:
                    if m.event_type not in self.ontology:
                        raise ValidationError(f"sentence {s.id!r}: unknown type {m.event_type!r}")

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)


@dataclass(frozen=True)
class FewShotSplit:
    train: Tuple[AnnotatedSentence, ...]
    test: Tuple[AnnotatedSentence, ...]
    k: int
    seed: int
    injected_null_ids: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "test", tuple(self.test))
        overlap = {s.id for s in self.train} & {s.id for s in self.test}
        if overlap:
            raise ValidationError(f"train/test overlap: {sorted(overlap)[:5]}")


# -- serialization ----------------------------------------------------------


def sentence_to_json(s: AnnotatedSentence) -> dict:
    obj = {
        "id": s.sentence.id,
        "tokens": list(s.sentence.tokens),
        "mentions": [
            {"type": m.event_type, "start": m.trigger_start, "end": m.trigger_end}
            for m in s.mentions
        ],
    }
    if s.sentence.doc_id is not None:
        obj["doc_id"] = s.sentence.doc_id
    return obj


def sentence_from_json(obj: dict) -> AnnotatedSentence:
    if not isinstance(obj, dict):
        raise ValidationError("record is not a JSON object")
    for key in ("id", "tokens"):
        if key not in obj:
            raise ValidationError(f"missing field {key!r}")
    unknown = set(obj) - {"id", "tokens", "mentions", "doc_id"}
    if unknown:
        raise ValidationError(f"unknown fields {sorted(unknown)}")
    sentence = Sentence(str(obj["id"]), tuple(obj["tokens"]), obj.get("doc_id"))
    mentions = []
    for m in obj.get("mentions", []):
        try:
            mentions.append(EventMention(m["type"], int(m["start"]), int(m["end"])))
        except KeyError as exc:
            raise ValidationError(f"mention missing field {exc.args[0]!r}") from None
    return AnnotatedSentence(sentence, tuple(mentions))


def load_corpus(
    path,
    ontology: Optional[Ontology] = None,
    format: str = "jsonl",
    unknown_types: str = "fail",
) -> Corpus:
    """Read and validate a JSONL corpus.

    ``unknown_types`` is ``"fail"`` (report an error for the record) or
    ``"skip"`` (drop mentions of types missing from ``ontology`` with a warning).
    """
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    if unknown_types not in ("fail", "skip"):
        raise ValueError(f"unknown_types must be 'fail' or 'skip', got {unknown_types!r}")
    path = Path(path)
    problems: List[Tuple[int, str]] = []
    sentences: List[AnnotatedSentence] = []
    seen_ids = {}
    skipped = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(path, [(lineno, f"JSON parse error at column {exc.colno}: {exc.msg}")])
            try:
                record = sentence_from_json(obj)
            except (ValidationError, TypeError, ValueError) as exc:
                problems.append((lineno, f"record {obj.get('id') if isinstance(obj, dict) else '?'!r}: {exc}"))
                continue
            if record.id in seen_ids:
                problems.append((lineno, f"duplicate id {record.id!r} (first on line {seen_ids[record.id]})"))
                continue
            seen_ids[record.id] = lineno
            if ontology is not None:
                bad = [m for m in record.mentions if m.event_type not in ontology]
                if bad and unknown_types == "fail":
                    names = sorted({m.event_type for m in bad})
                    problems.append((lineno, f"record {record.id!r}: unknown event types {names}"))
                    continue
                if bad:
                    skipped += len(bad)
                    record = AnnotatedSentence(
                        record.sentence, tuple(m for m in record.mentions if m.event_type in ontology)
                    )
            sentences.append(record)
    if problems:
        raise CorpusError(path, problems)
    if skipped:
        warnings.warn(f"{path}: skipped {skipped} mentions of unknown event types")
    return Corpus(tuple(sentences), ontology)


def save_predictions(path, predictions: Iterable[AnnotatedSentence]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for s in predictions:
                fh.write(json.dumps(sentence_to_json(s), ensure_ascii=False) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write predictions to {path}: {exc.strerror}") from exc


save_corpus = save_predictions


def load_ontology(path, max_keywords: int = DEFAULT_MAX_KEYWORDS) -> Ontology:
    with Path(path).open(encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CorpusError(path, [(exc.lineno, f"JSON parse error: {exc.msg}")])
    try:
        return Ontology.from_json(obj, max_keywords)
    except (KeyError, TypeError) as exc:
        raise CorpusError(path, [(0, f"malformed ontology: {exc}")]) from None


def save_ontology(path, ontology: Ontology) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(
        json.dumps(ontology.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


# -- few-shot protocol -------------------------------------------------------


def _shuffled(sentences: Sequence[AnnotatedSentence], rng: random.Random) -> List[AnnotatedSentence]:
    ordered = sorted(sentences, key=lambda s: s.id)
    rng.shuffle(ordered)
    return ordered


def sample_few_shot(corpus: Corpus, k: int, seed: int, ontology: Optional[Ontology] = None) -> FewShotSplit:
    """Place up to ``k`` supporting sentences per event type in train.

    Sentences are visited in a seeded shuffled order. The least-supported
    type is served first, preferring sentences whose other types still have
    room under their quota, so multi-type sentences overshoot as little as
    possible.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ontology = ontology or corpus.ontology
    rng = random.Random(seed)
    order = _shuffled(corpus.sentences, rng)
    type_names = ontology.names if ontology is not None else sorted(
        {t for s in order for t in s.event_types}
    )

    available = Counter(t for s in order for t in s.event_types)
    for name in type_names:
        if available[name] == 0:
            warnings.warn(f"event type {name!r} has no instances; it keeps empty support")
    quota = {name: min(k, available[name]) for name in type_names}
    support = Counter()
    chosen = set()

    while True:
        open_types = [t for t in type_names if support[t] < quota[t]]
        if not open_types:
            break
        target = min(open_types, key=lambda t: (support[t], t))
        candidates = [s for s in order if s.id not in chosen and target in s.event_types]
        if not candidates:
            quota[target] = support[target]
            continue
        pick = next(
            (
                s
                for s in candidates
                if all(support[t] < quota.get(t, 0) for t in s.event_types if t != target)
            ),
            candidates[0],
        )
        chosen.add(pick.id)
        for t in pick.event_types:
            support[t] += 1

    train = [s for s in order if s.id in chosen]
    test = [s for s in order if s.id not in chosen]
    return FewShotSplit(tuple(train), tuple(test), k, seed)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def inject_null_instances(
    split: FewShotSplit,
    ratio: float,
    pool: Sequence[AnnotatedSentence],
    seed: int,
    apply_to_test: bool = True,
) -> FewShotSplit:
    """Add NULL sentences amounting to ``ratio`` times the event-bearing count.

    The train side is filled first; the test side draws from the remaining
    pool at the same ratio unless ``apply_to_test`` is false.
    """
    if ratio < 0:
        raise ValueError("ratio must be non-negative")
    split_ids = {s.id for s in split.train} | {s.id for s in split.test}
    clash = sorted(s.id for s in pool if s.id in split_ids)
    if clash:
        raise ValidationError(f"NULL pool overlaps the split: {clash[:5]}")
    not_null = sorted(s.id for s in pool if not s.is_null)
    if not_null:
        raise ValidationError(f"NULL pool contains annotated sentences: {not_null[:5]}")
    if ratio == 0:
        return split

    rng = random.Random(seed)
    remaining = _shuffled(pool, rng)

    n_train = _round_half_up(ratio * sum(1 for s in split.train if not s.is_null))
    n_test = _round_half_up(ratio * sum(1 for s in split.test if not s.is_null)) if apply_to_test else 0
    if n_train + n_test > len(remaining):
        warnings.warn(
            f"NULL pool has {len(remaining)} sentences but {n_train + n_test} were requested; "
            "injecting as many as available"
        )
    train_extra = remaining[:n_train]
    test_extra = remaining[len(train_extra) : len(train_extra) + n_test]
    injected = frozenset(s.id for s in train_extra + test_extra) | split.injected_null_ids
    return FewShotSplit(
        split.train + tuple(train_extra),
        split.test + tuple(test_extra),
        split.k,
        split.seed,
        injected,
    )
