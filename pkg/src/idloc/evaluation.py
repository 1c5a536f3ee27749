"""Set-based precision/recall/F1 for identification and event mentions."""

from __future__ import annotations

import json
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import AbstractSet, Dict, Iterable, List, Mapping, Sequence, Tuple, Union

from .types import AnnotatedSentence, EventMention


class AlignmentError(ValueError):
    def __init__(self, only_pred: Iterable[str], only_gold: Iterable[str]):
        self.only_pred = sorted(only_pred)
        self.only_gold = sorted(only_gold)
        super().__init__(
            f"sentence ids do not align: {len(self.only_pred)} only in predictions {self.only_pred[:5]}, "
            f"{len(self.only_gold)} only in gold {self.only_gold[:5]}"
        )


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class ScoreReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    precision_undefined: bool = False
    recall_undefined: bool = False
    per_type: Mapping[str, "ScoreReport"] = field(default_factory=dict)

    @classmethod
    def from_counts(cls, counts: Counts, per_type: Mapping[str, Counts] = None) -> "ScoreReport":
        tp, fp, fn = counts.tp, counts.fp, counts.fn
        # 0/0 is reported as 0 and flagged.
        p_undef = tp + fp == 0
        r_undef = tp + fn == 0
        p = 0.0 if p_undef else tp / (tp + fp)
        r = 0.0 if r_undef else tp / (tp + fn)
        f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        breakdown = {t: cls.from_counts(c) for t, c in sorted((per_type or {}).items())}
        return cls(p, r, f1, tp, fp, fn, p_undef, r_undef, breakdown)

    def to_json(self) -> dict:
        out = {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision_undefined": self.precision_undefined,
            "recall_undefined": self.recall_undefined,
        }
        if self.per_type:
            out["per_type"] = {t: r.to_json() for t, r in self.per_type.items()}
        return out

    def format_table(self, title: str = "all") -> str:
        rows = [(title, self)] + list(self.per_type.items())
        width = max(len(name) for name, _ in rows)
        lines = [f"{'type':<{width}}  {'P':>6}  {'R':>6}  {'F1':>6}  {'tp':>5}  {'fp':>5}  {'fn':>5}"]
        for name, r in rows:
            lines.append(
                f"{name:<{width}}  {r.precision:6.4f}  {r.recall:6.4f}  {r.f1:6.4f}  {r.tp:5d}  {r.fp:5d}  {r.fn:5d}"
            )
        return "\n".join(lines)


def _align(pred_ids: Iterable[str], gold_ids: Iterable[str]) -> List[str]:
    pred_ids, gold_ids = list(pred_ids), list(gold_ids)
    p, g = set(pred_ids), set(gold_ids)
    if p != g or len(p) != len(pred_ids) or len(g) != len(gold_ids):
        if p != g:
            raise AlignmentError(p - g, g - p)
        raise ValueError("duplicate sentence ids")
    return sorted(g)


def _overlaps(a: EventMention, b: EventMention) -> bool:
    return a.event_type == b.event_type and a.trigger_start <= b.trigger_end and b.trigger_start <= a.trigger_end


def _max_matching(pred: Sequence[EventMention], gold: Sequence[EventMention]) -> List[Tuple[int, int]]:
    """Maximum one-to-one matching under span overlap (augmenting paths)."""
    match_of_gold: Dict[int, int] = {}

    def augment(i: int, seen: set) -> bool:
        for j, g in enumerate(gold):
            if j in seen or not _overlaps(pred[i], g):
                continue
            seen.add(j)
            if j not in match_of_gold or augment(match_of_gold[j], seen):
                match_of_gold[j] = i
                return True
        return False

    for i in range(len(pred)):
        augment(i, set())
    return [(i, j) for j, i in match_of_gold.items()]


def _sentence_counts(
    pred: Sequence[EventMention], gold: Sequence[EventMention], match: str
) -> Dict[str, Counts]:
    per_type: Dict[str, Counts] = defaultdict(Counts)
    if match == "exact":
        p, g = Counter(pred), Counter(gold)
        for m in p.keys() | g.keys():
            tp = min(p[m], g[m])
            per_type[m.event_type] += Counts(tp, p[m] - tp, g[m] - tp)
        return per_type
    matched = _max_matching(pred, gold)
    hit_p = {i for i, _ in matched}
    hit_g = {j for _, j in matched}
    for i, m in enumerate(pred):
        per_type[m.event_type] += Counts(1, 0, 0) if i in hit_p else Counts(0, 1, 0)
    for j, m in enumerate(gold):
        if j not in hit_g:
            per_type[m.event_type] += Counts(0, 0, 1)
    return per_type


MentionSource = Union[Sequence[AnnotatedSentence], Mapping[str, Sequence[EventMention]]]


def _mentions_by_id(source: MentionSource) -> Tuple[List[str], Dict[str, Sequence[EventMention]]]:
    if isinstance(source, Mapping):
        return list(source), dict(source)
    return [s.id for s in source], {s.id: s.mentions for s in source}


def score_mentions(pred: MentionSource, gold: MentionSource, match: str = "exact") -> ScoreReport:
    """Micro P/R/F1 over event mentions, matched one-to-one by sentence.

    Either side may be annotated sentences or a mapping from sentence id to
    a raw mention list (which, unlike annotated sentences, may repeat a
    mention; repeats beyond the gold count are false positives).
    ``match="exact"`` needs identical type and span; ``"overlap"`` is a
    relaxed mode accepting any same-type overlapping span.
    """
    if match not in ("exact", "overlap"):
        raise ValueError(f"unknown match mode {match!r}")
    pred_ids, pred_by = _mentions_by_id(pred)
    gold_ids, gold_by = _mentions_by_id(gold)
    ids = _align(pred_ids, gold_ids)
    per_type: Dict[str, Counts] = defaultdict(Counts)
    for sid in ids:
        for t, c in _sentence_counts(list(pred_by[sid]), list(gold_by[sid]), match).items():
            per_type[t] += c
    total = sum(per_type.values(), Counts())
    return ScoreReport.from_counts(total, per_type)


def score_identification(
    pred_type_sets: Mapping[str, AbstractSet[str]], gold_type_sets: Mapping[str, AbstractSet[str]]
) -> ScoreReport:
    """Micro P/R/F1 over (sentence, type) pairs."""
    ids = _align(pred_type_sets.keys(), gold_type_sets.keys())
    per_type: Dict[str, Counts] = defaultdict(Counts)
    for sid in ids:
        p, g = set(pred_type_sets[sid]), set(gold_type_sets[sid])
        for t in p | g:
            per_type[t] += Counts(int(t in p and t in g), int(t in p and t not in g), int(t in g and t not in p))
    total = sum(per_type.values(), Counts())
    return ScoreReport.from_counts(total, per_type)


METRICS = ("precision", "recall", "f1")


def mean_stdev(values: Sequence[float]) -> Tuple[float, float]:
    if len(values) < 2:
        raise ValueError("a sample standard deviation needs at least two values")
    return statistics.mean(values), statistics.stdev(values)


def summarize_runs(reports: Sequence[ScoreReport]) -> Dict[str, Tuple[float, float]]:
    """Sample mean and sample standard deviation of each metric across runs."""
    if len(reports) < 2:
        raise ValueError("summarizing runs needs at least two reports")
    return {m: mean_stdev([getattr(r, m) for r in reports]) for m in METRICS}


def report_json(report: ScoreReport, **extra) -> str:
    return json.dumps({**report.to_json(), **extra}, indent=2, sort_keys=True)
