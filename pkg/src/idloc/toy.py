"""Synthetic five-type event corpus for hermetic end-to-end runs."""

from __future__ import annotations

import random
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .types import AnnotatedSentence, EventMention, EventTypeSpec, Ontology, Sentence

START = "Personnel:Start-Position"
END = "Personnel:End-Position"
ATTACK = "Conflict:Attack"
DIE = "Life:Die"
LAYOFF = "Business:Lay-Off"

TOY_ONTOLOGY = Ontology(
    (
        EventTypeSpec(
            START,
            ("hire",),
            "A person begins working in a position for an organization.",
            ("hired", "appointed", "recruited", "named", "employed"),
        ),
        EventTypeSpec(END, ("resign",), "A person stops working in a position.", ("resigned", "quit", "retired")),
        EventTypeSpec(ATTACK, ("attack",), "An agent violently harms a target.", ("attacked", "bombed", "raided")),
        EventTypeSpec(DIE, ("die",), "A person loses their life.", ("died", "perished")),
        EventTypeSpec(LAYOFF, ("lay off",), "An organization dismisses a group of workers.", ("laid off", "cut")),
    )
)

ORGS = ["the bank", "the ministry", "the council", "the company", "the school", "the airline"]
ROLES = ["director", "manager", "minister", "coach", "officer", "teacher"]
GROUPS = ["rebels", "militants", "gunmen", "soldiers"]
PLACES = ["village", "market", "station", "embassy", "camp"]
TIMES = ["yesterday", "on monday", "last week", "in march", "this morning"]
COUNTS = ["200", "fifty", "hundreds of", "dozens of"]
NEUTRAL = ["visited", "reviewed", "discussed", "praised", "opened", "described"]
THINGS = ["report", "plan", "budget", "museum", "bridge", "proposal"]

TRIGGERS = {
    START: ["hired", "appointed", "recruited"],
    END: ["resigned", "quit"],
    ATTACK: ["attacked", "bombed", "raided"],
    DIE: ["died", "perished"],
    LAYOFF: ["laid off", "cut"],
}

Segment = Tuple[str, Optional[str]]


def _clause(event_type: str, rng: random.Random) -> List[Segment]:
    trig = rng.choice(TRIGGERS[event_type])
    if event_type == START:
        return [(rng.choice(ORGS), None), (trig, START), (f"a new {rng.choice(ROLES)}", None)]
    if event_type == END:
        return [(f"the {rng.choice(ROLES)} of {rng.choice(ORGS)}", None), (trig, END)]
    if event_type == ATTACK:
        return [(rng.choice(GROUPS), None), (trig, ATTACK), (f"the {rng.choice(PLACES)}", None)]
    if event_type == DIE:
        return [(f"a {rng.choice(ROLES)}", None), (trig, DIE), (f"near the {rng.choice(PLACES)}", None)]
    if trig == "cut":
        return [(rng.choice(ORGS), None), (trig, LAYOFF), (f"{rng.choice(COUNTS)} jobs", None)]
    return [(rng.choice(ORGS), None), (trig, LAYOFF), (f"{rng.choice(COUNTS)} workers", None)]


def _null_clause(rng: random.Random) -> List[Segment]:
    return [(rng.choice(ORGS), None), (rng.choice(NEUTRAL), None), (f"the {rng.choice(THINGS)}", None)]


MULTI_PAIRS = [(DIE, ATTACK), (END, LAYOFF), (START, END), (ATTACK, LAYOFF)]


def _render(sid: str, segments: Sequence[Segment]) -> AnnotatedSentence:
    tokens: List[str] = []
    mentions = []
    for text, event_type in segments:
        words = text.split()
        if event_type is not None:
            mentions.append(EventMention(event_type, len(tokens), len(tokens) + len(words) - 1))
        tokens.extend(words)
    return AnnotatedSentence(Sentence(sid, tuple(tokens)), tuple(mentions))


def _generate(
    n: int, make: Callable[[int, random.Random], List[Segment]], rng: random.Random, prefix: str, seen: set
) -> List[AnnotatedSentence]:
    out = []
    for i in range(n):
        while True:
            segments = make(i, rng) + [(rng.choice(TIMES), None)]
            key = tuple(t for t, _ in segments)
            if key not in seen:
                seen.add(key)
                break
        out.append(_render(f"{prefix}-{len(seen):03d}", segments))
    return out


def make_toy_corpus(
    n_sentences: int = 20, n_null: int = 4, n_multi: int = 2, seed: int = 0, prefix: str = "toy"
) -> List[AnnotatedSentence]:
    """Single-event sentences cycle through the five types; ``n_multi``
    sentences join two clauses with "after"; ``n_null`` carry no event."""
    n_single = n_sentences - n_null - n_multi
    if n_single < 0:
        raise ValueError("n_null + n_multi exceeds n_sentences")
    rng = random.Random(seed)
    names = TOY_ONTOLOGY.names
    seen: set = set()

    def single(i, r):
        return _clause(names[i % len(names)], r)

    def multi(i, r):
        first, second = MULTI_PAIRS[i % len(MULTI_PAIRS)]
        return _clause(first, r) + [("after", None)] + _clause(second, r)

    sentences = (
        _generate(n_single, single, rng, prefix, seen)
        + _generate(n_multi, multi, rng, prefix, seen)
        + _generate(n_null, lambda i, r: _null_clause(r), rng, prefix, seen)
    )
    return sentences


def make_null_pool(n: int, seed: int = 0, prefix: str = "null") -> List[AnnotatedSentence]:
    rng = random.Random(seed)
    return _generate(n, lambda i, r: _null_clause(r), rng, prefix, set())


def toy_type_counts(sentences: Sequence[AnnotatedSentence]) -> Dict[str, int]:
    counts = {name: 0 for name in TOY_ONTOLOGY.names}
    for s in sentences:
        for t in s.event_types:
            counts[t] += 1
    return counts
