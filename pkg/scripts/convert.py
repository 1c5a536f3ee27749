"""Convert source event-detection datasets to the canonical JSONL corpus format.

Subcommands:
  fewevent   FewEvent JSON (type name -> list of instances)
  maven      MAVEN document JSONL (content + events with token offsets)
  oneie      ACE-style sentence JSONL as produced by the OneIE preprocessing
  keywords   fill ontology keywords with the most frequent triggers of a corpus

Each converter writes a corpus and, with --ontology, an ontology whose
verbalizers are derived from the type names (replace them with
``idloc select-verbalizers`` afterwards).
"""

import argparse
import json
import re
import warnings
from collections import Counter
from pathlib import Path

from idloc.corpus import load_corpus, load_ontology, save_corpus, save_ontology
from idloc.types import AnnotatedSentence, EventMention, EventTypeSpec, Ontology, Sentence


def name_verbalizer(type_name):
    """``Business.Lay_off`` / ``Life:Die`` / ``Catastrophe`` -> ``lay off`` / ``die`` / ``catastrophe``."""
    leaf = re.split(r"[.:/]", type_name)[-1]
    words = re.sub(r"([a-z])([A-Z])", r"\1 \2", leaf).replace("_", " ").replace("-", " ").lower().split()
    return " ".join(words) or type_name.lower()


def ontology_for(type_names):
    return Ontology(tuple(EventTypeSpec(t, (name_verbalizer(t),)) for t in sorted(type_names)))


def _find(tokens, trigger):
    n = len(trigger)
    lowered = [t.lower() for t in tokens]
    target = [t.lower() for t in trigger]
    for i in range(len(tokens) - n + 1):
        if lowered[i : i + n] == target:
            return i
    return None


def fewevent_sentences(obj):
    """Instances are dicts with ``tokens`` and ``trigger`` (words) or lists ``[text, trigger, ...]``."""
    out, skipped = [], 0
    for type_name in sorted(obj):
        for i, inst in enumerate(obj[type_name]):
            if isinstance(inst, dict):
                tokens = list(inst["tokens"])
                trigger = inst["trigger"] if isinstance(inst["trigger"], list) else inst["trigger"].split()
                position = inst.get("position")
            else:
                tokens, trigger, position = inst[0].split(), inst[1].split(), None
            if position is not None:
                start, end = int(position[0]), int(position[1]) - 1
            else:
                start = _find(tokens, trigger)
                if start is None:
                    skipped += 1
                    continue
                end = start + len(trigger) - 1
            out.append(AnnotatedSentence(Sentence(f"{type_name}-{i}", tuple(tokens)), (EventMention(type_name, start, end),)))
    if skipped:
        warnings.warn(f"skipped {skipped} instances whose trigger was not found in the sentence")
    return out


def maven_sentences(lines):
    """One sentence per ``content`` entry; sentences without events become NULL instances."""
    out = []
    for line in lines:
        if not line.strip():
            continue
        doc = json.loads(line)
        by_sent = {}
        for event in doc.get("events", []):
            for m in event["mention"]:
                start, end = m["offset"]
                by_sent.setdefault(m["sent_id"], []).append(EventMention(event["type"], start, end - 1))
        for sid, content in enumerate(doc["content"]):
            sentence = Sentence(f"{doc['id']}-{sid}", tuple(content["tokens"]), doc["id"])
            out.append(AnnotatedSentence(sentence, tuple(by_sent.get(sid, ()))))
    return out


def oneie_sentences(lines):
    out = []
    for line in lines:
        if not line.strip():
            continue
        rec = json.loads(line)
        mentions = tuple(
            EventMention(e["event_type"], e["trigger"]["start"], e["trigger"]["end"] - 1) for e in rec.get("event_mentions", [])
        )
        out.append(AnnotatedSentence(Sentence(rec["sent_id"], tuple(rec["tokens"]), rec.get("doc_id")), mentions))
    return out


def fill_keywords(ontology, sentences, n):
    """Most frequent lowercased trigger strings per type; ties break alphabetically."""
    counts = {t: Counter() for t in ontology.names}
    for s in sentences:
        for m in s.mentions:
            if m.event_type in counts:
                counts[m.event_type][" ".join(s.sentence.tokens[m.trigger_start : m.trigger_end + 1]).lower()] += 1
    specs = []
    for spec in ontology.types:
        ranked = sorted(counts[spec.name].items(), key=lambda kv: (-kv[1], kv[0]))
        specs.append(EventTypeSpec(spec.name, spec.verbalizers, spec.definition, tuple(w for w, _ in ranked[:n]), n))
    return Ontology(tuple(specs), ontology.null_verbalizer)


def _write(args, sentences):
    n_null = sum(s.is_null for s in sentences)
    if getattr(args, "null_pool", None):
        # Keep the pool disjoint from the corpus so inject-null can draw from it.
        save_corpus(args.null_pool, [s for s in sentences if s.is_null])
        sentences = [s for s in sentences if not s.is_null]
    save_corpus(args.output, sentences)
    if args.ontology:
        save_ontology(args.ontology, ontology_for({m.event_type for s in sentences for m in s.mentions}))
    print(f"{len(sentences) + n_null} sentences ({n_null} without events)")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="source", required=True)
    for name in ("fewevent", "maven", "oneie"):
        p = sub.add_parser(name)
        p.add_argument("input", nargs="+")
        p.add_argument("--output", required=True)
        p.add_argument("--ontology", help="also write an ontology covering the observed types")
        if name == "maven":
            p.add_argument("--null-pool", help="write event-free sentences here instead of to --output")
    p = sub.add_parser("keywords")
    p.add_argument("--corpus", required=True, help="use training data only, never test data")
    p.add_argument("--ontology", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--n", type=int, default=3)
    args = parser.parse_args(argv)

    if args.source == "keywords":
        ontology = load_ontology(args.ontology)
        save_ontology(args.output, fill_keywords(ontology, load_corpus(args.corpus).sentences, args.n))
        return
    sentences = []
    for path in args.input:
        text = Path(path).read_text(encoding="utf-8")
        if args.source == "fewevent":
            sentences += fewevent_sentences(json.loads(text))
        elif args.source == "maven":
            sentences += maven_sentences(text.splitlines())
        else:
            sentences += oneie_sentences(text.splitlines())
    _write(args, sentences)


if __name__ == "__main__":
    main()
