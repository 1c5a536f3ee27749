"""Batch command line: train, predict, evaluate and corpus preparation.

Exit codes: 0 success, 1 validation error (bad flags, missing or malformed
input), 2 runtime failure (including divergent training).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import torch

from .config import PATH_FIELDS, PRESETS, RunConfig, load_config
from .corpus import (
    CorpusError,
    FewShotSplit,
    inject_null_instances,
    load_corpus,
    load_ontology,
    sample_few_shot,
    save_corpus,
    save_ontology,
    save_predictions,
)
from .encoder import ConfigurationError
from .evaluation import AlignmentError, report_json, score_identification, score_mentions
from .model import EventDetector, build_encoder
from .training import TrainingDiverged, predict, train
from .types import ValidationError
from .verbalizers import select_verbalizers

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

logger = logging.getLogger("idloc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), help="hyperparameter preset applied before --config")
    p.add_argument("--config", help="JSON or key=value config file")
    for f in dataclasses.fields(RunConfig):
        if f.name in PATH_FIELDS or f.name in ("seed", "threads"):
            continue
        flag = "--" + f.name.replace("_", "-")
        kind = str(f.type)
        if "bool" in kind:
            p.add_argument(flag, dest=f.name, default=None, choices=["true", "false"])
        else:
            p.add_argument(flag, dest=f.name, default=None, type=int if kind.startswith("int") else str)


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="idloc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model and save it to --out")
    _add_config_flags(p)
    _add_run_flags(p)
    p.add_argument("--train", dest="train_path")
    p.add_argument("--dev", dest="dev_path")
    p.add_argument("--ontology", dest="ontology_path")
    p.add_argument("--out", required=True, help="model directory to write")

    p = sub.add_parser("predict", help="detect events with a saved model")
    _add_run_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--mode", choices=["two_stage", "enumerate"], default="two_stage")

    p = sub.add_parser("evaluate", help="score predictions against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--match", choices=["exact", "overlap"], default="exact")
    p.add_argument("--output", help="optional JSON report path")

    p = sub.add_parser("select-verbalizers", help="pick verbalizers from training data")
    _add_config_flags(p)
    _add_run_flags(p)
    p.add_argument("--train", dest="train_path")
    p.add_argument("--ontology", dest="ontology_path")
    p.add_argument("--top-n", type=int, default=1)
    p.add_argument("--output", required=True, help="ontology JSON with selected verbalizers")

    p = sub.add_parser("sample-split", help="draw a K-shot train/test split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--ontology")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)

    p = sub.add_parser("inject-null", help="add NULL sentences to a split")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-only", action="store_true", help="leave the test side untouched")
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    base = PRESETS[args.preset] if args.preset else RunConfig()
    config = load_config(args.config, base) if args.config else base
    overrides = {}
    for f in dataclasses.fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    return RunConfig.from_mapping(overrides, config)


def _require(value: Optional[str], what: str) -> str:
    if not value:
        raise UsageError(f"{what} is required (flag or config file)")
    return value


def _set_threads(n: Optional[int]) -> None:
    if n is not None:
        if n < 1:
            raise UsageError("--threads must be >= 1")
        torch.set_num_threads(n)


def cmd_train(args) -> int:
    config = _run_config(args)
    torch.set_num_threads(config.threads)
    ontology = load_ontology(_require(config.ontology_path, "--ontology"), config.max_keywords)
    train_set = load_corpus(_require(config.train_path, "--train"), ontology).sentences
    dev = load_corpus(config.dev_path, ontology).sentences if config.dev_path else None
    result = train(train_set, ontology, config, dev=dev)
    out = Path(args.out)
    result.model.save(out)
    (out / "history.json").write_text(json.dumps(result.history, indent=2, sort_keys=True) + "\n")

    preds = predict(train_set, result.model)
    mention = score_mentions(preds, train_set)
    ident = score_identification({p.id: p.event_types for p in preds}, {g.id: g.event_types for g in train_set})
    report = {"train_mention": mention.to_json(), "train_identification": ident.to_json()}
    (out / "train_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(mention.format_table("mentions"))
    print(f"train mention F1 {mention.f1:.4f}  identification F1 {ident.f1:.4f}")
    return EXIT_OK


def cmd_predict(args) -> int:
    _set_threads(args.threads)
    if args.seed is not None:
        torch.manual_seed(args.seed)
    model = EventDetector.load(_existing(args.model))
    sentences = load_corpus(args.input).sentences
    save_predictions(args.output, predict(sentences, model, args.mode))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    pred = load_corpus(args.pred).sentences
    gold = load_corpus(args.gold).sentences
    report = score_mentions(pred, gold, args.match)
    print(report.format_table("mentions"))
    print(f"F1 {report.f1:.4f}")
    if args.output:
        Path(args.output).write_text(report_json(report, match=args.match) + "\n")
    return EXIT_OK


def cmd_select_verbalizers(args) -> int:
    config = _run_config(args)
    torch.set_num_threads(config.threads)
    ontology = load_ontology(_require(config.ontology_path, "--ontology"), config.max_keywords)
    train_set = load_corpus(_require(config.train_path, "--train"), ontology).sentences
    with torch.random.fork_rng():
        torch.manual_seed(config.seed)
        encoder = build_encoder(config, train_set, ontology)
    selected = select_verbalizers(train_set, ontology, encoder, args.top_n, config.prompt)
    save_ontology(args.output, ontology.with_verbalizers(selected))
    for name, words in selected.items():
        print(f"{name}\t{', '.join(words)}")
    return EXIT_OK


def cmd_sample_split(args) -> int:
    ontology = load_ontology(args.ontology) if args.ontology else None
    corpus = load_corpus(args.corpus, ontology)
    split = sample_few_shot(corpus, args.k, args.seed, ontology)
    save_corpus(args.out_train, split.train)
    save_corpus(args.out_test, split.test)
    print(f"train {len(split.train)}  test {len(split.test)}")
    return EXIT_OK


def cmd_inject_null(args) -> int:
    train_set = load_corpus(args.train).sentences
    test_set = load_corpus(args.test).sentences
    pool = load_corpus(args.pool).sentences
    split = FewShotSplit(train_set, test_set, k=0, seed=args.seed)
    out = inject_null_instances(split, args.ratio, pool, args.seed, apply_to_test=not args.train_only)
    save_corpus(args.out_train, out.train)
    save_corpus(args.out_test, out.test)
    print(f"injected {len(out.injected_null_ids)} NULL sentences")
    return EXIT_OK


def _existing(path: str) -> str:
    if not Path(path).exists():
        raise FileNotFoundError(2, "No such file or directory", path)
    return path


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "select-verbalizers": cmd_select_verbalizers,
    "sample-split": cmd_sample_split,
    "inject-null": cmd_inject_null,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Execute one command and return its exit code."""
    try:
        args = build_parser().parse_args(list(sys.argv[1:] if argv is None else argv))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_INVALID
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except TrainingDiverged as exc:
        print(f"error: training diverged at batch {exc.batch_id} (loss {exc.loss})", file=sys.stderr)
        return EXIT_RUNTIME
    except (UsageError, ValidationError, ConfigurationError, AlignmentError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        logger.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())
