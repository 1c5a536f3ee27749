"""Alternating two-task training and two-stage / enumerate prediction."""

from __future__ import annotations

import copy
import logging
import math
import random
import warnings
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import torch

from .config import RunConfig
from .evaluation import score_identification, score_mentions
from .model import EventDetector
from .types import AnnotatedSentence, BioTag, Ontology, Sentence, spans_to_bio

logger = logging.getLogger(__name__)

IDENTIFICATION = "identification"
LOCALIZATION = "localization"


class TrainingDiverged(RuntimeError):
    def __init__(self, batch_id: str, loss: float):
        self.batch_id = batch_id
        self.loss = loss
        super().__init__(f"non-finite loss {loss} on batch {batch_id}")


@dataclass(frozen=True)
class LocalizationExample:
    sentence: Sentence
    event_type: str
    tags: Tuple[BioTag, ...]


@dataclass(frozen=True)
class TaskBatch:
    task: str
    batch_id: str
    items: tuple


@dataclass
class TrainResult:
    model: EventDetector
    history: List[Dict[str, float]] = field(default_factory=list)
    best_epoch: Optional[int] = None


def positive_localization_examples(train: Sequence[AnnotatedSentence]) -> List[LocalizationExample]:
    """One (sentence, gold type, BIO tags) example per type present."""
    out = []
    for s in train:
        for t in sorted(s.event_types):
            tags = spans_to_bio(_disjoint(s.spans_for(t)), len(s.sentence))
            out.append(LocalizationExample(s.sentence, t, tuple(tags)))
    return out


def _disjoint(spans: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
    # BIO cannot encode overlapping spans of one type; keep the earliest.
    kept = []
    for s, e in sorted(spans):
        if not kept or s > kept[-1][1]:
            kept.append((s, e))
    return kept


def negative_localization_examples(
    train: Sequence[AnnotatedSentence], ontology: Ontology, count: int, rng: random.Random
) -> List[LocalizationExample]:
    """``count`` all-O examples pairing sentences with types they do not bear."""
    pool = [(s, t) for s in train for t in ontology.names if t not in s.event_types]
    if not pool or count <= 0:
        return []
    picks = rng.sample(range(len(pool)), count) if count <= len(pool) else [rng.randrange(len(pool)) for _ in range(count)]
    return [
        LocalizationExample(pool[i][0].sentence, pool[i][1], (BioTag.O,) * len(pool[i][0].sentence))
        for i in picks
    ]


def _batched(items: list, size: int) -> List[tuple]:
    return [tuple(items[i : i + size]) for i in range(0, len(items), size)]


def _epoch_rng(seed: int, epoch: int) -> random.Random:
    return random.Random(seed * 1_000_003 + epoch)


def make_task_batches(
    train: Sequence[AnnotatedSentence],
    ontology: Ontology,
    config: RunConfig,
    seed: int,
    epoch: int = 0,
) -> Iterator[TaskBatch]:
    """One epoch of strictly alternating identification/localization batches.

    The shorter stream is reshuffled and recycled until the longer one is
    exhausted.
    """
    if not train:
        raise ValueError("cannot batch an empty training set")
    rng = _epoch_rng(seed, epoch)
    id_items = list(train)
    rng.shuffle(id_items)
    positives = positive_localization_examples(train)
    negatives = negative_localization_examples(
        train, ontology, int(math.floor(config.negative_ratio * len(positives) + 0.5)), rng
    )
    loc_items = positives + negatives
    rng.shuffle(loc_items)
    if not loc_items:
        warnings.warn("no event mentions in the training set; only identification batches are produced")

    id_batches = _batched(id_items, config.batch_size)
    loc_batches = _batched(loc_items, config.batch_size)
    if not loc_batches:
        for i, b in enumerate(id_batches):
            yield TaskBatch(IDENTIFICATION, f"e{epoch}:id{i}", b)
        return

    n = max(len(id_batches), len(loc_batches))
    streams = []
    for items, batches in ((id_items, id_batches), (loc_items, loc_batches)):
        while len(batches) < n:
            extra = list(items)
            rng.shuffle(extra)
            batches = batches + _batched(extra, config.batch_size)
        streams.append(batches[:n])
    for i in range(n):
        yield TaskBatch(IDENTIFICATION, f"e{epoch}:id{i}", streams[0][i])
        yield TaskBatch(LOCALIZATION, f"e{epoch}:loc{i}", streams[1][i])


def _batch_loss(model: EventDetector, batch: TaskBatch) -> torch.Tensor:
    if batch.task == IDENTIFICATION:
        losses = [model.identification_loss(ex) for ex in batch.items]
    else:
        losses = [model.localization_loss(ex.sentence, ex.event_type, ex.tags) for ex in batch.items]
    return torch.stack(losses).mean()


def _lr_lambda(config: RunConfig, total_steps: int):
    def factor(step: int) -> float:
        if config.warmup_steps and step < config.warmup_steps:
            return (step + 1) / config.warmup_steps
        if config.schedule == "constant":
            return 1.0
        remaining = total_steps - step
        return max(0.0, remaining / max(1, total_steps - config.warmup_steps))

    return factor


def evaluate_model(model: EventDetector, data: Sequence[AnnotatedSentence]) -> Dict[str, float]:
    preds = predict([s.sentence for s in data], model)
    mention = score_mentions(preds, data)
    ident = score_identification(
        {p.id: p.event_types for p in preds}, {g.id: g.event_types for g in data}
    )
    return {"mention_f1": mention.f1, "identification_f1": ident.f1}


def train(
    train_set: Sequence[AnnotatedSentence],
    ontology: Ontology,
    config: RunConfig,
    dev: Optional[Sequence[AnnotatedSentence]] = None,
    model: Optional[EventDetector] = None,
) -> TrainResult:
    """Fit identification and localization jointly.

    Batches of the two tasks alternate; gradients are clipped and the learning
    rate follows a linear warmup/decay schedule. With ``dev`` data, the
    epoch with the best dev mention F1 is restored at the end.
    """
    torch.set_num_threads(config.threads)
    train_set = list(train_set)
    if model is None:
        model = EventDetector.build(config, train_set, ontology)
    result = TrainResult(model)
    if config.epochs == 0:
        return result

    steps_per_epoch = sum(1 for _ in make_task_batches(train_set, ontology, config, config.seed, 0))
    total_steps = steps_per_epoch * config.epochs
    decay, no_decay = [], []
    for name, p in model.named_parameters():
        (no_decay if name.endswith("bias") else decay).append(p)
    optimizer = torch.optim.AdamW(
        [{"params": decay, "weight_decay": config.weight_decay}, {"params": no_decay, "weight_decay": 0.0}],
        lr=config.learning_rate,
        eps=config.adam_epsilon,
    )
    scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, _lr_lambda(config, total_steps))

    best_f1 = -1.0
    best_state = None
    with torch.random.fork_rng():
        torch.manual_seed(config.seed)
        for epoch in range(config.epochs):
            model.train()
            sums = {IDENTIFICATION: [0.0, 0], LOCALIZATION: [0.0, 0]}
            for batch in make_task_batches(train_set, ontology, config, config.seed, epoch):
                loss = _batch_loss(model, batch)
                value = float(loss.detach())
                if not math.isfinite(value):
                    raise TrainingDiverged(batch.batch_id, value)
                optimizer.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
                optimizer.step()
                scheduler.step()
                sums[batch.task][0] += value
                sums[batch.task][1] += 1

            record = {"epoch": epoch}
            for task, (total, count) in sums.items():
                record[f"{task}_loss"] = total / count if count else 0.0
            record["loss"] = record[f"{IDENTIFICATION}_loss"] + record[f"{LOCALIZATION}_loss"]
            if dev:
                for k, v in evaluate_model(model, dev).items():
                    record[f"dev_{k}"] = v
                if record["dev_mention_f1"] > best_f1:
                    best_f1 = record["dev_mention_f1"]
                    best_state = copy.deepcopy(model.state_dict())
                    result.best_epoch = epoch
            logger.info("epoch %d: %s", epoch, record)
            result.history.append(record)

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return result


def predict(
    sentences: Sequence[Union[Sentence, AnnotatedSentence]],
    model: EventDetector,
    mode: str = "two_stage",
) -> List[AnnotatedSentence]:
    """Detect event mentions.

    ``two_stage`` localizes only the identified types; ``enumerate`` tries
    every ontology type and keeps non-empty results.
    """
    if mode not in ("two_stage", "enumerate"):
        raise ValueError(f"unknown prediction mode {mode!r}")
    was_training = model.training
    model.eval()
    out = []
    try:
        for s in sentences:
            sentence = s.sentence if isinstance(s, AnnotatedSentence) else s
            types = model.identify(sentence) if mode == "two_stage" else model.ontology.names
            mentions = []
            for t in sorted(types):
                mentions.extend(model.localize(sentence, t))
            out.append(AnnotatedSentence(sentence, tuple(mentions)))
    finally:
        model.train(was_training)
    return out
