"""NULL-injection robustness runs on the synthetic toy benchmark."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from .config import RunConfig
from .corpus import Corpus, FewShotSplit, inject_null_instances, sample_few_shot
from .evaluation import ScoreReport, mean_stdev, score_mentions
from .toy import TOY_ONTOLOGY, make_null_pool, make_toy_corpus
from .training import predict, train
from .types import AnnotatedSentence

TOY_BENCH_CONFIG = RunConfig(learning_rate=1e-2, batch_size=4, epochs=30)


@dataclass
class NullRun:
    ratio: float
    seed: int
    report: ScoreReport
    n_injected: int
    # Injected NULL sentences that received at least one predicted mention.
    null_hits: List[str]


def _run(split: FewShotSplit, eval_set: Sequence[AnnotatedSentence], ratio: float, seed: int, config: RunConfig) -> NullRun:
    model = train(split.train, TOY_ONTOLOGY, config.replace(seed=seed)).model
    preds = {p.id: p for p in predict(list(split.train) + list(split.test), model)}
    hits = sorted(i for i in split.injected_null_ids if preds[i].mentions)
    report = score_mentions([preds[s.id] for s in eval_set], eval_set)
    return NullRun(ratio, seed, report, len(split.injected_null_ids), hits)


def run_null_benchmark(
    ratios: Sequence[float] = (0.2, 0.5, 1.0),
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    corpus: Optional[Sequence[AnnotatedSentence]] = None,
    pool: Optional[Sequence[AnnotatedSentence]] = None,
    config: RunConfig = TOY_BENCH_CONFIG,
) -> Dict[float, List[NullRun]]:
    """Overfit the toy corpus with NULL sentences injected at each ratio.

    The seed drives both the injected sample and training. Scores are
    training-set mention scores including the injected sentences.
    """
    corpus = tuple(corpus if corpus is not None else make_toy_corpus())
    pool = list(pool if pool is not None else make_null_pool(40))
    results: Dict[float, List[NullRun]] = {}
    for ratio in ratios:
        runs = []
        for seed in seeds:
            split = inject_null_instances(FewShotSplit(corpus, (), 0, seed), ratio, pool, seed)
            runs.append(_run(split, split.train, ratio, seed, config))
        results[ratio] = runs
    return results


def run_heldout_null_benchmark(
    ratios: Sequence[float] = (0.2, 0.5, 1.0),
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    k: int = 5,
    config: RunConfig = TOY_BENCH_CONFIG,
) -> Dict[float, List[NullRun]]:
    """K-shot variant: train on a sampled split, score on its held-out side."""
    corpus = Corpus(tuple(make_toy_corpus(60, n_null=0, n_multi=6, seed=1000)), TOY_ONTOLOGY)
    pool = make_null_pool(120, seed=1000)
    results: Dict[float, List[NullRun]] = {}
    for ratio in ratios:
        runs = []
        for seed in seeds:
            split = inject_null_instances(sample_few_shot(corpus, k, seed), ratio, pool, seed)
            runs.append(_run(split, split.test, ratio, seed, config))
        results[ratio] = runs
    return results


def f1_spread(runs: Sequence[NullRun]):
    """Mean and sample standard deviation of F1 across seeds."""
    return mean_stdev([r.report.f1 for r in runs])
