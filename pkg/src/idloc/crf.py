"""Three-tag linear-chain CRF: partition function, path scores, Viterbi.

Tag indices follow :class:`BioTag` (O=0, B=1, I=2). A path ``y`` scores

    start[y_0] + sum_i emissions[i, y_i] + sum_i transitions[y_{i-1}, y_i] + end[y_{n-1}]

With BIO constraints, O->I and a sequence-initial I get -inf potentials.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np
import torch

from .types import NUM_TAGS, BioTag, ValidationError, is_valid_bio

NEG_INF = float("-inf")


def constraint_masks(dtype=torch.float32) -> Tuple[torch.Tensor, torch.Tensor]:
    """Additive masks (transitions, start) that forbid O->I and initial I."""
    trans = torch.zeros(NUM_TAGS, NUM_TAGS, dtype=dtype)
    trans[BioTag.O, BioTag.I] = NEG_INF
    start = torch.zeros(NUM_TAGS, dtype=dtype)
    start[BioTag.I] = NEG_INF
    return trans, start


def apply_constraints(
    transitions: torch.Tensor, start: torch.Tensor
) -> Tuple[torch.Tensor, torch.Tensor]:
    mask_t, mask_s = constraint_masks(transitions.dtype)
    return transitions + mask_t, start + mask_s


def crf_log_partition(
    emissions: torch.Tensor, transitions: torch.Tensor, start: torch.Tensor, end: torch.Tensor
) -> torch.Tensor:
    """log Z by the forward algorithm in log space. ``emissions`` is (n, 3)."""
    alpha = start + emissions[0]
    for i in range(1, emissions.shape[0]):
        alpha = torch.logsumexp(alpha.unsqueeze(1) + transitions, dim=0) + emissions[i]
    return torch.logsumexp(alpha + end, dim=0)


def crf_sequence_score(
    emissions: torch.Tensor,
    tags: Sequence[int],
    transitions: torch.Tensor,
    start: torch.Tensor,
    end: torch.Tensor,
) -> torch.Tensor:
    idx = torch.as_tensor([int(t) for t in tags], dtype=torch.long)
    score = start[idx[0]] + emissions[torch.arange(len(idx)), idx].sum() + end[idx[-1]]
    if len(idx) > 1:
        score = score + transitions[idx[:-1], idx[1:]].sum()
    return score


def crf_nll(
    emissions: torch.Tensor,
    tags: Sequence,
    transitions: torch.Tensor,
    start: torch.Tensor,
    end: torch.Tensor,
    constrained: bool = True,
) -> torch.Tensor:
    """Negative log-probability of ``tags``."""
    tags = [BioTag.parse(t) for t in tags]
    if len(tags) != emissions.shape[0]:
        raise ValidationError(f"{len(tags)} tags for {emissions.shape[0]} positions")
    if constrained:
        if not is_valid_bio(tags):
            raise ValidationError(f"gold tags violate BIO constraints: {[t.name for t in tags]}")
        transitions, start = apply_constraints(transitions, start)
    log_z = crf_log_partition(emissions, transitions, start, end)
    return log_z - crf_sequence_score(emissions, tags, transitions, start, end)


def viterbi_decode(
    emissions: torch.Tensor,
    transitions: torch.Tensor,
    start: torch.Tensor,
    end: torch.Tensor,
    constrained: bool = True,
) -> List[BioTag]:
    """Highest-scoring tag path. Ties prefer O, then B, then I."""
    if constrained:
        transitions, start = apply_constraints(transitions, start)
    em = emissions.detach().to(torch.float64).numpy()
    tr = transitions.detach().to(torch.float64).numpy()
    st = start.detach().to(torch.float64).numpy()
    en = end.detach().to(torch.float64).numpy()
    n = em.shape[0]
    if n == 0:
        raise ValueError("cannot decode an empty sequence")

    score = st + em[0]
    backpointers = np.zeros((n, NUM_TAGS), dtype=np.int64)
    for i in range(1, n):
        cand = score[:, None] + tr
        # np.argmax returns the first maximum, i.e. the lowest tag index.
        backpointers[i] = np.argmax(cand, axis=0)
        score = cand[backpointers[i], np.arange(NUM_TAGS)] + em[i]
    best = int(np.argmax(score + en))
    path = [best]
    for i in range(n - 1, 0, -1):
        best = int(backpointers[i, best])
        path.append(best)
    return [BioTag(t) for t in reversed(path)]
