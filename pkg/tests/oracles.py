"""Independent reference implementations used as test oracles.

These avoid the library code paths on purpose: exhaustive enumeration,
central differences and plain loops.
"""

import itertools
import math

import numpy as np
import torch

NEG_INF = float("-inf")


def constrained_potentials(transitions, start):
    tr = np.array(transitions, dtype=np.float64, copy=True)
    st = np.array(start, dtype=np.float64, copy=True)
    tr[0, 2] = NEG_INF  # O -> I
    st[2] = NEG_INF  # initial I
    return tr, st


def path_score(em, tr, st, en, path):
    s = st[path[0]] + en[path[-1]]
    for i, y in enumerate(path):
        s += em[i, y]
        if i:
            s += tr[path[i - 1], y]
    return s


def enumerate_paths(em, tr, st, en):
    """All 3**n tag paths in lexicographic order with their scores."""
    n = em.shape[0]
    paths = list(itertools.product(range(3), repeat=n))
    return paths, np.array([path_score(em, tr, st, en, p) for p in paths])


def brute_log_partition(em, tr, st, en):
    _, scores = enumerate_paths(em, tr, st, en)
    m = scores.max()
    return m + math.log(np.exp(scores - m).sum())


def brute_viterbi(em, tr, st, en):
    paths, scores = enumerate_paths(em, tr, st, en)
    return list(paths[int(np.argmax(scores))])


def _scalar(value) -> float:
    return float(value.detach()) if isinstance(value, torch.Tensor) else float(value)


def central_difference(f, x: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """Numerical gradient of scalar ``f`` at float64 tensor ``x``."""
    grad = torch.zeros_like(x)
    flat = x.detach().clone().reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + eps
        up = _scalar(f(flat.reshape(x.shape)))
        flat[i] = orig - eps
        down = _scalar(f(flat.reshape(x.shape)))
        flat[i] = orig
        grad.reshape(-1)[i] = (up - down) / (2 * eps)
    return grad


def relative_error(a: torch.Tensor, b: torch.Tensor) -> float:
    return float((a - b).norm() / max(a.norm(), b.norm(), 1e-12))


def threshold_ce_reference(scores, null, positive):
    """Loss written directly from probabilities, with no log-space tricks."""
    pos = [s for s, p in zip(scores, positive) if p]
    neg = [s for s, p in zip(scores, positive) if not p]
    l_pos = 0.0
    if pos:
        l_pos = -sum(math.log(math.exp(s) / (math.exp(s) + math.exp(null))) for s in pos) / len(pos)
    l_neg = -math.log(math.exp(null) / (math.exp(null) + sum(math.exp(s) for s in neg)))
    return l_pos + l_neg


def reciprocal_rank_score(candidate, event_type, ranks, labels):
    """Double loop over instances and types, straight from the definition."""
    total = 0.0
    for sid, rank_of in ranks.items():
        for t in labels[sid]:
            if t == event_type:
                total += 1.0 / rank_of[candidate]
    return total


def brute_max_matching(pred, gold, compatible):
    """Largest one-to-one matching by trying every injection of the smaller side.

    Any matching extends to a full injection, and incompatible pairs add 0.
    """
    if len(pred) > len(gold):
        return brute_max_matching(gold, pred, lambda a, b: compatible(b, a))
    best = 0
    for perm in itertools.permutations(range(len(gold)), len(pred)):
        best = max(best, sum(compatible(pred[i], gold[j]) for i, j in enumerate(perm)))
    return best
