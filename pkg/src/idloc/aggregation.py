"""Reductions over the mask logits of a type's verbalizers."""

from __future__ import annotations

import math
from typing import Optional, Sequence, Union

import torch

METHODS = ("avg", "max", "logsumexp", "wavg")

Scores = Union[torch.Tensor, Sequence[float]]


def aggregate(scores: Scores, method: str = "avg", weights: Optional[Scores] = None):
    """Reduce ``scores`` with ``method``.

    Tensor inputs return a (differentiable) 0-d tensor; plain sequences
    return a float. ``weights`` are required for ``wavg`` only and must be a
    probability vector (learnable weights go through a softmax first).
    """
    as_float = not isinstance(scores, torch.Tensor)
    s = torch.as_tensor(scores, dtype=torch.float64) if as_float else scores
    if s.numel() == 0:
        raise ValueError("cannot aggregate an empty score list")
    if (weights is not None) != (method == "wavg"):
        raise ValueError("weights must be given exactly when method is 'wavg'")

    if method == "avg":
        out = s.mean()
    elif method == "max":
        out = s.max()
    elif method == "logsumexp":
        out = torch.logsumexp(s, dim=0)
    elif method == "wavg":
        w = torch.as_tensor(weights, dtype=s.dtype)
        if w.shape != s.shape:
            raise ValueError("weights and scores differ in length")
        if as_float and (bool((w < 0).any()) or not math.isclose(float(w.sum()), 1.0, abs_tol=1e-9)):
            raise ValueError("wavg weights must be non-negative and sum to 1")
        out = (w * s).sum()
    else:
        raise ValueError(f"unknown aggregation {method!r}; expected one of {METHODS}")
    return float(out) if as_float else out
