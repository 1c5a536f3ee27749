"""Masked-LM backbone contract, input assembly, and a hermetic toy encoder."""

from __future__ import annotations

import abc
import hashlib
import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from torch import nn

MASK_PLACEHOLDER = "[MASK]"
DEFAULT_MAX_SEQ_LEN = 200

PromptItem = Union[str, int]


class ConfigurationError(ValueError):
    """Raised at setup time when the encoder cannot serve the ontology or prompt."""


@dataclass(frozen=True)
class EncodedInput:
    """Subtoken ids plus the bookkeeping needed to read word-level outputs.

    ``segments`` holds half-open ``(start, end)`` subtoken ranges, context
    first, then each prompt segment in order.
    """

    subtoken_ids: Tuple[int, ...]
    word_to_subtoken: Tuple[int, ...]
    segments: Tuple[Tuple[int, int], ...]
    mask_position: Optional[int] = None
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.subtoken_ids)

    @property
    def context_span(self) -> Tuple[int, int]:
        return self.segments[0]

    @property
    def n_words(self) -> int:
        return len(self.word_to_subtoken)


@dataclass
class EncoderOutput:
    hidden: torch.Tensor
    vocab_logits_at_mask: Optional[torch.Tensor] = None


class Encoder(nn.Module, abc.ABC):
    """Trainable masked language model shared by both stages."""

    cls_token = "[CLS]"
    sep_token = "[SEP]"
    mask_token = "[MASK]"
    unk_token = "[UNK]"

    def __init__(self, dim: int, max_seq_len: int = DEFAULT_MAX_SEQ_LEN):
        super().__init__()
        self.dim = dim
        self.max_seq_len = max_seq_len

    @property
    @abc.abstractmethod
    def vocab_size(self) -> int:
        ...

    @abc.abstractmethod
    def tokenize_word(self, word: str) -> List[str]:
        """Split one word into subtoken surfaces."""

    @abc.abstractmethod
    def token_to_id(self, token: str) -> Optional[int]:
        """Vocabulary index of a word-initial single token, or None."""

    @abc.abstractmethod
    def add_token(self, surface: str, init_from: Sequence[str]) -> int:
        """Append ``surface`` with embeddings averaged from ``init_from``."""

    @abc.abstractmethod
    def forward_ids(self, ids: torch.Tensor, inputs: EncodedInput) -> torch.Tensor:
        """Hidden states, shape (len(ids), dim)."""

    @abc.abstractmethod
    def lm_logits(self, hidden_at_mask: torch.Tensor) -> torch.Tensor:
        ...

    @abc.abstractmethod
    def state(self) -> dict:
        """Everything needed to rebuild this encoder bit-exactly."""

    def word_ids(self, word: str) -> List[int]:
        unk = self.special_id(self.unk_token)
        ids = (self.token_to_id(t) for t in self.tokenize_word(word))
        return [unk if i is None else i for i in ids]

    def special_id(self, token: str) -> int:
        idx = self.token_to_id(token)
        if idx is None:
            raise ConfigurationError(f"special token {token!r} missing from vocabulary")
        return idx

    def encode(self, inputs: EncodedInput) -> EncoderOutput:
        if len(inputs) > self.max_seq_len:
            raise ValueError(f"input of {len(inputs)} subtokens exceeds max_seq_len={self.max_seq_len}")
        ids = torch.tensor(inputs.subtoken_ids, dtype=torch.long)
        hidden = self.forward_ids(ids, inputs)
        logits = None
        if inputs.mask_position is not None:
            logits = self.lm_logits(hidden[inputs.mask_position])
        return EncoderOutput(hidden, logits)


def assemble_input(
    encoder: Encoder,
    context_words: Sequence[str],
    prompt_segments: Sequence[Sequence[PromptItem]],
) -> EncodedInput:
    """Lay out ``[CLS] context [SEP] segment [SEP] ...`` for ``encoder``.

    Prompt items are words (tokenized), pre-resolved vocabulary ids, or the
    mask placeholder. Over-length inputs lose trailing context words only.
    """
    cls_id = encoder.special_id(encoder.cls_token)
    sep_id = encoder.special_id(encoder.sep_token)
    mask_id = encoder.special_id(encoder.mask_token)

    seg_ids: List[List[int]] = []
    seg_mask: List[Optional[int]] = []
    for segment in prompt_segments:
        ids: List[int] = []
        mask_at = None
        for item in segment:
            if isinstance(item, (int, np.integer)):
                ids.append(int(item))
            elif item == MASK_PLACEHOLDER:
                mask_at = len(ids)
                ids.append(mask_id)
            else:
                ids.extend(encoder.word_ids(item))
        seg_ids.append(ids)
        seg_mask.append(mask_at)

    word_pieces = [encoder.word_ids(w) for w in context_words]
    fixed = 2 + sum(len(s) + 1 for s in seg_ids)
    budget = encoder.max_seq_len - fixed
    kept = 0
    used = 0
    for pieces in word_pieces:
        if used + len(pieces) > budget:
            break
        used += len(pieces)
        kept += 1
    if kept == 0:
        raise ValueError(
            f"prompt segments need {fixed} subtokens; no room for context within max_seq_len={encoder.max_seq_len}"
        )
    truncated = kept < len(word_pieces)
    if truncated:
        warnings.warn(f"context truncated from {len(word_pieces)} to {kept} words to fit max_seq_len")

    ids = [cls_id]
    word_to_subtoken = []
    for pieces in word_pieces[:kept]:
        word_to_subtoken.append(len(ids))
        ids.extend(pieces)
    segments = [(1, len(ids))]
    ids.append(sep_id)
    mask_position = None
    for seg, mask_at in zip(seg_ids, seg_mask):
        start = len(ids)
        if mask_at is not None:
            mask_position = start + mask_at
        ids.extend(seg)
        segments.append((start, len(ids)))
        ids.append(sep_id)
    return EncodedInput(tuple(ids), tuple(word_to_subtoken), tuple(segments), mask_position, truncated)


# -- toy encoder --------------------------------------------------------------


def hashed_vector(surface: str, dim: int) -> np.ndarray:
    """Deterministic unit-scale embedding derived from the token surface."""
    digest = hashlib.sha256(surface.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    return rng.standard_normal(dim) / np.sqrt(dim)


class ToyEncoder(Encoder):
    """Small contextual encoder over a closed vocabulary.

    Each subtoken starts from a hashed embedding. Two affine+tanh layers mix
    it with the mean embedding of the context segment, the mean of the
    prompt segments, and its elementwise product with that prompt mean; a
    residual keeps token identity. The LM head has its own
    output embeddings, initialized equal to the input embeddings.
    """

    specials = ("[UNK]", "[CLS]", "[SEP]", "[MASK]")

    def __init__(
        self,
        vocab: Sequence[str],
        dim: int = 32,
        max_seq_len: int = DEFAULT_MAX_SEQ_LEN,
        seed: int = 0,
        max_word_len: int = 12,
    ):
        super().__init__(dim, max_seq_len)
        vocab = list(vocab)
        if len(set(vocab)) != len(vocab):
            raise ValueError("duplicate vocabulary entries")
        missing = [s for s in self.specials if s not in vocab]
        if missing:
            raise ValueError(f"vocabulary lacks special tokens {missing}")
        self.vocab: List[str] = vocab
        self._index: Dict[str, int] = {t: i for i, t in enumerate(vocab)}
        self.seed = seed
        self.max_word_len = max_word_len

        table = torch.tensor(np.stack([hashed_vector(t, dim) for t in vocab]), dtype=torch.float32)
        self.embed = nn.Parameter(table.clone())
        self.out_embed = nn.Parameter(table.clone())
        self.out_bias = nn.Parameter(torch.zeros(len(vocab)))
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.mix1 = nn.Linear(4 * dim, 2 * dim)
            self.mix2 = nn.Linear(2 * dim, dim)

    @classmethod
    def from_words(
        cls,
        words: Iterable[str],
        whole_words: Iterable[str] = (),
        dim: int = 32,
        max_seq_len: int = DEFAULT_MAX_SEQ_LEN,
        seed: int = 0,
        max_word_len: int = 12,
    ) -> "ToyEncoder":
        """Build a vocabulary covering ``words``.

        Words longer than ``max_word_len`` are stored as pieces; every
        character is also stored so unseen words still tokenize.
        ``whole_words`` are always kept intact (verbalizers, NULL token).
        """
        entries = set()
        for w in words:
            w = w.lower()
            for i, ch in enumerate(w):
                entries.add(ch if i == 0 else "##" + ch)
            if len(w) <= max_word_len:
                entries.add(w)
            else:
                for i in range(0, len(w), max_word_len):
                    piece = w[i : i + max_word_len]
                    entries.add(piece if i == 0 else "##" + piece)
        entries.update(w.lower() for w in whole_words)
        entries.difference_update(cls.specials)
        return cls(list(cls.specials) + sorted(entries), dim, max_seq_len, seed, max_word_len)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.vocab).encode("utf-8")).hexdigest()

    def token_to_id(self, token: str) -> Optional[int]:
        idx = self._index.get(token)
        if idx is None and token not in self.specials:
            idx = self._index.get(token.lower())
        return idx

    def tokenize_word(self, word: str) -> List[str]:
        if word in self._index:
            return [word]
        w = word.lower()
        if w in self._index:
            return [w]
        pieces = []
        start = 0
        while start < len(w):
            end = len(w)
            found = None
            while end > start:
                piece = w[start:end] if start == 0 else "##" + w[start:end]
                if piece in self._index:
                    found = piece
                    break
                end -= 1
            if found is None:
                return [self.unk_token]
            pieces.append(found)
            start = end
        return pieces

    def add_token(self, surface: str, init_from: Sequence[str]) -> int:
        if surface in self._index:
            return self._index[surface]
        if not init_from:
            raise ConfigurationError(f"add_token({surface!r}) needs at least one source token")
        src = []
        for tok in init_from:
            idx = self.token_to_id(tok)
            if idx is None:
                raise ConfigurationError(f"cannot initialize {surface!r}: {tok!r} is not in the vocabulary")
            src.append(idx)
        src_t = torch.tensor(src, dtype=torch.long)
        with torch.no_grad():
            self.embed = nn.Parameter(torch.cat([self.embed, self.embed[src_t].mean(0, keepdim=True)]))
            self.out_embed = nn.Parameter(
                torch.cat([self.out_embed, self.out_embed[src_t].mean(0, keepdim=True)])
            )
            self.out_bias = nn.Parameter(torch.cat([self.out_bias, self.out_bias[src_t].mean().reshape(1)]))
        self._index[surface] = len(self.vocab)
        self.vocab.append(surface)
        return self._index[surface]

    def forward_ids(self, ids: torch.Tensor, inputs: EncodedInput) -> torch.Tensor:
        emb = self.embed[ids]
        c0, c1 = inputs.context_span
        ctx = emb[c0:c1].mean(0)
        prompt_pos = [i for s, e in inputs.segments[1:] for i in range(s, e)]
        if prompt_pos:
            prompt = emb[torch.tensor(prompt_pos, dtype=torch.long)].mean(0)
        else:
            prompt = torch.zeros_like(ctx)
        pooled = torch.cat([ctx, prompt]).expand(len(ids), 2 * self.dim)
        # The product term lets each token match itself against the prompt.
        features = torch.cat([emb, pooled, emb * prompt * self.dim], dim=1)
        mixed = torch.tanh(self.mix2(torch.tanh(self.mix1(features))))
        return emb + mixed

    def lm_logits(self, hidden_at_mask: torch.Tensor) -> torch.Tensor:
        return self.out_embed @ hidden_at_mask + self.out_bias

    def state(self) -> dict:
        return {
            "kind": "toy",
            "vocab": list(self.vocab),
            "dim": self.dim,
            "max_seq_len": self.max_seq_len,
            "seed": self.seed,
            "max_word_len": self.max_word_len,
            "params": {k: v.detach().clone() for k, v in self.state_dict().items()},
        }

    @classmethod
    def from_state(cls, state: dict) -> "ToyEncoder":
        enc = cls(state["vocab"], state["dim"], state["max_seq_len"], state["seed"], state["max_word_len"])
        enc.load_state_dict(state["params"])
        return enc


def encoder_from_state(state: dict) -> Encoder:
    kind = state.get("kind")
    if kind == "toy":
        return ToyEncoder.from_state(state)
    if kind == "hf":
        from .hf_encoder import HFEncoder

        return HFEncoder.from_state(state)
    raise ConfigurationError(f"unknown encoder kind {kind!r}")
