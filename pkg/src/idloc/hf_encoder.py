"""Adapter exposing a Hugging Face masked LM through the ``Encoder`` contract.

``transformers`` is imported lazily so the toy path has no dependency on it.
"""

from __future__ import annotations

import tempfile
from pathlib import Path
from typing import List, Optional, Sequence

import torch

from .encoder import DEFAULT_MAX_SEQ_LEN, ConfigurationError, EncodedInput, Encoder

_HEAD_ATTRS = ("cls", "lm_head")
_BPE_PREFIX = "Ġ"


def _transformers():
    try:
        import transformers
    except ImportError as exc:  # pragma: no cover - depends on environment
        raise ConfigurationError("pretrained encoders need the 'transformers' package") from exc
    return transformers


class HFEncoder(Encoder):
    """Wraps an ``AutoModelForMaskedLM`` and its tokenizer."""

    def __init__(self, model, tokenizer, max_seq_len: int = DEFAULT_MAX_SEQ_LEN):
        super().__init__(model.config.hidden_size, max_seq_len)
        self.model = model
        self.tokenizer = tokenizer
        self.head = next((getattr(model, a) for a in _HEAD_ATTRS if hasattr(model, a)), None)
        if self.head is None:
            raise ConfigurationError(f"{type(model).__name__} has no recognised LM head")
        # Map the generic special surfaces onto the tokenizer's own.
        self._specials = {
            Encoder.cls_token: tokenizer.cls_token,
            Encoder.sep_token: tokenizer.sep_token,
            Encoder.mask_token: tokenizer.mask_token,
            Encoder.unk_token: tokenizer.unk_token,
        }
        self._bpe = any(t.startswith(_BPE_PREFIX) for t in list(tokenizer.get_vocab())[:2000])

    @classmethod
    def from_pretrained(cls, name: str, max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> "HFEncoder":
        tf = _transformers()
        tokenizer = tf.AutoTokenizer.from_pretrained(name)
        model = tf.AutoModelForMaskedLM.from_pretrained(name)
        return cls(model, tokenizer, max_seq_len)

    @property
    def vocab_size(self) -> int:
        return len(self.tokenizer)

    def tokenize_word(self, word: str) -> List[str]:
        pieces = self.tokenizer.tokenize(" " + word if self._bpe else word)
        return pieces or [self.tokenizer.unk_token]

    def token_to_id(self, token: str) -> Optional[int]:
        token = self._specials.get(token, token)
        vocab = self.tokenizer.get_vocab()
        if self._bpe and not token.startswith(_BPE_PREFIX) and _BPE_PREFIX + token in vocab:
            return vocab[_BPE_PREFIX + token]
        if token in vocab:
            return vocab[token]
        pieces = self.tokenize_word(token)
        if len(pieces) == 1 and pieces[0] in vocab and pieces[0] != self.tokenizer.unk_token:
            return vocab[pieces[0]]
        return None

    def add_token(self, surface: str, init_from: Sequence[str]) -> int:
        existing = self.tokenizer.get_vocab().get(surface)
        if existing is not None:
            return existing
        src = [self.token_to_id(t) for t in init_from]
        if not src or any(i is None for i in src):
            raise ConfigurationError(f"cannot initialize {surface!r} from {list(init_from)!r}")
        self.tokenizer.add_tokens([surface])
        self.model.resize_token_embeddings(len(self.tokenizer))
        new_id = self.tokenizer.convert_tokens_to_ids(surface)
        src_t = torch.tensor(src, dtype=torch.long)
        with torch.no_grad():
            inp = self.model.get_input_embeddings().weight
            inp[new_id] = inp[src_t].mean(0)
            out = self.model.get_output_embeddings()
            if out.weight.data_ptr() != inp.data_ptr():
                out.weight[new_id] = out.weight[src_t].mean(0)
            if getattr(out, "bias", None) is not None:
                out.bias[new_id] = out.bias[src_t].mean()
        return new_id

    def forward_ids(self, ids: torch.Tensor, inputs: EncodedInput) -> torch.Tensor:
        base = self.model.base_model(input_ids=ids.unsqueeze(0))
        return base.last_hidden_state[0]

    def lm_logits(self, hidden_at_mask: torch.Tensor) -> torch.Tensor:
        return self.head(hidden_at_mask.unsqueeze(0))[0]

    def state(self) -> dict:
        with tempfile.TemporaryDirectory() as tmp:
            self.tokenizer.save_pretrained(tmp)
            self.model.config.save_pretrained(tmp)
            files = {p.name: p.read_bytes() for p in sorted(Path(tmp).iterdir()) if p.is_file()}
        return {
            "kind": "hf",
            "max_seq_len": self.max_seq_len,
            "files": files,
            "params": {k: v.detach().clone() for k, v in self.model.state_dict().items()},
        }

    @classmethod
    def from_state(cls, state: dict) -> "HFEncoder":
        tf = _transformers()
        with tempfile.TemporaryDirectory() as tmp:
            for name, data in state["files"].items():
                (Path(tmp) / name).write_bytes(data)
            tokenizer = tf.AutoTokenizer.from_pretrained(tmp)
            config = tf.AutoConfig.from_pretrained(tmp)
        model = tf.AutoModelForMaskedLM.from_config(config)
        model.resize_token_embeddings(len(tokenizer))
        model.load_state_dict(state["params"])
        return cls(model, tokenizer, state["max_seq_len"])
