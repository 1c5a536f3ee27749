"""Run configuration: every tunable of a training or prediction run."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from .aggregation import METHODS
from .identification import DEFAULT_TEMPLATE, ClozePrompt
from .localization import DEFAULT_PROMPT_MODE, PROMPT_MODES

PATH_FIELDS = ("train_path", "dev_path", "ontology_path")


@dataclass(frozen=True)
class RunConfig:
    # Defaults follow the few-shot hyperparameter table except ``encoder``,
    # which defaults to the hermetic toy backbone.
    encoder: str = "toy"
    embed_dim: int = 32
    max_seq_len: int = 200
    batch_size: int = 8
    learning_rate: float = 2e-5
    schedule: str = "linear"
    weight_decay: float = 1e-5
    warmup_steps: int = 0
    epochs: int = 20
    adam_epsilon: float = 1e-8
    grad_clip: float = 1.0
    loss: str = "threshold_ce"
    margin: float = 1.0
    prompt_template: str = DEFAULT_TEMPLATE
    aggregation: str = "avg"
    prompt_mode: str = DEFAULT_PROMPT_MODE
    max_keywords: int = 3
    attention_enabled: bool = True
    constrained: bool = True
    attend_prompt: bool = True
    negative_ratio: float = 1.0
    seed: int = 0
    threads: int = 1
    train_path: Optional[str] = None
    dev_path: Optional[str] = None
    ontology_path: Optional[str] = None

    def __post_init__(self):
        positive = ("embed_dim", "max_seq_len", "batch_size", "learning_rate", "adam_epsilon", "grad_clip", "margin", "threads")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("weight_decay", "warmup_steps", "epochs", "negative_ratio", "max_keywords"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)!r}")
        if self.schedule not in ("linear", "constant"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.loss not in ("threshold_ce", "margin"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.aggregation not in METHODS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if self.prompt_mode not in PROMPT_MODES:
            raise ValueError(f"unknown prompt mode {self.prompt_mode!r}")
        ClozePrompt(self.prompt_template)

    @property
    def prompt(self) -> ClozePrompt:
        return ClozePrompt(self.prompt_template)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_json(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any], base: Optional["RunConfig"] = None) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        coerced = {k: _coerce(known[k].type, v) for k, v in values.items()}
        return dataclasses.replace(base or cls(), **coerced)


PRESETS = {
    "few_shot": RunConfig(
        encoder="bert-base-uncased", embed_dim=768, batch_size=8, learning_rate=2e-5, warmup_steps=0, epochs=20
    ),
    "ace": RunConfig(
        encoder="roberta-large", embed_dim=1024, batch_size=16, learning_rate=1e-5, warmup_steps=1000, epochs=10
    ),
}


def _coerce(type_name, value):
    if value is None:
        return None
    kind = str(type_name)
    if "bool" in kind:
        if isinstance(value, str):
            if value.lower() in ("true", "1", "yes", "on"):
                return True
            if value.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        return bool(value)
    if kind.startswith("int"):
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"not an integer: {value!r}")
        return int(value)
    if kind.startswith("float"):
        return float(value)
    return str(value)


def parse_config_text(text: str) -> Dict[str, Any]:
    """Parse a JSON object or ``key = value`` lines (``#`` starts a comment)."""
    stripped = text.strip()
    if stripped.startswith("{"):
        return json.loads(stripped)
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def load_config(path, base: Optional[RunConfig] = None) -> RunConfig:
    """Read a config file; relative data paths resolve against its directory."""
    path = Path(path)
    values = parse_config_text(path.read_text(encoding="utf-8"))
    preset = values.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        base = PRESETS[preset]
    for key in PATH_FIELDS:
        if values.get(key):
            p = Path(values[key])
            values[key] = str(p if p.is_absolute() else (path.parent / p))
    return RunConfig.from_mapping(values, base)
