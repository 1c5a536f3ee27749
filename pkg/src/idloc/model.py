"""Joint identification + localization model over one shared encoder."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import torch
from torch import nn

from .config import RunConfig
from .encoder import Encoder, ToyEncoder, encoder_from_state
from .identification import (
    IdentificationLossConfig,
    build_cloze_input,
    decode_identification,
    gold_mask,
    identification_loss,
    resolve_verbalizers,
    split_prompt_words,
    type_logits,
)
from .localization import CrfParameters, build_localization_input, input_emissions
from .types import AnnotatedSentence, BioTag, EventMention, Ontology, Sentence, TypeScores, bio_to_spans

CONFIG_FILE = "config.json"
ONTOLOGY_FILE = "ontology.json"
ENCODER_FILE = "encoder.pt"
HEADS_FILE = "crf.pt"


def vocabulary_words(sentences: Iterable[AnnotatedSentence], ontology: Ontology, config: RunConfig) -> Tuple[List[str], List[str]]:
    """Words a toy vocabulary must cover, and the ones that must stay whole."""
    words = [tok for s in sentences for tok in s.sentence.tokens]
    words += [w for w in split_prompt_words(config.prompt_template) if w != "[MASK]"]
    whole = [ontology.null_verbalizer]
    for spec in ontology:
        for v in spec.verbalizers:
            parts = v.replace("_", " ").replace("-", " ").split()
            (whole if len(parts) == 1 else words).extend(parts)
        words += split_prompt_words(spec.definition or "")
        words += [w for k in spec.keywords for w in split_prompt_words(k)]
    return words, whole


def build_encoder(config: RunConfig, sentences: Sequence[AnnotatedSentence], ontology: Ontology) -> Encoder:
    if config.encoder == "toy":
        words, whole = vocabulary_words(sentences, ontology, config)
        return ToyEncoder.from_words(words, whole, config.embed_dim, config.max_seq_len, config.seed)
    from .hf_encoder import HFEncoder

    return HFEncoder.from_pretrained(config.encoder, max_seq_len=config.max_seq_len)


class EventDetector(nn.Module):
    """Cloze identifier and CRF localizer sharing ``encoder``."""

    def __init__(self, encoder: Encoder, ontology: Ontology, config: RunConfig):
        super().__init__()
        self.encoder = encoder
        self.ontology = ontology
        self.config = config
        self.prompt = config.prompt
        self.loss_config = IdentificationLossConfig(config.loss, config.margin)
        # May add composite verbalizer tokens, so it precedes optimizer setup.
        self.index = resolve_verbalizers(ontology, encoder)
        self.crf = CrfParameters(
            encoder.dim,
            attention_enabled=config.attention_enabled,
            constrained=config.constrained,
            attend_prompt=config.attend_prompt,
            seed=config.seed,
        )
        if config.aggregation == "wavg":
            self.verbalizer_weights = nn.ParameterList(
                [nn.Parameter(torch.zeros(len(ids))) for ids in self.index.type_ids]
            )
        else:
            self.verbalizer_weights = None

    @classmethod
    def build(cls, config: RunConfig, sentences: Sequence[AnnotatedSentence], ontology: Ontology) -> "EventDetector":
        with torch.random.fork_rng():
            torch.manual_seed(config.seed)
            return cls(build_encoder(config, sentences, ontology), ontology, config)

    # -- identification ----------------------------------------------------

    def identification_logits(self, sentence: Sentence) -> Tuple[torch.Tensor, torch.Tensor]:
        out = self.encoder.encode(build_cloze_input(sentence, self.prompt, self.encoder))
        weights = list(self.verbalizer_weights) if self.verbalizer_weights is not None else None
        return type_logits(out.vocab_logits_at_mask, self.index, self.config.aggregation, weights)

    def identification_loss(self, example: AnnotatedSentence) -> torch.Tensor:
        scores, null = self.identification_logits(example.sentence)
        positive = gold_mask(self.index.type_names, example.event_types)
        return identification_loss(scores, null, positive, self.loss_config)

    def type_scores(self, sentence: Sentence) -> TypeScores:
        with torch.no_grad():
            scores, null = self.identification_logits(sentence)
        return TypeScores(dict(zip(self.index.type_names, scores.tolist())), float(null))

    def identify(self, sentence: Sentence) -> Set[str]:
        return decode_identification(self.type_scores(sentence))

    # -- localization ------------------------------------------------------

    def localization_emissions(self, sentence: Sentence, event_type: str) -> torch.Tensor:
        spec = self.ontology.get(event_type)
        inputs = build_localization_input(
            sentence,
            spec,
            self.config.prompt_mode,
            self.encoder,
            self.prompt,
            self.config.max_keywords,
            self.index.type_ids[self.ontology.index(event_type)][0],
        )
        hidden = self.encoder.encode(inputs).hidden
        return input_emissions(hidden, inputs, self.crf)

    def localization_loss(self, sentence: Sentence, event_type: str, tags: Sequence[BioTag]) -> torch.Tensor:
        emissions = self.localization_emissions(sentence, event_type)
        # Truncated contexts only supervise the words that were kept.
        return self.crf.nll(emissions, list(tags)[: emissions.shape[0]])

    def localize(self, sentence: Sentence, event_type: str) -> List[EventMention]:
        with torch.no_grad():
            tags = self.crf.decode(self.localization_emissions(sentence, event_type))
        return [EventMention(event_type, s, e) for s, e in bio_to_spans(tags)]

    # -- persistence -------------------------------------------------------

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / CONFIG_FILE).write_text(json.dumps(self.config.to_json(), indent=2, sort_keys=True) + "\n")
        (directory / ONTOLOGY_FILE).write_text(json.dumps(self.ontology.to_json(), indent=2, ensure_ascii=False) + "\n")
        torch.save(self.encoder.state(), directory / ENCODER_FILE)
        heads = {"crf": self.crf.state_dict()}
        if self.verbalizer_weights is not None:
            heads["verbalizer_weights"] = self.verbalizer_weights.state_dict()
        torch.save(heads, directory / HEADS_FILE)

    @classmethod
    def load(cls, directory) -> "EventDetector":
        directory = Path(directory)
        config = RunConfig.from_mapping(json.loads((directory / CONFIG_FILE).read_text()))
        ontology = Ontology.from_json(json.loads((directory / ONTOLOGY_FILE).read_text()), config.max_keywords)
        encoder = encoder_from_state(torch.load(directory / ENCODER_FILE, weights_only=False))
        model = cls(encoder, ontology, config)
        heads = torch.load(directory / HEADS_FILE, weights_only=False)
        model.crf.load_state_dict(heads["crf"])
        if model.verbalizer_weights is not None:
            model.verbalizer_weights.load_state_dict(heads["verbalizer_weights"])
        return model
