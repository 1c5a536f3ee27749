"""Few-shot event detection by cloze identification and CRF localization."""

from .aggregation import aggregate
from .config import PRESETS, RunConfig, load_config
from .corpus import (
    Corpus,
    CorpusError,
    FewShotSplit,
    inject_null_instances,
    load_corpus,
    load_ontology,
    sample_few_shot,
    save_ontology,
    save_predictions,
)
from .crf import crf_log_partition, crf_nll, viterbi_decode
from .encoder import ConfigurationError, EncodedInput, Encoder, ToyEncoder
from .evaluation import ScoreReport, score_identification, score_mentions, summarize_runs
from .identification import ClozePrompt, decode_identification, margin_loss, threshold_ce_loss
from .localization import CrfParameters, type_aware_prompt
from .model import EventDetector
from .training import TrainingDiverged, predict, train
from .types import (
    AnnotatedSentence,
    BioTag,
    EventMention,
    EventTypeSpec,
    Ontology,
    Sentence,
    TypeScores,
    ValidationError,
    bio_to_spans,
    spans_to_bio,
)
from .verbalizers import score_candidate, select_verbalizers

__version__ = "0.1.0"
