"""Crisis message triage: informativeness filtering and actionability tagging."""

from .categories import ActionabilityType, ActionSet
from .corpus import (
    BinaryInformativeness,
    InformativenessLabel,
    Judgment,
    Message,
    MessageSet,
    Source,
    Split,
    adjudicate,
    build_split,
    collapse_labels,
    dedupe,
)
from .features import FeatureConfig, KeywordList, induce_keywords, vectorize
from .text import EmbeddingTable, cosine, load_embeddings, quantize_chars, tokenize

__version__ = "0.1.0"

__all__ = [
    "ActionabilityType",
    "ActionSet",
    "BinaryInformativeness",
    "EmbeddingTable",
    "FeatureConfig",
    "InformativenessLabel",
    "Judgment",
    "KeywordList",
    "Message",
    "MessageSet",
    "Source",
    "Split",
    "adjudicate",
    "build_split",
    "collapse_labels",
    "cosine",
    "dedupe",
    "induce_keywords",
    "load_embeddings",
    "quantize_chars",
    "tokenize",
    "vectorize",
]
