"""Keyword induction and keyword-similarity feature extraction."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .categories import CATEGORY_NAMES, ActionabilityType
from .text import EmbeddingTable, cosine


class DenominatorPolicy(enum.Enum):
    ALL_TOKENS = "all_tokens"
    EMBEDDED_TOKENS_ONLY = "embedded_tokens_only"


@dataclass(frozen=True)
class FeatureConfig:
    cutoff: float = 0.45
    denominator_policy: DenominatorPolicy = DenominatorPolicy.ALL_TOKENS

    def __post_init__(self):
        if not 0 < self.cutoff < 1:
            raise ValueError(f"cutoff must be in (0, 1), got {self.cutoff}")


@dataclass(frozen=True)
class KeywordList:
    category: ActionabilityType
    keywords: tuple[str, ...]
    underfilled: bool = False  # fewer eligible tokens than requested

    def __post_init__(self):
        if len(set(self.keywords)) != len(self.keywords):
            raise ValueError(f"duplicate keywords in list for {self.category}")


@dataclass
class FeatureVector:
    category: ActionabilityType
    values: np.ndarray
    missing_keywords: tuple[str, ...] = ()  # keywords absent from the embedding table

    def __len__(self) -> int:
        return len(self.values)


DEFAULT_KEYWORD_COUNT = 18
DEFAULT_MIN_COUNT = 3


def induce_keywords(
    positives: Sequence[Sequence[str]],
    negatives: Sequence[Sequence[str]],
    category: ActionabilityType,
    k: int = DEFAULT_KEYWORD_COUNT,
    min_count: int = DEFAULT_MIN_COUNT,
) -> KeywordList:
    """Pick the k most class-discriminative words by smoothed log-likelihood ratio.

    Each token w is scored log[(c_pos(w)+1)/(N_pos+V)] - log[(c_neg(w)+1)/(N_neg+V)]
    over token occurrence counts; tokens seen fewer than min_count times in
    the whole corpus are excluded.  Ties break alphabetically.
    """
    if not positives or not negatives:
        raise ValueError("need at least one positive and one negative document")
    if k < 1:
        raise ValueError("k must be >= 1")
    pos_counts: Counter[str] = Counter()
    neg_counts: Counter[str] = Counter()
    for doc in positives:
        pos_counts.update(doc)
    for doc in negatives:
        neg_counts.update(doc)
    vocab = set(pos_counts) | set(neg_counts)
    v = len(vocab)
    n_pos = sum(pos_counts.values())
    n_neg = sum(neg_counts.values())
    eligible = [w for w in vocab if pos_counts[w] + neg_counts[w] >= min_count]
    scored = sorted(
        eligible,
        key=lambda w: (
            -(
                math.log((pos_counts[w] + 1) / (n_pos + v))
                - math.log((neg_counts[w] + 1) / (n_neg + v))
            ),
            w,
        ),
    )
    chosen = scored[:k]
    return KeywordList(category, tuple(chosen), underfilled=len(chosen) < k)


def vectorize(
    tokens: Sequence[str],
    keywords: KeywordList,
    table: EmbeddingTable,
    config: FeatureConfig = FeatureConfig(),
) -> FeatureVector:
    """Convert a token sequence into one value per keyword.

    The value for keyword j is the mean over all counted tokens of the
    cosine similarity to keyword j, where similarities below the cutoff
    contribute zero.  Tokens without an embedding contribute zero and, under
    the ALL_TOKENS policy, still count in the denominator.
    """
    if not tokens:
        raise ValueError("cannot vectorize an empty document")
    token_vecs = [table.get(t) for t in tokens]
    if config.denominator_policy is DenominatorPolicy.ALL_TOKENS:
        denom = len(tokens)
    else:
        denom = sum(1 for v in token_vecs if v is not None)
        if denom == 0:
            denom = 1  # no embedded tokens: all components are zero anyway
    values = np.zeros(len(keywords.keywords), dtype=np.float64)
    missing = []
    for j, kw in enumerate(keywords.keywords):
        kw_vec = table.get(kw)
        if kw_vec is None:
            missing.append(kw)
            continue
        total = 0.0
        for tv in token_vecs:
            if tv is None or not np.any(tv):
                continue
            sim = cosine(tv, kw_vec)
            if sim >= config.cutoff:
                total += sim
        values[j] = total / denom
    return FeatureVector(keywords.category, values, tuple(missing))


# ---------------------------------------------------------------------------
# Keyword list file format: one block per category, header line
# `[code name]`, then whitespace-separated keywords until the next header.


def parse_keyword_file(text: str) -> dict[ActionabilityType, KeywordList]:
    lists: dict[ActionabilityType, KeywordList] = {}
    current: ActionabilityType | None = None
    words: list[str] = []

    def flush():
        if current is not None:
            lists[current] = KeywordList(current, tuple(dict.fromkeys(words)))

    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            flush()
            code = line[1:-1].split()[0]
            current = ActionabilityType.from_code(code)
            words = []
        else:
            if current is None:
                raise ValueError("keyword data before any [category] header")
            words.extend(w.lower() for w in line.split())
    flush()
    return lists


def load_keyword_file(path: str | Path) -> dict[ActionabilityType, KeywordList]:
    return parse_keyword_file(Path(path).read_text(encoding="utf-8"))


def format_keyword_file(lists: dict[ActionabilityType, KeywordList]) -> str:
    blocks = []
    for cat in ActionabilityType:
        if cat not in lists:
            continue
        name = CATEGORY_NAMES[cat].lower().replace(" ", "-").replace(",", "")
        blocks.append(f"[{cat.code} {name}]\n" + " ".join(lists[cat].keywords) + "\n")
    return "\n".join(blocks)


def default_keyword_lists() -> dict[ActionabilityType, KeywordList]:
    """The keyword lists shipped with the package."""
    text = resources.files("crisistriage.data").joinpath("keywords.txt").read_text("utf-8")
    return parse_keyword_file(text)
