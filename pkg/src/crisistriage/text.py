"""Social-media tokenization, character quantization, and word embeddings."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

# Emoticons must be matched before generic punctuation so ":-)" survives
# as one token.
_EMOTICON = r"""
    [<>]?
    [:;=8xX]                     # eyes
    [\-o\*']?                    # optional nose
    [\)\]\(\[dDpP/\:\}\{@\|\\]  # mouth
    |
    [\)\]\(\[dDpP/\:\}\{@\|\\]  # reversed mouth
    [\-o\*']?
    [:;=8xX]
    [<>]?
    |
    <3                           # heart
"""

_TOKEN_RE = re.compile(
    r"""
    (?P<url>[Hh][Tt][Tt][Pp][Ss]?://\S+|[Ww][Ww][Ww]\.\S+)
    |(?P<emoticon>{emoticon})
    |(?P<mention>@\w+)
    |(?P<hashtag>\#\w+)
    |(?P<word>[^\W_]+(?:['’][^\W_]+)*)
    |(?P<punct>[^\w\s]+)
    """.format(emoticon=_EMOTICON),
    re.VERBOSE | re.UNICODE,
)


def tokenize(text: str) -> list[str]:
    """Split text into tokens, keeping URLs, @mentions, #hashtags, and
    emoticons intact.  Everything except URLs is lowercased."""
    tokens = []
    for match in _TOKEN_RE.finditer(text):
        token = match.group(0)
        if match.lastgroup != "url":
            token = token.lower()
        tokens.append(token)
    return tokens


# Lowercase letters, digits, space, and common ASCII punctuation.
DEFAULT_ALPHABET = (
    "abcdefghijklmnopqrstuvwxyz"
    "0123456789"
    " "
    ".,;:!?'\"-_()[]{}@#$%&*+=/\\|<>~^"
)

DEFAULT_MAX_LEN = 280


def quantize_chars(text: str, alphabet: str = DEFAULT_ALPHABET, max_len: int = DEFAULT_MAX_LEN) -> np.ndarray:
    """Map text to a fixed-length array of 1-based alphabet indices.

    Characters outside the alphabet map to 0, which is also the padding
    value; text is lowercased first and truncated or padded to max_len.
    """
    if not alphabet:
        raise ValueError("alphabet must be non-empty")
    if max_len <= 0:
        raise ValueError("max_len must be positive")
    index = {ch: i + 1 for i, ch in enumerate(alphabet)}
    out = np.zeros(max_len, dtype=np.int64)
    for i, ch in enumerate(text.lower()[:max_len]):
        out[i] = index.get(ch, 0)
    return out


class EmbeddingTable:
    """Word -> d-dimensional vector mapping; lookups are case-insensitive."""

    def __init__(self, dimension: int, entries: dict[str, np.ndarray] | None = None):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self._entries: dict[str, np.ndarray] = {}
        for word, vec in (entries or {}).items():
            self._add(word, np.asarray(vec, dtype=np.float64))

    def _add(self, word: str, vec: np.ndarray) -> None:
        if vec.shape != (self.dimension,):
            raise ValueError(f"vector for {word!r} has dimension {vec.shape}, expected {self.dimension}")
        self._entries.setdefault(word.lower(), vec)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, word: str) -> np.ndarray | None:
        return self._entries.get(word.lower())

    def __getitem__(self, word: str) -> np.ndarray:
        vec = self.get(word)
        if vec is None:
            raise KeyError(word)
        return vec


def load_embeddings(path: str | Path, expected_d: int = 25) -> EmbeddingTable:
    """Load a plain-text vector file: one `word v1 ... vd` entry per line.

    Duplicate words keep the first occurrence; a dimension mismatch or
    non-numeric component is an error naming the offending line.
    """
    table = EmbeddingTable(expected_d)
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            word, components = parts[0], parts[1:]
            if len(components) != expected_d:
                raise ValueError(
                    f"{path} line {lineno}: expected {expected_d} components, got {len(components)}"
                )
            try:
                vec = np.array([float(c) for c in components], dtype=np.float64)
            except ValueError:
                raise ValueError(f"{path} line {lineno}: non-numeric vector component")
            table._add(word, vec)
    return table


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1]; zero vectors are an error."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))
