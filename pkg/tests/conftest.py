import numpy as np
import pytest

from crisistriage.categories import ActionabilityType
from crisistriage.features import FeatureConfig, KeywordList
from crisistriage.text import EmbeddingTable

DIM = 25


def basis(i, dim=DIM):
    v = np.zeros(dim)
    v[i] = 1.0
    return v


def blend(i, j, cos_to_i, dim=DIM):
    """Unit vector with an exact cosine of cos_to_i against basis(i)."""
    v = cos_to_i * basis(i, dim) + np.sqrt(1.0 - cos_to_i**2) * basis(j, dim)
    return v


@pytest.fixture(scope="session")
def crisis_world():
    """A controlled embedding space with two keywords per category.

    Keyword n of category k sits on its own basis axis; 'sim' words have an
    exact 0.8 cosine with the first keyword; filler words live on axes
    orthogonal to every keyword.
    """
    entries = {}
    keyword_lists = {}
    sim_words = {}
    fillers = []
    for k, cat in enumerate(ActionabilityType):
        code = cat.code.lower()
        kw1, kw2 = f"kw{code}one", f"kw{code}two"
        entries[kw1] = basis(2 * k)
        entries[kw2] = basis(2 * k + 1)
        sim = f"sim{code}"
        entries[sim] = blend(2 * k, (2 * k + 1) % 18, 0.8)
        keyword_lists[cat] = KeywordList(cat, (kw1, kw2))
        sim_words[cat] = sim
    for f in range(18, DIM):
        word = f"filler{f}"
        entries[word] = basis(f)
        fillers.append(word)
    table = EmbeddingTable(DIM, entries)
    return {
        "table": table,
        "keyword_lists": keyword_lists,
        "sim_words": sim_words,
        "fillers": fillers,
        "config": FeatureConfig(),
    }


def write_embedding_file(path, table):
    lines = []
    for word in sorted(table._entries):
        vec = table._entries[word]
        lines.append(word + " " + " ".join(repr(float(x)) for x in vec))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
