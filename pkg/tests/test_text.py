import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crisistriage.text import (
    DEFAULT_ALPHABET,
    EmbeddingTable,
    cosine,
    load_embeddings,
    quantize_chars,
    tokenize,
)


class TestTokenize:
    def test_hashtag_and_punctuation(self):
        assert tokenize("Bridge OUT on 5th! #irma") == ["bridge", "out", "on", "5th", "!", "#irma"]

    def test_mention_and_url(self):
        assert tokenize("@redcross help http://t.co/x") == ["@redcross", "help", "http://t.co/x"]

    def test_emoticon(self):
        assert tokenize(":-) safe now") == [":-)", "safe", "now"]

    def test_empty(self):
        assert tokenize("") == []

    def test_url_case_preserved(self):
        assert tokenize("see HTTP://T.co/ABC")[-1] == "HTTP://T.co/ABC"

    @given(st.text(max_size=200))
    def test_no_interior_whitespace(self, text):
        for token in tokenize(text):
            assert token
            assert not any(c.isspace() for c in token)


class TestQuantizeChars:
    def test_basic_mapping(self):
        assert list(quantize_chars("ab", "abc", 4)) == [1, 2, 0, 0]

    def test_lowercasing(self):
        assert list(quantize_chars("ABC", "abc", 4)) == [1, 2, 3, 0]

    def test_truncation(self):
        out = quantize_chars("a" * 300, "abc", 280)
        assert len(out) == 280 and all(v == 1 for v in out)

    def test_unknown_maps_to_zero(self):
        assert list(quantize_chars("axb", "ab", 3)) == [1, 0, 2]

    def test_empty_alphabet_rejected(self):
        with pytest.raises(ValueError):
            quantize_chars("a", "", 4)

    @given(st.text(max_size=400), st.integers(min_value=1, max_value=50))
    def test_length_and_range_invariants(self, text, max_len):
        out = quantize_chars(text, DEFAULT_ALPHABET, max_len)
        assert len(out) == max_len
        assert out.min() >= 0 and out.max() <= len(DEFAULT_ALPHABET)


class TestCosine:
    def test_identity(self):
        assert cosine(np.array([3.0, 4.0]), np.array([3.0, 4.0])) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(0.0)

    def test_opposite(self):
        assert cosine(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == pytest.approx(-1.0)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            cosine(np.zeros(3), np.ones(3))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine(np.ones(2), np.ones(3))

    @given(
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.lists(st.floats(-10, 10), min_size=3, max_size=3),
        st.floats(0.01, 100),
    )
    def test_symmetry_and_scale_invariance(self, u, v, alpha):
        u, v = np.array(u), np.array(v)
        if np.linalg.norm(u) < 1e-6 or np.linalg.norm(v) < 1e-6:
            return
        assert cosine(u, v) == pytest.approx(cosine(v, u), abs=1e-12)
        assert cosine(alpha * u, v) == pytest.approx(cosine(u, v), abs=1e-9)


class TestEmbeddings:
    def test_load_25_dims(self, tmp_path):
        p = tmp_path / "vec.txt"
        p.write_text("flood " + " ".join(str(0.1 * i) for i in range(1, 26)) + "\n")
        table = load_embeddings(p, 25)
        assert len(table) == 1
        assert table["flood"].shape == (25,)

    def test_dimension_mismatch_names_line(self, tmp_path):
        p = tmp_path / "vec.txt"
        p.write_text("ok 0.1 0.2\nbad 0.1\n")
        with pytest.raises(ValueError, match="line 2"):
            load_embeddings(p, 2)

    def test_non_numeric_component(self, tmp_path):
        p = tmp_path / "vec.txt"
        p.write_text("word 0.1 oops\n")
        with pytest.raises(ValueError, match="line 1"):
            load_embeddings(p, 2)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "vec.txt"
        p.write_text("")
        assert len(load_embeddings(p, 25)) == 0

    def test_duplicate_keeps_first(self, tmp_path):
        p = tmp_path / "vec.txt"
        p.write_text("w 1.0 0.0\nw 0.0 1.0\n")
        table = load_embeddings(p, 2)
        assert table["w"][0] == 1.0

    def test_case_insensitive_lookup(self):
        table = EmbeddingTable(2, {"Flood": np.array([1.0, 0.0])})
        assert table["FLOOD"][0] == 1.0
        assert "flood" in table
