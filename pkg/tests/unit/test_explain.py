import numpy as np
import pandas as pd
import pytest

from incident_fusion.errors import ConfigurationError, EncodingError, InsufficientDataError
from incident_fusion.explain import (
    build_chain,
    duration_tertiles,
    lime_explain,
    severity_groups,
    tfidf_fit,
    tfidf_transform,
    tokenize,
    truncated_svd,
    write_explanation,
)


class KeywordRule:
    """Scores class 1 by the presence of one word; class 0 is the complement."""

    classes = (0, 1)

    def __init__(self, word):
        self.word = word

    def predict_scores(self, texts):
        hit = np.array([float(self.word in t.split()) for t in texts])
        return np.column_stack([1.0 - hit, hit])


class BothWordsRule:
    """Scores class 1 only when two words both survive the masking."""

    classes = (0, 1)

    def __init__(self, first, second):
        self.first, self.second = first, second

    def predict_scores(self, texts):
        hit = np.array([float(self.first in t.split() and self.second in t.split()) for t in texts])
        return np.column_stack([1.0 - hit, hit])


def test_tokenize():
    assert tokenize("Lane BLOCKED on I-80, 2 cars.") == ["lane", "blocked", "on", "i", "80", "2", "cars"]


def test_smoothed_idf():
    """ln(3/3)+1 for a word in both documents, ln(3/2)+1 for one in a single document."""
    model = tfidf_fit(["lane blocked", "lane"])
    assert model.idf_of("lane") == pytest.approx(1.0)
    assert model.idf_of("blocked") == pytest.approx(1.4055, abs=1e-4)
    assert "lane blocked" in model.vocabulary


def test_tfidf_rows_are_unit_length_and_ignore_unknown_words():
    model = tfidf_fit(["lane blocked on i 80", "accident on us 101", "debris in lane"])
    rows = tfidf_transform(model, ["lane blocked", "lane blocked zebra"]).toarray()
    np.testing.assert_allclose(np.linalg.norm(rows, axis=1), 1.0)
    np.testing.assert_allclose(rows[0], rows[1])
    assert tfidf_transform(model, "nothing known here").nnz == 0


def test_tfidf_needs_two_documents():
    with pytest.raises(InsufficientDataError):
        tfidf_fit(["only one"])


def test_svd_recovers_a_rank_five_matrix():
    rng = np.random.default_rng(0)
    matrix = rng.normal(size=(40, 5)) @ rng.normal(size=(5, 30))
    model, reduced = truncated_svd(matrix, k=5, seed=1)
    assert reduced.shape == (40, 5)
    rebuilt = reduced @ model.components
    assert np.linalg.norm(rebuilt - matrix) / np.linalg.norm(matrix) < 1e-6
    np.testing.assert_allclose(model.transform(matrix), reduced, atol=1e-8)
    with pytest.raises(ConfigurationError):
        truncated_svd(matrix, k=31)


def test_duration_tertiles():
    groups = duration_tertiles(range(1, 10))
    assert groups.labels.tolist() == [0, 0, 0, 1, 1, 1, 2, 2, 2]
    assert groups.assign([0, 4, 100]).tolist() == [0, 1, 2]
    assert groups.describe(9) == ["0-3.66667min", "3.66667-6.33333min", "6.33333-9min"]
    with pytest.raises(InsufficientDataError):
        duration_tertiles([5, 6])


def test_severity_groups_are_validated():
    assert severity_groups([1, 4, 2]).tolist() == [1, 4, 2]
    with pytest.raises(ConfigurationError):
        severity_groups([0, 2])


def test_planted_word_ranks_first():
    """The only word the classifier looks at carries the largest weight."""
    out = lime_explain("lane blocked on i 80 near exit", KeywordRule("blocked"), 1, n_samples=2000, seed=0)
    assert out[0].token == "blocked"
    assert out[0].weight > 0.5
    assert all(w.class_label == 1 for w in out)
    for w in out[1:]:
        assert abs(w.weight) < 1e-3


def test_complement_class_flips_the_sign():
    rule = KeywordRule("blocked")
    pos = lime_explain("lane blocked on i 80", rule, 1, n_samples=500, seed=4)
    neg = lime_explain("lane blocked on i 80", rule, 0, n_samples=500, seed=4)
    assert pos[0].token == neg[0].token == "blocked"
    assert neg[0].weight == pytest.approx(-pos[0].weight, rel=1e-9)


def test_lime_top_k_and_determinism():
    rule = KeywordRule("fire")
    text = "vehicle fire on us 101 southbound at the bridge"
    a = lime_explain(text, rule, 1, n_samples=300, seed=9, top_k=3)
    assert len(a) == 3
    assert a == lime_explain(text, rule, 1, n_samples=300, seed=9, top_k=3)


def test_word_pair_features_explain_a_conjunction():
    """A class that needs "lane" and "blocked" together is explained by the pair."""
    text = "lane blocked on i 80 near exit"
    out = lime_explain(text, BothWordsRule("lane", "blocked"), 1, n_samples=2000, seed=0, bigrams=True)
    assert out[0].token == "lane blocked"
    assert out[0].weight > 0.5
    words_only = lime_explain(text, BothWordsRule("lane", "blocked"), 1, n_samples=2000, seed=0)
    assert all(" " not in w.token for w in words_only)


def test_word_pairs_skip_repeats_and_reversals():
    out = lime_explain("slow slow lane slow", KeywordRule("lane"), 1, n_samples=200, bigrams=True, top_k=10)
    assert sorted(w.token for w in out) == ["lane", "slow", "slow lane"]


def test_lime_input_checks():
    rule = KeywordRule("x")
    with pytest.raises(EncodingError):
        lime_explain("  ,, ", rule, 1)
    with pytest.raises(ConfigurationError):
        lime_explain("x y", rule, 7)
    with pytest.raises(TypeError):
        lime_explain(None, rule, 1)


def test_chain_separates_two_kinds_of_text():
    texts = ["lane blocked on i 80", "accident on us 101 southbound"] * 20
    labels = [3, 2] * 20
    chain = build_chain(texts, severity_groups(labels), n_components=2, seed=0)
    assert chain.classes == (2, 3)
    assert chain.predict(texts[:2]).tolist() == [3, 2]
    out = lime_explain(texts[0], chain, 3, n_samples=200, seed=0)
    assert {w.token for w in out} <= set(tokenize(texts[0]))


def test_write_explanation(tmp_path):
    out = lime_explain("lane blocked on i 80", KeywordRule("blocked"), 1, n_samples=100)
    frame = write_explanation(out, tmp_path / "e.csv", tmp_path / "e.svg")
    again = pd.read_csv(tmp_path / "e.csv")
    assert list(again.columns) == ["class", "token", "weight"]
    assert again["token"].tolist() == frame["token"].tolist()
    assert (tmp_path / "e.svg").exists()
