"""Word importance for severity and duration-group classifiers of descriptions."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from os import PathLike
from typing import Any, Sequence, Union

import numpy as np
import pandas as pd
from sklearn.decomposition import TruncatedSVD
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.linear_model import Ridge

from .errors import ConfigurationError, EncodingError, InsufficientDataError
from .ingest import SEVERITY_LEVELS
from .regressors import BoostedTrees, RegressorConfig, fit_gbdt_arrays

logger = logging.getLogger(__name__)

TOKEN_PATTERN = r"(?u)[^\W_]+"
N_COMPONENTS = 50
N_ITER = 7
KERNEL_WIDTH = 0.75
RIDGE_ALPHA = 1.0
TOP_K = 10
DEFAULT_CLASSIFIER = RegressorConfig("gbdt", n_trees=100, max_depth=3, learning_rate=0.1)

_token_re = re.compile(TOKEN_PATTERN)


def tokenize(text: str) -> list[str]:
    """Lower-cased runs of letters and digits."""
    return _token_re.findall(text.lower())


@dataclass
class TfIdfModel:
    """Fitted (1,2)-gram TF-IDF vectoriser with smoothed idf and L2 rows."""

    vectorizer: TfidfVectorizer

    @property
    def vocabulary(self) -> dict[str, int]:
        return dict(self.vectorizer.vocabulary_)

    @property
    def idf(self) -> np.ndarray:
        return self.vectorizer.idf_

    def idf_of(self, term: str) -> float:
        return float(self.idf[self.vectorizer.vocabulary_[term]])


def tfidf_fit(descriptions: Sequence[str]) -> TfIdfModel:
    """
    Fit the vocabulary and idf weights.

    Columns are every 1-gram and contiguous 2-gram; ``idf = ln((1 + N) /
    (1 + df)) + 1`` and each row is L2-normalised.

    Examples
    --------
    >>> m = tfidf_fit(["lane blocked", "lane"])
    >>> m.idf_of("lane"), round(m.idf_of("blocked"), 4)
    (1.0, 1.4055)
    """
    descriptions = list(descriptions)
    if len(descriptions) < 2:
        raise InsufficientDataError("TF-IDF needs at least 2 documents")
    vectorizer = TfidfVectorizer(
        lowercase=True,
        token_pattern=TOKEN_PATTERN,
        ngram_range=(1, 2),
        norm="l2",
        use_idf=True,
        smooth_idf=True,
        sublinear_tf=False,
    )
    try:
        vectorizer.fit(descriptions)
    except ValueError as exc:
        raise InsufficientDataError(f"TF-IDF corpus has no tokens: {exc}") from exc
    return TfIdfModel(vectorizer)


def tfidf_transform(model: TfIdfModel, texts: Union[str, Sequence[str]]):
    """Sparse TF-IDF rows; tokens outside the vocabulary contribute nothing."""
    if isinstance(texts, str):
        texts = [texts]
    return model.vectorizer.transform(list(texts))


@dataclass
class SvdModel:
    svd: TruncatedSVD

    @property
    def components(self) -> np.ndarray:
        return self.svd.components_

    def transform(self, matrix) -> np.ndarray:
        return self.svd.transform(matrix)


def truncated_svd(matrix, k: int = N_COMPONENTS, n_iter: int = N_ITER, seed: int = 0) -> tuple[SvdModel, np.ndarray]:
    """
    Randomised truncated SVD with QR re-orthonormalisation at every power iteration.

    Returns
    -------
    tuple
        ``(SvdModel, reduced)`` where ``reduced = matrix @ components.T``.

    Raises
    ------
    ConfigurationError
        If ``k`` exceeds the smaller matrix dimension.
    """
    n_rows, n_cols = matrix.shape
    if k < 1 or k > min(n_rows, n_cols):
        raise ConfigurationError(f"k={k} must lie in [1, {min(n_rows, n_cols)}] for a {n_rows}x{n_cols} matrix")
    svd = TruncatedSVD(
        n_components=k,
        algorithm="randomized",
        n_iter=n_iter,
        power_iteration_normalizer="QR",
        random_state=seed,
    )
    reduced = svd.fit_transform(matrix)
    return SvdModel(svd), reduced


def _tertile_labels(d: np.ndarray, q1: float, q2: float) -> np.ndarray:
    return np.where(d <= q1, 0, np.where(d <= q2, 1, 2))


@dataclass(frozen=True)
class DurationGroups:
    """Tertile cut points (minutes); label 0 up to ``q1``, 1 up to ``q2``, else 2."""

    boundaries: tuple[float, float]
    labels: np.ndarray

    def assign(self, durations) -> np.ndarray:
        return _tertile_labels(np.asarray(durations, dtype=np.float64), *self.boundaries)

    def describe(self, max_duration: float) -> list[str]:
        q1, q2 = self.boundaries
        return [f"0-{q1:g}min", f"{q1:g}-{q2:g}min", f"{q2:g}-{max_duration:g}min"]


def duration_tertiles(durations) -> DurationGroups:
    """
    Split durations into three equal-count groups at the 1/3 and 2/3 quantiles.

    Examples
    --------
    >>> duration_tertiles(range(1, 10)).labels.tolist()
    [0, 0, 0, 1, 1, 1, 2, 2, 2]
    """
    d = np.asarray(list(durations), dtype=np.float64)
    if d.size < 3:
        raise InsufficientDataError("duration tertiles need at least 3 samples")
    q1, q2 = np.quantile(d, [1.0 / 3.0, 2.0 / 3.0])
    return DurationGroups((float(q1), float(q2)), _tertile_labels(d, q1, q2))


def severity_groups(severities) -> np.ndarray:
    """Validated severity labels (1-4) as the class labels of the severity chain."""
    labels = np.asarray(list(severities), dtype=int)
    bad = sorted(set(labels.tolist()) - set(SEVERITY_LEVELS))
    if bad:
        raise ConfigurationError(f"severity labels must lie in {SEVERITY_LEVELS}, got {bad}")
    return labels


@dataclass
class GroupClassifier:
    """One-vs-rest boosted score per class; the predicted class has the highest score."""

    classes: tuple[Any, ...]
    models: tuple[BoostedTrees, ...]

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.column_stack([m.predict(X) for m in self.models])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.classes)[np.argmax(self.scores(X), axis=1)]


def fit_group_classifier(
    reduced: np.ndarray, labels, config: RegressorConfig = DEFAULT_CLASSIFIER
) -> GroupClassifier:
    """Fit a boosted regressor on the 0/1 indicator of each class."""
    labels = np.asarray(labels)
    classes = tuple(sorted(set(labels.tolist())))
    if len(classes) < 2:
        raise InsufficientDataError("group classifier needs at least two classes")
    models = tuple(
        fit_gbdt_arrays(reduced, (labels == c).astype(np.float64), config)
        for c in classes
    )
    return GroupClassifier(classes, models)


@dataclass
class ExplainChain:
    """TF-IDF, SVD and group classifier applied in sequence to raw text."""

    tfidf: TfIdfModel
    svd: SvdModel
    classifier: GroupClassifier
    name: str = "severity"

    @property
    def classes(self) -> tuple:
        return self.classifier.classes

    def predict_scores(self, texts: Sequence[str]) -> np.ndarray:
        reduced = self.svd.transform(tfidf_transform(self.tfidf, texts))
        return self.classifier.scores(reduced)

    def predict(self, texts: Sequence[str]) -> np.ndarray:
        return np.asarray(self.classes)[np.argmax(self.predict_scores(texts), axis=1)]


def build_chain(
    descriptions: Sequence[str],
    labels,
    n_components: int = N_COMPONENTS,
    n_iter: int = N_ITER,
    seed: int = 0,
    classifier_config: RegressorConfig = DEFAULT_CLASSIFIER,
    name: str = "severity",
) -> ExplainChain:
    """Fit the whole text -> class chain on one corpus."""
    tfidf = tfidf_fit(descriptions)
    matrix = tfidf_transform(tfidf, descriptions)
    svd, reduced = truncated_svd(matrix, n_components, n_iter, seed)
    classifier = fit_group_classifier(reduced, labels, classifier_config.with_seed(seed))
    logger.info("%s chain: %d documents, %d terms, %d classes", name, matrix.shape[0], matrix.shape[1], len(classifier.classes))
    return ExplainChain(tfidf, svd, classifier, name)


@dataclass(frozen=True)
class WordImportance:
    token: str
    weight: float
    class_label: Any


def lime_explain(
    description: str,
    classifier,
    class_label,
    n_samples: int = 1000,
    seed: int = 0,
    kernel_width: float = KERNEL_WIDTH,
    alpha: float = RIDGE_ALPHA,
    top_k: int = TOP_K,
    bigrams: bool = False,
) -> list[WordImportance]:
    """
    Local word importances for one description and one class.

    Parameters
    ----------
    description : str
    classifier : object
        Anything with ``classes`` and ``predict_scores(texts) -> (n, n_classes)``,
        typically an :class:`ExplainChain`.
    class_label
        Class whose score is explained.
    n_samples : int, default 1000
        Perturbed texts, the first being the unmasked description.
    bigrams : bool, default False
        Also explain by adjacent word pairs such as ``"lane blocked"``. A
        pair counts as present in a sample when both of its words are kept.

    Returns
    -------
    list of WordImportance
        The ``top_k`` features by absolute weight, largest first.

    Notes
    -----
    Every distinct word is kept with probability 0.5 per sample. Samples are
    weighted by ``exp(-D^2 / kernel_width^2)`` where ``D`` is the cosine
    distance between the sample's presence vector and all-ones, and a ridge
    regression from presence to class score gives the weights.
    Words are masked, never pairs, so the perturbed texts are the same with
    or without ``bigrams``.
    """
    if not isinstance(description, str):
        raise TypeError("description must be a string")
    tokens = tokenize(description)
    words = list(dict.fromkeys(tokens))
    if not words:
        raise EncodingError("description has no words to explain")
    classes = list(classifier.classes)
    if class_label not in classes:
        raise ConfigurationError(f"class {class_label!r} not among {classes}")
    column = classes.index(class_label)

    rng = np.random.default_rng(seed)
    d = len(words)
    presence = (rng.random((n_samples, d)) < 0.5).astype(np.float64)
    presence[0] = 1.0
    index = {w: i for i, w in enumerate(words)}
    texts = [
        " ".join(tok for tok in tokens if row[index[tok]] == 1.0)
        for row in presence
    ]
    scores = np.asarray(classifier.predict_scores(texts), dtype=np.float64)[:, column]

    kept = presence.sum(axis=1)
    distance = 1.0 - np.sqrt(kept / d)
    weights = np.exp(-(distance**2) / kernel_width**2)

    names, features = list(words), presence
    if bigrams:
        pairs, seen = [], set()
        for a, b in zip(tokens, tokens[1:]):
            if a != b and frozenset((a, b)) not in seen:
                seen.add(frozenset((a, b)))
                pairs.append((a, b))
        names += [f"{a} {b}" for a, b in pairs]
        both = [presence[:, index[a]] * presence[:, index[b]] for a, b in pairs]
        features = np.column_stack([presence, *both]) if both else presence
    surrogate = Ridge(alpha=alpha)
    surrogate.fit(features, scores, sample_weight=weights)

    importances = [WordImportance(w, float(c), class_label) for w, c in zip(names, surrogate.coef_)]
    order = sorted(range(len(names)), key=lambda i: -abs(importances[i].weight))
    return [importances[i] for i in order[:top_k]]


def write_explanation(
    importances: Sequence[WordImportance],
    csv_path: Union[str, PathLike],
    svg_path: Union[str, PathLike] | None = None,
    title: str = "",
) -> pd.DataFrame:
    """CSV ``class,token,weight`` and an optional horizontal bar chart."""
    frame = pd.DataFrame(
        {
            "class": [w.class_label for w in importances],
            "token": [w.token for w in importances],
            "weight": [w.weight for w in importances],
        }
    )
    frame.to_csv(csv_path, index=False, float_format="%.10g")
    if svg_path is not None:
        from .plotting import bar_chart

        bar_chart(frame["token"].tolist(), frame["weight"].tolist(), svg_path,
                  ylabel="weight", horizontal=True, title=title)
    return frame
