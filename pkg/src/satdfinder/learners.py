"""Supervised learners behind a flat fit/score surface, plus the vote ensemble baseline.

The five base learners (lr, nb, svm, dt, rf) wrap scikit-learn estimators with
pinned, overridable hyperparameters. Naive Bayes expects raw term counts;
everything else expects tf-idf rows. Scores are ranking scores: higher means
more likely SATD.
"""

import io
import json
import pickle
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit
from sklearn.ensemble import RandomForestClassifier
from sklearn.linear_model import LogisticRegression, SGDClassifier
from sklearn.naive_bayes import MultinomialNB
from sklearn.tree import DecisionTreeClassifier

KINDS = ("lr", "nb", "svm", "dt", "rf")

# every key the ecosystem default leaves open; callers may override per kind
DEFAULT_CONFIG = {
    "lr": {"C": 1.0, "max_iter": 1000, "tol": 1e-6},
    "nb": {"alpha": 1.0},
    "svm": {"alpha": 1e-4, "max_iter": 1000, "tol": 1e-3},
    "dt": {},
    "rf": {"n_estimators": 100, "n_jobs": 1},
}


class DegenerateTrainingError(ValueError):
    """Training data contains fewer than two classes."""


def balanced_weights(labels) -> dict[int, float]:
    """Per-class weights n/(2*n_c): both classes carry equal total weight."""
    y = np.asarray(labels)
    n = y.size
    counts = {0: int((y == 0).sum()), 1: int((y == 1).sum())}
    if counts[0] == 0 or counts[1] == 0:
        raise DegenerateTrainingError("need at least one example of each class")
    return {c: n / (2 * counts[c]) for c in (0, 1)}


def gini_impurity(class_counts) -> float:
    """Gini impurity sum(p_i * (1 - p_i)) of a node's class counts."""
    counts = np.asarray(class_counts, dtype=float)
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float((p * (1.0 - p)).sum())


@dataclass
class Model:
    kind: str
    classifier: object
    seed: int
    config: dict = field(default_factory=dict)


def fit(kind: str, features: sp.spmatrix, labels, seed: int = 0, config: dict | None = None) -> Model:
    """Train one learner on 0/1 labels; raises DegenerateTrainingError on one class."""
    if kind not in KINDS:
        raise ValueError(f"unknown learner kind {kind!r}")
    y = np.asarray(labels, dtype=np.int64)
    if features.shape[0] != y.size:
        raise ValueError(f"{features.shape[0]} feature rows but {y.size} labels")
    balanced_weights(y)  # validates both classes are present

    cfg = dict(DEFAULT_CONFIG[kind])
    if config:
        cfg.update(config)

    if kind == "lr":
        clf = LogisticRegression(class_weight="balanced", **cfg)
    elif kind == "nb":
        clf = MultinomialNB(**cfg)
    elif kind == "svm":
        clf = SGDClassifier(loss="hinge", class_weight="balanced", random_state=seed, **cfg)
    elif kind == "dt":
        clf = DecisionTreeClassifier(criterion="gini", class_weight="balanced", random_state=seed, **cfg)
    else:
        clf = RandomForestClassifier(class_weight="balanced_subsample", random_state=seed, **cfg)
    clf.fit(features, y)
    return Model(kind=kind, classifier=clf, seed=seed, config=cfg)


def score(model: Model, features: sp.spmatrix) -> np.ndarray:
    """Ranking score per row: margin for lr/svm, log-odds for nb, positive fraction for dt/rf."""
    clf = model.classifier
    expected = getattr(clf, "n_features_in_", None)
    if expected is None:
        raise ValueError("model is not trained")
    if features.shape[1] != expected:
        raise ValueError(f"model expects {expected} features, got {features.shape[1]}")
    if model.kind in ("lr", "svm"):
        return np.asarray(clf.decision_function(features), dtype=float)
    if model.kind == "nb":
        log_proba = clf.predict_log_proba(features)
        return np.asarray(log_proba[:, 1] - log_proba[:, 0], dtype=float)
    return np.asarray(clf.predict_proba(features)[:, 1], dtype=float)


def serialize(model: Model) -> bytes:
    """Self-describing blob: JSON envelope (kind, seed, config) + pickled estimator."""
    envelope = json.dumps({"version": 1, "kind": model.kind, "seed": model.seed, "config": model.config})
    buf = io.BytesIO()
    buf.write(envelope.encode("utf-8"))
    buf.write(b"\n")
    pickle.dump(model.classifier, buf)
    return buf.getvalue()


def deserialize(blob: bytes) -> Model:
    head, _, rest = blob.partition(b"\n")
    envelope = json.loads(head.decode("utf-8"))
    if envelope.get("version") != 1:
        raise ValueError(f"unsupported model blob version {envelope.get('version')!r}")
    classifier = pickle.loads(rest)
    return Model(kind=envelope["kind"], classifier=classifier, seed=envelope["seed"], config=envelope["config"])


def _entropy(counts: np.ndarray) -> np.ndarray:
    """Binary entropy (base 2) per column from stacked class counts (2, k)."""
    total = counts.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / np.maximum(total, 1), 0.0)
        logp = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -(p * logp).sum(axis=0)


def information_gain_select(counts: sp.spmatrix, labels, k: int) -> np.ndarray:
    """Top-k token columns by information gain of their presence indicator.

    Ties keep column order; k is clamped to the vocabulary size.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    y = np.asarray(labels, dtype=np.int64)
    n = y.size
    k = min(k, counts.shape[1])

    present = counts.tocsr().astype(bool)
    pos_present = np.asarray(present[y == 1].sum(axis=0)).ravel().astype(float)
    neg_present = np.asarray(present[y == 0].sum(axis=0)).ravel().astype(float)
    n_pos = float((y == 1).sum())
    n_neg = float((y == 0).sum())

    h_label = _entropy(np.array([[n_pos], [n_neg]]))[0]
    with_token = np.vstack([pos_present, neg_present])
    without_token = np.vstack([n_pos - pos_present, n_neg - neg_present])
    n_with = with_token.sum(axis=0)
    n_without = without_token.sum(axis=0)
    conditional = (n_with / n) * _entropy(with_token) + (n_without / n) * _entropy(without_token)
    gain = h_label - conditional
    order = np.argsort(-gain, kind="stable")
    return order[:k]


@dataclass
class TmModel:
    """One count-based NB per source project on its own IG-selected features."""

    submodels: list[MultinomialNB]
    selected_columns: list[np.ndarray]
    feature_fraction: float


def tm_fit(
    project_counts: list[tuple[sp.spmatrix, np.ndarray]],
    feature_fraction: float = 0.1,
    alpha: float = 1.0,
) -> TmModel:
    """Fit the per-project ensemble: IG selection sized to each project's vocabulary."""
    if len(project_counts) < 2:
        raise ValueError("need at least two source projects")
    submodels = []
    selected = []
    for counts, labels in project_counts:
        counts = counts.tocsr()
        y = np.asarray(labels, dtype=np.int64)
        balanced_weights(y)  # both classes required, as for any learner
        present_cols = np.flatnonzero(counts.getnnz(axis=0) > 0)
        if present_cols.size == 0:
            raise DegenerateTrainingError("project has an empty vocabulary")
        k = max(1, int(feature_fraction * present_cols.size))
        local = information_gain_select(counts[:, present_cols], y, k)
        cols = present_cols[local]
        clf = MultinomialNB(alpha=alpha)
        clf.fit(counts[:, cols], y)
        submodels.append(clf)
        selected.append(cols)
    return TmModel(submodels=submodels, selected_columns=selected, feature_fraction=feature_fraction)


def _tm_votes(model: TmModel, counts: sp.spmatrix) -> tuple[np.ndarray, np.ndarray]:
    counts = counts.tocsr()
    votes = np.zeros(counts.shape[0], dtype=float)
    log_odds = np.zeros(counts.shape[0], dtype=float)
    for clf, cols in zip(model.submodels, model.selected_columns):
        lp = clf.predict_log_proba(counts[:, cols])
        odds = lp[:, 1] - lp[:, 0]
        votes += (odds > 0).astype(float)
        log_odds += odds
    return votes / len(model.submodels), log_odds / len(model.submodels)


def tm_score(model: TmModel, counts: sp.spmatrix) -> np.ndarray:
    """Fraction of sub-models voting SATD per row."""
    return _tm_votes(model, counts)[0]


def tm_ranking_score(model: TmModel, counts: sp.spmatrix) -> np.ndarray:
    """Vote fraction with equal-vote ties ordered by mean sub-model log-odds.

    The log-odds term is squashed into (-1/(2J), 1/(2J)), strictly inside half
    a vote step, so it can only reorder rows with an equal vote count.
    """
    vote_fraction, mean_log_odds = _tm_votes(model, counts)
    return vote_fraction + (expit(mean_log_odds) - 0.5) / len(model.submodels)
