"""Assisted review loop: rank unlabeled comments, query an oracle in batches,
retrain incrementally, and estimate how many SATDs remain undiscovered."""

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from . import learners
from .corpus import Corpus, Label, TermMatrix, build_term_matrix, tfidf
from .patterns import PatternSet, classify_by_patterns


@dataclass
class ReviewConfig:
    learner: str = "rf"
    batch_size: int = 10
    # None disables the stopping rule (inspect to exhaustion)
    target_recall: float | None = 0.9
    seed: int = 0
    # use the pseudocode ratio found/(found+estimate) instead of found/estimate
    literal_stop_rule: bool = False
    learner_config: dict | None = None
    estimator_max_rounds: int = 100
    # inverse L2 strength of the estimator's internal logistic regression;
    # None fits it unregularized, which collapses to a step function whenever
    # the confirmed positives separate cleanly from the unlabeled scores
    estimator_regularization: float | None = 1.0


@dataclass(frozen=True)
class Estimate:
    estimated_total: float
    converged: bool
    iterations: int
    defined: bool = True


def undefined_estimate() -> Estimate:
    return Estimate(estimated_total=float("nan"), converged=False, iterations=0, defined=False)


def _fit_logistic_1d(
    x: np.ndarray,
    y: np.ndarray,
    c: float | None = 1.0,
    max_iter: int = 100,
    tol: float = 1e-10,
):
    """Single-feature logistic regression with intercept (Newton).

    `c` is the inverse L2 strength on the slope (the intercept stays free),
    matching the convention of the usual estimators. With c=None the fit is
    unregularized; on separable input the Hessian then collapses, iteration
    stops, and the saturated coefficients are returned as-is (expit handles
    the extremes).
    """
    ridge = 0.0 if c is None else 1.0 / c
    b0 = 0.0
    b1 = 0.0
    for _ in range(max_iter):
        p = expit(b0 + b1 * x)
        g0 = float((p - y).sum())
        g1 = float(((p - y) * x).sum()) + ridge * b1
        w = p * (1.0 - p)
        h00 = float(w.sum())
        h01 = float((w * x).sum())
        h11 = float((w * x * x).sum()) + ridge
        det = h00 * h11 - h01 * h01
        if not math.isfinite(det) or det < 1e-300:
            break
        d0 = (h11 * g0 - h01 * g1) / det
        d1 = (-h01 * g0 + h00 * g1) / det
        if not (math.isfinite(d0) and math.isfinite(d1)):
            break
        b0 -= d0
        b1 -= d1
        if max(abs(d0), abs(d1)) < tol:
            break
    return b0, b1


def temporary_label(lreg: Mapping[int, float], labels: Mapping[int, int]) -> dict[int, int]:
    """Spread temporary positive labels over unlabeled items by probability mass.

    Walk the lreg keys in descending-probability order (ties: ascending id),
    accumulating probabilities into a running count; every time the count
    reaches the next integer target, the first item buffered since the last
    assignment is labeled 1 and the buffer is cleared. The count never resets.
    """
    updated = dict(labels)
    count = 0.0
    target = 1
    first: int | None = None
    for i in sorted(lreg, key=lambda i: (-lreg[i], i)):
        count += lreg[i]
        if first is None:
            first = i
        if count >= target:
            updated[first] = 1
            target += 1
            first = None
    return updated


def _assign_temporary(probs: np.ndarray, positions: np.ndarray, flags: np.ndarray) -> None:
    """Array form of temporary_label, mutating the label flags in place."""
    order = np.lexsort((positions, -probs))
    count = 0.0
    target = 1
    first = -1
    for k in order:
        count += float(probs[k])
        if first < 0:
            first = int(positions[k])
        if count >= target:
            flags[first] = True
            target += 1
            first = -1


def estimate_satd_total(
    scores: np.ndarray,
    is_labeled: np.ndarray,
    is_confirmed: np.ndarray,
    max_rounds: int = 100,
    regularization: float | None = 1.0,
) -> Estimate:
    """Estimate the total number of SATDs among the scored comments.

    Inputs are aligned arrays over every target comment in ascending-id order:
    the current model score, whether a human labeled it, and whether that label
    was SATD. Starting from the confirmed positives, the procedure fits a
    one-feature logistic regression score -> label, spreads temporary labels
    over the unlabeled comments, and repeats until the label total stops
    changing (capped at max_rounds; converged=False if the cap hits first).
    """
    scores = np.asarray(scores, dtype=float)
    is_labeled = np.asarray(is_labeled, dtype=bool)
    is_confirmed = np.asarray(is_confirmed, dtype=bool)
    if not is_labeled.any():
        return undefined_estimate()

    flags = is_confirmed.copy()
    unlabeled = np.flatnonzero(~is_labeled)
    total = int(flags.sum())
    last = 0
    rounds = 0
    while total != last and rounds < max_rounds:
        b0, b1 = _fit_logistic_1d(scores, flags.astype(float), c=regularization)
        probs = expit(b0 + b1 * scores[unlabeled])
        _assign_temporary(probs, unlabeled, flags)
        last = total
        total = int(flags.sum())
        rounds += 1
    return Estimate(estimated_total=float(total), converged=total == last, iterations=rounds)


class Session:
    """State of one review loop over a target project.

    Construct through init_session. Mutating operations (next_batch,
    submit_labels) are not thread-safe; callers own the serialization.
    """

    def __init__(
        self,
        config: ReviewConfig,
        target_corpus: Corpus,
        easy_found: list[int],
        source_labels: np.ndarray,
        source_counts: sp.csr_matrix,
        source_weights: sp.csr_matrix,
        target_counts: sp.csr_matrix,
        target_weights: sp.csr_matrix,
    ):
        self.config = config
        self.target_corpus = target_corpus
        self.target_ids = target_corpus.ids()
        self.easy_found = list(easy_found)
        self._row_of = {cid: row for row, cid in enumerate(self.target_ids)}
        self._source_labels = source_labels
        self._source_counts = source_counts
        self._source_weights = source_weights
        self._target_counts = target_counts
        self._target_weights = target_weights

        self.labeled: dict[int, Label] = {}
        self.found_hard: set[int] = set()
        self.outstanding_batch: list[int] | None = None
        self.estimate_history: list[tuple[int, float]] = []
        self.latest_estimate: Estimate = undefined_estimate()
        self.model: learners.Model | None = None
        self.target_scores = np.zeros(len(self.target_ids), dtype=float)
        self.retrain()

    # -- state queries ------------------------------------------------------

    @property
    def exhausted(self) -> bool:
        return len(self.labeled) >= len(self.target_ids)

    def unlabeled_ids(self) -> list[int]:
        return [cid for cid in self.target_ids if cid not in self.labeled]

    def score_of(self, cid: int) -> float:
        return float(self.target_scores[self._row_of[cid]])

    # -- training -----------------------------------------------------------

    def _features(self, matrix_kind: str):
        if self.config.learner == "nb":
            return self._source_counts if matrix_kind == "source" else self._target_counts
        return self._source_weights if matrix_kind == "source" else self._target_weights

    def retrain(self) -> None:
        """Refit on source labels plus every human-labeled target comment."""
        source_x = self._features("source")
        lab_ids = sorted(self.labeled)
        if lab_ids:
            rows = [self._row_of[cid] for cid in lab_ids]
            x = sp.vstack([source_x, self._features("target")[rows]]).tocsr()
            y = np.concatenate(
                [
                    self._source_labels,
                    [1 if self.labeled[cid] is Label.SATD else 0 for cid in lab_ids],
                ]
            )
        else:
            x, y = source_x, self._source_labels
        self.model = learners.fit(
            self.config.learner, x, y, seed=self.config.seed, config=self.config.learner_config
        )
        if self.target_ids:
            self.target_scores = learners.score(self.model, self._features("target"))


def init_session(
    source: Corpus,
    target: Corpus,
    patterns: PatternSet | Iterable[str] | None = None,
    config: ReviewConfig | None = None,
) -> Session:
    """Strip pattern matches from both sides, featurize, and train the first model.

    The vocabulary comes from the stripped source comments only; target tokens
    unseen there are dropped so the model dimension stays fixed for the whole
    loop. With no patterns the session covers the full target.
    """
    config = config or ReviewConfig()
    if config.learner not in learners.KINDS:
        raise ValueError(f"unknown learner kind {config.learner!r}")
    if any(c.label is Label.UNKNOWN for c in source.comments):
        raise ValueError("source corpus must be fully labeled")

    if patterns is not None:
        pattern_tokens = patterns.tokens if isinstance(patterns, PatternSet) else list(patterns)
    else:
        pattern_tokens = []
    if pattern_tokens:
        source_hard = source.restrict(classify_by_patterns(source, pattern_tokens).remainder)
        target_part = classify_by_patterns(target, pattern_tokens)
        easy_found = target_part.easy_satd
        target_hard = target.restrict(target_part.remainder)
    else:
        source_hard = source
        easy_found = []
        target_hard = target

    tm_source = build_term_matrix(source_hard)
    tm_target = build_term_matrix(target_hard, vocabulary=tm_source.vocabulary)
    stacked = TermMatrix(
        vocabulary=tm_source.vocabulary,
        counts=sp.vstack([tm_source.counts, tm_target.counts]).tocsr(),
        row_ids=np.concatenate([tm_source.row_ids, tm_target.row_ids]),
    )
    weights = tfidf(stacked).weights
    n_source = tm_source.counts.shape[0]

    return Session(
        config=config,
        target_corpus=target_hard,
        easy_found=easy_found,
        source_labels=source_hard.label_array().astype(np.int64),
        source_counts=tm_source.counts,
        source_weights=weights[:n_source],
        target_counts=tm_target.counts,
        target_weights=weights[n_source:],
    )


def next_batch(session: Session, k: int | None = None) -> list[int]:
    """Top-k unlabeled comments by current score (ties: ascending id).

    Re-issues the outstanding batch unchanged until labels arrive; returns []
    once the target is exhausted. k clamps to the remainder size.
    """
    if session.outstanding_batch is not None:
        return list(session.outstanding_batch)
    k = session.config.batch_size if k is None else k
    if k <= 0:
        raise ValueError(f"batch size must be positive, got {k}")
    candidates = session.unlabeled_ids()
    if not candidates:
        return []
    candidates.sort(key=lambda cid: (-session.score_of(cid), cid))
    session.outstanding_batch = candidates[:k]
    return list(session.outstanding_batch)


def apply_labels(session: Session, answers: Mapping[int, Label | str]) -> dict[int, Label]:
    """Validate and record oracle answers for the outstanding batch.

    Every answer must name a comment from the outstanding batch that is not
    yet labeled; otherwise the whole submission is rejected unchanged. Leaves
    retraining and estimation to the caller.
    """
    if not answers:
        raise ValueError("no answers submitted")
    if session.outstanding_batch is None:
        raise ValueError("no outstanding batch to label")
    batch = set(session.outstanding_batch)
    normalized: dict[int, Label] = {}
    for cid, value in answers.items():
        label = Label(value)
        if label not in (Label.SATD, Label.NON_SATD):
            raise ValueError(f"comment {cid}: label must be SATD or NonSATD")
        if cid not in batch:
            raise ValueError(f"comment {cid} is not part of the outstanding batch")
        if cid in session.labeled:
            raise ValueError(f"comment {cid} is already labeled")
        normalized[cid] = label

    for cid, label in normalized.items():
        session.labeled[cid] = label
        if label is Label.SATD:
            session.found_hard.add(cid)
    session.outstanding_batch = None
    return normalized


def submit_labels(session: Session, answers: Mapping[int, Label | str]) -> Session:
    """Record oracle answers, then retrain and re-estimate synchronously."""
    apply_labels(session, answers)
    session.retrain()
    refresh_estimate(session)
    return session


def refresh_estimate(session: Session) -> Estimate:
    """Recompute the SATD-total estimate from current scores and labels."""
    estimate = estimate_total(session)
    session.latest_estimate = estimate
    if estimate.defined:
        session.estimate_history.append((len(session.labeled), estimate.estimated_total))
    return estimate


def estimate_total(session: Session) -> Estimate:
    """Estimate over the session's target comments; undefined before any label."""
    if not session.labeled:
        return undefined_estimate()
    order = sorted(range(len(session.target_ids)), key=lambda row: session.target_ids[row])
    ids = [session.target_ids[row] for row in order]
    scores = session.target_scores[order]
    is_labeled = np.array([cid in session.labeled for cid in ids], dtype=bool)
    is_confirmed = np.array([cid in session.found_hard for cid in ids], dtype=bool)
    return estimate_satd_total(
        scores,
        is_labeled,
        is_confirmed,
        max_rounds=session.config.estimator_max_rounds,
        regularization=session.config.estimator_regularization,
    )


def should_stop(session: Session, target_recall: float | None = None) -> bool:
    """Whether the estimated recall has reached the target (False when undefined)."""
    t_rec = target_recall if target_recall is not None else session.config.target_recall
    if t_rec is None:
        return False
    estimate = session.latest_estimate
    if not estimate.defined:
        return False
    found = len(session.found_hard)
    denominator = estimate.estimated_total
    if session.config.literal_stop_rule:
        denominator = found + estimate.estimated_total
    if denominator <= 0:
        return False
    return found / denominator >= t_rec


@dataclass
class TraceRow:
    labeled: int
    found: int
    recall: float
    cost: float
    estimated_total: float  # nan while undefined


@dataclass
class SimulationResult:
    inspection_order: list[int]
    trace: list[TraceRow]
    final_recall: float
    final_cost: float
    session: Session


def run_simulated(
    source: Corpus,
    target: Corpus,
    patterns: PatternSet | Iterable[str] | None = None,
    config: ReviewConfig | None = None,
) -> SimulationResult:
    """Drive a whole session with the target's ground-truth labels as the oracle.

    With a target recall configured, the loop stops on the estimator's signal;
    without one it runs to exhaustion. In the exhaustion mode, once every true
    SATD has been found the remaining comments cannot move the recall-cost
    curve (it is flat at recall 1), so they are appended in current-score
    order without further retraining.
    """
    config = config or ReviewConfig()
    if any(c.label is Label.UNKNOWN for c in target.comments):
        raise ValueError("simulation needs a fully labeled target")
    session = init_session(source, target, patterns=patterns, config=config)

    truth = session.target_corpus.satd_ids()
    n_hard = len(session.target_ids)
    m = len(truth)
    trace: list[TraceRow] = []
    inspection: list[int] = []
    if n_hard == 0 or m == 0:
        # vacuous target: recall is 1 by convention, nothing to inspect
        return SimulationResult(
            inspection_order=[], trace=[], final_recall=1.0, final_cost=0.0, session=session
        )

    stopping = config.target_recall is not None
    while True:
        if stopping and should_stop(session):
            break
        batch = next_batch(session)
        if not batch:
            break
        answers = {cid: Label.SATD if cid in truth else Label.NON_SATD for cid in batch}
        submit_labels(session, answers)
        inspection.extend(batch)
        found = len(session.found_hard)
        estimate = session.latest_estimate
        trace.append(
            TraceRow(
                labeled=len(session.labeled),
                found=found,
                recall=found / m,
                cost=len(session.labeled) / n_hard,
                estimated_total=estimate.estimated_total if estimate.defined else float("nan"),
            )
        )
        if not stopping and found == m and not session.exhausted:
            rest = session.unlabeled_ids()
            rest.sort(key=lambda cid: (-session.score_of(cid), cid))
            inspection.extend(rest)
            trace.append(
                TraceRow(labeled=n_hard, found=m, recall=1.0, cost=1.0, estimated_total=float("nan"))
            )
            break

    if trace:
        final_recall, final_cost = trace[-1].recall, trace[-1].cost
    else:
        final_recall, final_cost = 0.0, 0.0
    return SimulationResult(
        inspection_order=inspection,
        trace=trace,
        final_recall=final_recall,
        final_cost=final_cost,
        session=session,
    )
