import math

import numpy as np
import pytest
from sklearn.linear_model import LogisticRegression

from satdfinder.corpus import Label
from satdfinder.patterns import classify_by_patterns, mine_patterns
from satdfinder.review import (
    Estimate,
    ReviewConfig,
    estimate_satd_total,
    estimate_total,
    init_session,
    next_batch,
    run_simulated,
    should_stop,
    submit_labels,
    temporary_label,
    undefined_estimate,
)
from satdfinder.synth import synthetic_corpus

from conftest import make_corpus

S, N = Label.SATD, Label.NON_SATD


def nb_config(**kwargs):
    return ReviewConfig(learner="nb", **kwargs)


@pytest.fixture(scope="module")
def synth():
    return synthetic_corpus(comments_per_project=60, seed=3)


@pytest.fixture(scope="module")
def synth_split(synth):
    target_name = synth.project_names[-1]
    return synth.without_project(target_name), synth.only_project(target_name)


# ---------------------------------------------------------------------------
# temporary_label
# ---------------------------------------------------------------------------


def test_temporary_label_all_zero_probabilities():
    labels = {1: 0, 2: 0, 3: 0}
    updated = temporary_label({1: 0.0, 2: 0.0, 3: 0.0}, labels)
    assert updated == labels


def test_temporary_label_pseudocode_trace():
    # order (3:0.9, 1:0.6, 2:0.5); count crosses 1 at id 1 -> label buffer head 3
    # and clear the buffer; count crosses 2 at id 2 -> label buffer head 2
    updated = temporary_label({1: 0.6, 2: 0.5, 3: 0.9}, {1: 0, 2: 0, 3: 0})
    assert updated == {1: 0, 2: 1, 3: 1}


def test_temporary_label_single_certain_item():
    assert temporary_label({7: 1.0}, {7: 0}) == {7: 1}


def test_temporary_label_keeps_existing_labels():
    updated = temporary_label({2: 0.1}, {1: 1, 2: 0})
    assert updated[1] == 1


def test_temporary_label_tie_breaks_by_ascending_id():
    # equal probabilities: id 1 is walked first and heads the buffer
    updated = temporary_label({2: 0.5, 1: 0.5}, {1: 0, 2: 0})
    assert updated == {1: 1, 2: 0}


def test_temporary_label_bounded_by_probability_mass():
    rng = np.random.RandomState(5)
    for _ in range(50):
        n = rng.randint(1, 30)
        lreg = {i: float(rng.rand()) for i in range(n)}
        updated = temporary_label(lreg, {i: 0 for i in range(n)})
        assigned = sum(updated.values())
        assert assigned <= math.ceil(sum(lreg.values()))


# ---------------------------------------------------------------------------
# estimate_satd_total
# ---------------------------------------------------------------------------


def oracle_estimate(scores, is_labeled, is_confirmed, max_rounds=100):
    """Independent pseudocode re-implementation using sklearn's solver."""
    scores = np.asarray(scores, float)
    is_labeled = np.asarray(is_labeled, bool)
    if not is_labeled.any():
        return None
    flags = np.asarray(is_confirmed, bool).copy()
    unlabeled = np.flatnonzero(~is_labeled)
    total = int(flags.sum())
    last = 0
    rounds = 0
    while total != last and rounds < max_rounds:
        if flags.all() or not flags.any():
            break
        lr = LogisticRegression(C=1.0, max_iter=10000, tol=1e-12)
        lr.fit(scores.reshape(-1, 1), flags.astype(int))
        positive = list(lr.classes_).index(1)
        probs = lr.predict_proba(scores[unlabeled].reshape(-1, 1))[:, positive]
        order = np.lexsort((unlabeled, -probs))
        count, target, first = 0.0, 1, -1
        for j in order:
            count += probs[j]
            if first < 0:
                first = int(unlabeled[j])
            if count >= target:
                flags[first] = True
                target += 1
                first = -1
        last = total
        total = int(flags.sum())
        rounds += 1
    return total


def test_estimate_undefined_before_any_label():
    est = estimate_satd_total(np.array([0.5, 0.6]), [False, False], [False, False])
    assert not est.defined
    assert math.isnan(est.estimated_total)


def test_estimate_equals_found_when_all_labeled():
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    labeled = [True] * 4
    confirmed = [True, True, False, False]
    est = estimate_satd_total(scores, labeled, confirmed)
    assert est.defined and est.converged
    assert est.estimated_total == 2.0


def test_estimate_zero_found_is_zero():
    est = estimate_satd_total(np.array([0.9, 0.1]), [True, False], [False, False])
    assert est.estimated_total == 0.0
    assert est.converged


def test_estimate_matches_pseudocode_oracle():
    rng = np.random.RandomState(0)
    for _ in range(20):
        n = rng.randint(15, 40)
        true_flags = rng.rand(n) < 0.3
        scores = np.clip(0.55 * true_flags + 0.25 * rng.rand(n), 0, 1)
        order = np.argsort(-scores)
        k = rng.randint(1, max(2, n // 3))
        is_labeled = np.zeros(n, bool)
        is_labeled[order[:k]] = True
        is_confirmed = is_labeled & true_flags
        est = estimate_satd_total(scores, is_labeled, is_confirmed)
        assert int(est.estimated_total) == oracle_estimate(scores, is_labeled, is_confirmed)


def test_estimate_at_least_found():
    rng = np.random.RandomState(9)
    for _ in range(20):
        n = rng.randint(10, 50)
        scores = rng.rand(n)
        is_labeled = rng.rand(n) < 0.4
        if not is_labeled.any():
            is_labeled[0] = True
        is_confirmed = is_labeled & (rng.rand(n) < 0.5)
        est = estimate_satd_total(scores, is_labeled, is_confirmed)
        assert est.estimated_total >= is_confirmed.sum()


def test_estimate_is_deterministic_fixed_point():
    scores = np.linspace(0, 1, 25)
    is_labeled = scores > 0.7
    is_confirmed = scores > 0.85
    first = estimate_satd_total(scores, is_labeled, is_confirmed)
    second = estimate_satd_total(scores, is_labeled, is_confirmed)
    assert first == second


# ---------------------------------------------------------------------------
# session lifecycle
# ---------------------------------------------------------------------------


def test_init_session_strips_both_sides(synth_split):
    source, target = synth_split
    mined = mine_patterns(source)
    session = init_session(source, target, patterns=mined, config=nb_config())
    expected = classify_by_patterns(target, mined.tokens)
    assert session.easy_found == expected.easy_satd
    assert session.target_ids == expected.remainder
    assert set(session.easy_found).isdisjoint(session.target_ids)


def test_init_session_empty_pattern_set_keeps_full_target(synth_split):
    source, target = synth_split
    session = init_session(source, target, patterns=None, config=nb_config())
    assert session.target_ids == target.ids()
    assert session.easy_found == []


def test_init_session_all_matching_target_completes_immediately(synth_split):
    source, _ = synth_split
    target = make_corpus([("t", "todo one", S), ("t", "todo two", N)])
    session = init_session(source, target, patterns=["todo"], config=nb_config())
    assert session.target_ids == []
    assert session.exhausted
    assert next_batch(session) == []


def test_init_session_requires_labeled_source(synth_split):
    _, target = synth_split
    unlabeled = make_corpus([("s", "todo", Label.UNKNOWN)])
    with pytest.raises(ValueError, match="labeled"):
        init_session(unlabeled, target)


def test_next_batch_clamps_to_remainder(synth_split):
    source, target = synth_split
    small = target.restrict(target.ids()[:7])
    session = init_session(source, small, config=nb_config())
    assert len(next_batch(session, k=10)) == 7


def test_next_batch_matches_full_sort_oracle(synth_split):
    source, target = synth_split
    session = init_session(source, target, config=nb_config())
    batch = next_batch(session, k=10)
    ranked = sorted(session.target_ids, key=lambda cid: (-session.score_of(cid), cid))
    assert batch == ranked[:10]


def test_next_batch_tie_breaks_by_ascending_id(synth_split):
    source, target = synth_split
    session = init_session(source, target.restrict(target.ids()[:12]), config=nb_config())
    session.target_scores = np.zeros(len(session.target_ids))
    session.outstanding_batch = None
    assert next_batch(session, k=5) == sorted(session.target_ids)[:5]


def test_next_batch_idempotent_until_labels(synth_split):
    source, target = synth_split
    session = init_session(source, target, config=nb_config())
    first = next_batch(session)
    assert next_batch(session) == first


def test_submit_labels_grows_found(synth_split):
    source, target = synth_split
    session = init_session(source, target, config=nb_config())
    batch = next_batch(session)
    answers = {cid: (S if i < 4 else N) for i, cid in enumerate(batch)}
    submit_labels(session, answers)
    assert len(session.found_hard) == 4
    assert len(session.labeled) == len(batch)
    assert session.latest_estimate.defined
    assert session.estimate_history[-1][0] == len(batch)


def test_submit_labels_rejects_unknown_id_atomically(synth_split):
    source, target = synth_split
    session = init_session(source, target, config=nb_config())
    batch = next_batch(session)
    bogus = max(target.ids()) + 1000
    answers = {batch[0]: S, bogus: N}
    with pytest.raises(ValueError, match=str(bogus)):
        submit_labels(session, answers)
    assert session.labeled == {}
    assert session.outstanding_batch == batch


def test_submit_labels_rejects_relabeling(synth_split):
    source, target = synth_split
    session = init_session(source, target, config=nb_config())
    batch = next_batch(session)
    submit_labels(session, {cid: N for cid in batch})
    next_batch(session)
    with pytest.raises(ValueError, match="not part of the outstanding batch"):
        submit_labels(session, {batch[0]: S})


def test_submit_labels_requires_outstanding_batch(synth_split):
    source, target = synth_split
    session = init_session(source, target, config=nb_config())
    with pytest.raises(ValueError, match="outstanding"):
        submit_labels(session, {target.ids()[0]: S})


def test_estimate_total_undefined_then_defined(synth_split):
    source, target = synth_split
    session = init_session(source, target, config=nb_config())
    assert not estimate_total(session).defined
    submit_labels(session, {cid: N for cid in next_batch(session)})
    assert estimate_total(session).defined


# ---------------------------------------------------------------------------
# stopping rule
# ---------------------------------------------------------------------------


def stub_estimate(session, found, total):
    session.found_hard = set(range(found))
    session.latest_estimate = Estimate(float(total), True, 1)


def test_should_stop_boundary(synth_split):
    source, target = synth_split
    session = init_session(source, target, config=nb_config(target_recall=0.9))
    stub_estimate(session, found=90, total=100)
    assert should_stop(session)
    stub_estimate(session, found=89, total=100)
    assert not should_stop(session)


def test_should_stop_nothing_found(synth_split):
    source, target = synth_split
    session = init_session(source, target, config=nb_config(target_recall=0.9))
    stub_estimate(session, found=0, total=50)
    assert not should_stop(session)


def test_should_stop_undefined_estimate(synth_split):
    source, target = synth_split
    session = init_session(source, target, config=nb_config(target_recall=0.9))
    session.latest_estimate = undefined_estimate()
    assert not should_stop(session)


def test_should_stop_literal_rule_caps_at_half(synth_split):
    source, target = synth_split
    config = nb_config(target_recall=0.9, literal_stop_rule=True)
    session = init_session(source, target, config=config)
    stub_estimate(session, found=100, total=100)
    assert not should_stop(session)  # 100/200 < 0.9
    assert should_stop(session, target_recall=0.4)


# ---------------------------------------------------------------------------
# simulated runs
# ---------------------------------------------------------------------------


def test_run_simulated_exhaustion_reaches_full_recall(synth_split):
    source, target = synth_split
    mined = mine_patterns(source)
    result = run_simulated(source, target, patterns=mined, config=nb_config(target_recall=None))
    assert result.final_recall == 1.0
    assert result.final_cost == 1.0
    assert sorted(result.inspection_order) == sorted(result.session.target_ids)
    recalls = [row.recall for row in result.trace]
    costs = [row.cost for row in result.trace]
    assert recalls == sorted(recalls)
    assert costs == sorted(costs)


def test_run_simulated_monotone_found(synth_split):
    source, target = synth_split
    result = run_simulated(source, target, config=nb_config(target_recall=None))
    founds = [row.found for row in result.trace]
    labels = [row.labeled for row in result.trace]
    assert founds == sorted(founds)
    assert labels == sorted(labels)


def test_run_simulated_stopping_mode_stops_early(synth_split):
    source, target = synth_split
    result = run_simulated(source, target, config=nb_config(target_recall=0.7))
    assert result.final_cost < 1.0
    assert result.trace[-1].estimated_total >= len(result.session.found_hard) or math.isnan(
        result.trace[-1].estimated_total
    )


def test_run_simulated_vacuous_target(synth_split):
    source, _ = synth_split
    target = make_corpus(
        [("t", "todo leftover", S), ("t", "plain text here", N), ("t", "more text", N)]
    )
    result = run_simulated(source, target, patterns=["todo"], config=nb_config())
    assert result.final_recall == 1.0
    assert result.final_cost == 0.0
    assert result.inspection_order == []


def test_run_simulated_requires_labeled_target(synth_split):
    source, _ = synth_split
    target = make_corpus([("t", "something", Label.UNKNOWN)])
    with pytest.raises(ValueError, match="labeled target"):
        run_simulated(source, target)


def test_run_simulated_reproducible_with_seed(synth_split):
    source, target = synth_split
    config = dict(learner="rf", target_recall=None, seed=123,
                  learner_config={"n_estimators": 20})
    a = run_simulated(source, target, config=ReviewConfig(**config))
    b = run_simulated(source, target, config=ReviewConfig(**config))
    assert a.inspection_order == b.inspection_order

    def key(rows):
        return [
            (r.labeled, r.found, r.recall, r.cost,
             None if math.isnan(r.estimated_total) else r.estimated_total)
            for r in rows
        ]

    assert key(a.trace) == key(b.trace)
