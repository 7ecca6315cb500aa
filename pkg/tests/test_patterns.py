import pytest

from satdfinder.corpus import Label, tokenize
from satdfinder.patterns import (
    MAT_PATTERNS,
    PatternSet,
    PatternStats,
    UndefinedFitnessError,
    classify_by_patterns,
    fitness,
    mine_patterns,
    pattern_stats,
)

from conftest import make_corpus

S, N = Label.SATD, Label.NON_SATD


# ---------------------------------------------------------------------------
# pattern_stats
# ---------------------------------------------------------------------------


def test_pattern_stats_all_positive():
    corpus = make_corpus([("p", f"fixme case {i}", S) for i in range(5)])
    stats = pattern_stats(corpus, "fixme")
    assert (stats.positives, stats.true_positives) == (5, 5)
    assert stats.precision == 1.0


def test_pattern_stats_absent_pattern(toy_corpus):
    stats = pattern_stats(toy_corpus, "nonexistent")
    assert (stats.positives, stats.true_positives) == (0, 0)
    with pytest.raises(UndefinedFitnessError):
        stats.precision  # noqa: B018


def test_pattern_stats_matches_exhaustive_scan(toy_corpus):
    for token in {t for c in toy_corpus.comments for t in tokenize(c.text)}:
        stats = pattern_stats(toy_corpus, token)
        expected_p = sum(1 for c in toy_corpus.comments if token in tokenize(c.text))
        expected_tp = sum(
            1
            for c in toy_corpus.comments
            if token in tokenize(c.text) and c.label is S
        )
        assert (stats.positives, stats.true_positives) == (expected_p, expected_tp)


def test_pattern_stats_requires_labels():
    corpus = make_corpus([("p", "todo", Label.UNKNOWN)])
    with pytest.raises(ValueError, match="labeled"):
        pattern_stats(corpus, "todo")


def test_stats_validates_bounds():
    with pytest.raises(ValueError):
        PatternStats(pattern="x", positives=2, true_positives=3)


# ---------------------------------------------------------------------------
# fitness
# ---------------------------------------------------------------------------


def test_fitness_perfect_precision_collapses_to_p():
    assert fitness(PatternStats("x", 10, 10), exponent=4) == pytest.approx(10.0)


def test_fitness_direct_evaluation():
    # 3^4 / 6^3 = 81/216
    assert fitness(PatternStats("x", 6, 3), exponent=4) == pytest.approx(0.375)


def test_fitness_zero_positives_is_error():
    with pytest.raises(UndefinedFitnessError):
        fitness(PatternStats("x", 0, 0))


# ---------------------------------------------------------------------------
# mine_patterns
# ---------------------------------------------------------------------------


def test_mine_single_perfect_pattern():
    rows = [("p", f"aaa case {i}", S) for i in range(5)]
    # background tokens capped at 2/4 precision, below the threshold
    rows += [("p", "ugly mess here", S), ("p", "ugly mess here", N)] * 2
    corpus = make_corpus(rows)
    ps = mine_patterns(corpus, threshold=0.8)
    assert ps.tokens == ["aaa"]
    assert ps.patterns[0].positives == 5
    assert ps.patterns[0].true_positives == 5


def test_mine_empty_corpus():
    ps = mine_patterns(make_corpus([]))
    assert ps.tokens == []


def test_mine_orders_by_fitness_and_removes_matches():
    rows = []
    # 'todo': P=TP=6 -> fitness 6; 'hack': P=TP=3 -> fitness 3
    rows += [("p", f"todo t{i}", S) for i in range(6)]
    rows += [("p", f"hack h{i}", S) for i in range(3)]
    rows += [("p", "plain text", N)] * 6
    ps = mine_patterns(make_corpus(rows))
    assert ps.tokens == ["todo", "hack"]


def test_mine_equal_precision_prefers_frequent():
    rows = [("p", f"common flag {i}", S) for i in range(8)]
    rows += [("p", f"rare marker {i}", S) for i in range(2)]
    rows += [("p", "noise words here", N)] * 5
    ps = mine_patterns(make_corpus(rows))
    # all perfect precision: fitness = P prefers the frequent tokens, and the
    # common/flag tie resolves lexicographically
    assert ps.tokens[0] == "common"
    assert ps.patterns[0].positives == 8


def test_mine_tie_breaks_lexicographically():
    # two tokens always co-occurring with identical stats: smaller token wins
    rows = [("p", f"zeta alpha {i}", S) for i in range(4)]
    rows += [("p", "filler", N)] * 3
    ps = mine_patterns(make_corpus(rows))
    assert ps.tokens[0] == "alpha"


def test_mine_threshold_stops_before_weak_patterns():
    rows = [("p", f"todo {i}", S) for i in range(5)]
    rows += [("p", "meh quality", S), ("p", "meh quality", N)]  # 'meh' at 0.5
    ps = mine_patterns(make_corpus(rows), threshold=0.8)
    assert ps.tokens == ["todo"]
    assert all(p.true_positives / p.positives >= 0.8 for p in ps.patterns)


def test_mine_stats_recorded_at_discovery_time():
    # 'todo' wins first (P=10) and its removal takes 4 hack comments with it,
    # so 'hack' must be recorded with the post-removal stats P=2
    rows = [("p", f"todo alone {i}", S) for i in range(6)]
    rows += [("p", f"todo hack {i}", S) for i in range(4)]
    rows += [("p", f"hack only {i}", S) for i in range(2)]
    rows += [("p", "noise", N)] * 5
    ps = mine_patterns(make_corpus(rows))
    assert ps.tokens[:2] == ["todo", "hack"]
    by_name = {p.pattern: p for p in ps.patterns}
    assert by_name["todo"].positives == 10
    assert by_name["hack"].positives == 2


def test_mine_terminates_on_unminable_corpus():
    ps = mine_patterns(make_corpus([("p", "same text", S), ("p", "same text", N)]))
    assert ps.tokens == []


def test_mine_validates_threshold():
    with pytest.raises(ValueError):
        mine_patterns(make_corpus([("p", "a", S)]), threshold=0.0)


# ---------------------------------------------------------------------------
# classify_by_patterns
# ---------------------------------------------------------------------------


def test_classify_empty_pattern_set(toy_corpus):
    part = classify_by_patterns(toy_corpus, PatternSet())
    assert part.easy_satd == []
    assert part.remainder == toy_corpus.ids()


def test_classify_token_exact_not_substring():
    corpus = make_corpus(
        [("p", "hackathon signup sheet", N), ("p", "an actual hack", S)]
    )
    part = classify_by_patterns(corpus, ["hack"])
    assert part.easy_satd == [1]
    assert part.remainder == [0]


def test_classify_matches_bruteforce_double_loop(toy_corpus):
    tokens = ["todo", "hack", "fixme"]
    part = classify_by_patterns(toy_corpus, tokens)
    expected = [
        c.id
        for c in toy_corpus.comments
        if any(t in tokenize(c.text) for t in tokens)
    ]
    assert part.easy_satd == expected
    assert sorted(part.easy_satd + part.remainder) == toy_corpus.ids()
    # union-of-match-sets property
    union = set()
    for t in tokens:
        union |= {c.id for c in toy_corpus.comments if t in tokenize(c.text)}
    assert set(part.easy_satd) == union


def test_classify_accepts_mat_list(toy_corpus):
    part = classify_by_patterns(toy_corpus, MAT_PATTERNS)
    assert 0 in part.easy_satd  # TODO comment
    assert 4 in part.easy_satd  # hack comment


def test_mat_patterns_value():
    assert MAT_PATTERNS == ("todo", "fixme", "hack", "xxx")
