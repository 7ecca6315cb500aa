import math
from collections import Counter

import numpy as np
import pytest

from satdfinder.corpus import (
    EmptyCorpusError,
    Label,
    RowError,
    SchemaError,
    build_term_matrix,
    load_corpus,
    tfidf,
    tokenize,
)

from conftest import make_corpus


# ---------------------------------------------------------------------------
# tokenize
# ---------------------------------------------------------------------------


def test_tokenize_table_comment():
    # hand application of the rule: lowercase, split on non-alphanumerics
    assert tokenize("// FIXME formatters are not thread-safe") == [
        "fixme", "formatters", "are", "not", "thread", "safe",
    ]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_case_folding_and_duplicates():
    assert tokenize("TODO TODO todo") == ["todo", "todo", "todo"]


def test_tokenize_punctuation_and_underscores():
    assert tokenize("@todo: fix_this-now!") == ["todo", "fix", "this", "now"]


def test_tokenize_idempotent_on_joined_output():
    for text in ["// TODO: x2 y_3", "", "a..b", "Hello, WORLD_1"]:
        tokens = tokenize(text)
        assert tokenize(" ".join(tokens)) == tokens


# ---------------------------------------------------------------------------
# load_corpus
# ---------------------------------------------------------------------------


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_labeled_csv(tmp_path):
    path = write_csv(
        tmp_path / "c.csv",
        "projectname,classification,commenttext\n"
        'JRuby,WITHOUT_CLASSIFICATION,"// build first node (and ignore its result) and then second node"\n'
        'EMF,IMPLEMENTATION,"// TODO Binary incompatibility; an old override must override putAll."\n'
        'EMF,without classification,"// plain comment, with a comma"\n',
    )
    corpus = load_corpus(path, "labeled_csv")
    assert len(corpus) == 3
    assert corpus.comments[0].label is Label.NON_SATD
    assert corpus.comments[1].label is Label.SATD
    # space/underscore and case equivalent for the non-SATD marker
    assert corpus.comments[2].label is Label.NON_SATD
    assert corpus.comments[1].text.startswith("// TODO Binary incompatibility")
    assert corpus.projects == {"JRuby": [0], "EMF": [1, 2]}
    assert [c.id for c in corpus.comments] == [0, 1, 2]


def test_load_unlabeled_csv(tmp_path):
    path = write_csv(
        tmp_path / "u.csv",
        "projectname,commenttext\nhttpd,// See TODO above\nhttpd,// normal comment\n",
    )
    corpus = load_corpus(path, "unlabeled_csv")
    assert all(c.label is Label.UNKNOWN for c in corpus.comments)


def test_load_preserves_text_exactly(tmp_path):
    raw = '  // weird   spacing\tand "quotes" and trailing  '
    path = tmp_path / "c.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        import csv

        w = csv.writer(fh)
        w.writerow(["projectname", "classification", "commenttext"])
        w.writerow(["p", "DESIGN", raw])
    corpus = load_corpus(path, "labeled_csv")
    assert corpus.comments[0].text == raw


def test_load_missing_column(tmp_path):
    path = write_csv(tmp_path / "c.csv", "projectname,commenttext\na,b\n")
    with pytest.raises(SchemaError, match="classification"):
        load_corpus(path, "labeled_csv")


def test_load_empty_file(tmp_path):
    with pytest.raises(EmptyCorpusError):
        load_corpus(write_csv(tmp_path / "e.csv", ""), "labeled_csv")
    with pytest.raises(EmptyCorpusError):
        load_corpus(
            write_csv(tmp_path / "h.csv", "projectname,classification,commenttext\n"),
            "labeled_csv",
        )


def test_load_malformed_row_names_row_number(tmp_path):
    path = write_csv(
        tmp_path / "c.csv",
        "projectname,classification,commenttext\np,DESIGN,ok\np,broken\n",
    )
    with pytest.raises(RowError, match="row 3"):
        load_corpus(path, "labeled_csv")


def test_restrict_and_project_split(toy_corpus):
    sub = toy_corpus.without_project("p2")
    assert [c.id for c in sub.comments] == [0, 1, 2, 3]
    only = toy_corpus.only_project("p2")
    assert [c.id for c in only.comments] == [4, 5, 6, 7]
    assert set(only.projects) == {"p2"}


# ---------------------------------------------------------------------------
# build_term_matrix
# ---------------------------------------------------------------------------


def test_term_matrix_direct_counts():
    corpus = make_corpus([("p", "todo todo hack", Label.SATD)])
    tm = build_term_matrix(corpus)
    assert tm.vocabulary == {"todo": 0, "hack": 1}
    assert tm.counts.toarray().tolist() == [[2, 1]]


def test_term_matrix_disjoint_rows():
    corpus = make_corpus(
        [("p", "alpha beta", Label.SATD), ("p", "gamma delta", Label.NON_SATD)]
    )
    tm = build_term_matrix(corpus)
    dense = tm.counts.toarray()
    assert set(np.flatnonzero(dense[0])) & set(np.flatnonzero(dense[1])) == set()


def test_term_matrix_matches_bruteforce_recount(toy_corpus):
    tm = build_term_matrix(toy_corpus)
    dense = tm.counts.toarray()
    # independent per-token recount over tokenize output
    for i, comment in enumerate(toy_corpus.comments):
        expected = Counter(tokenize(comment.text))
        for token, j in tm.vocabulary.items():
            assert dense[i, j] == expected.get(token, 0)
    # every vocabulary token occurs somewhere; no column is all-zero
    assert (dense.sum(axis=0) > 0).all()


def test_term_matrix_row_sums_equal_token_counts(toy_corpus):
    tm = build_term_matrix(toy_corpus)
    sums = np.asarray(tm.counts.sum(axis=1)).ravel()
    for i, comment in enumerate(toy_corpus.comments):
        assert sums[i] == len(tokenize(comment.text))


def test_term_matrix_fixed_vocabulary_drops_unseen():
    vocab_src = make_corpus([("p", "alpha beta", Label.SATD)])
    tm_src = build_term_matrix(vocab_src)
    other = make_corpus([("p", "beta gamma gamma", Label.NON_SATD)])
    tm = build_term_matrix(other, vocabulary=tm_src.vocabulary)
    assert tm.counts.shape == (1, 2)
    assert tm.counts.toarray().tolist() == [[0, 1]]


# ---------------------------------------------------------------------------
# tfidf
# ---------------------------------------------------------------------------


def reference_tfidf(dense_counts):
    """Independent dense implementation of the stated weighting."""
    n = len(dense_counts)
    v = len(dense_counts[0])
    df = [sum(1 for i in range(n) if dense_counts[i][j] > 0) for j in range(v)]
    idf = [1.0 + math.log((1 + n) / (1 + df[j])) for j in range(v)]
    out = [[dense_counts[i][j] * idf[j] for j in range(v)] for i in range(n)]
    for i in range(n):
        norm = math.sqrt(sum(x * x for x in out[i]))
        if norm > 0:
            out[i] = [x / norm for x in out[i]]
    return out


def test_tfidf_single_document_unit_norm():
    corpus = make_corpus([("p", "alpha alpha beta", Label.SATD)])
    fm = tfidf(build_term_matrix(corpus))
    row = fm.weights.toarray()[0]
    # n = df = 1 for every token: idf factor is exactly 1 before normalization
    assert fm.weights[0, 0] / fm.weights[0, 1] == pytest.approx(2.0)
    assert np.linalg.norm(row) == pytest.approx(1.0, abs=1e-9)


def test_tfidf_zero_row_stays_zero():
    corpus = make_corpus([("p", "alpha", Label.SATD), ("p", "", Label.NON_SATD)])
    fm = tfidf(build_term_matrix(corpus))
    assert fm.weights.toarray()[1].tolist() == [0.0]


def test_tfidf_matches_reference_on_four_documents():
    corpus = make_corpus(
        [
            ("p", "alpha beta alpha", Label.SATD),
            ("p", "beta gamma", Label.NON_SATD),
            ("p", "gamma gamma gamma delta", Label.NON_SATD),
            ("p", "alpha delta", Label.SATD),
        ]
    )
    tm = build_term_matrix(corpus)
    fm = tfidf(tm)
    expected = reference_tfidf(tm.counts.toarray().tolist())
    assert np.allclose(fm.weights.toarray(), expected, atol=1e-12)


def test_tfidf_preserves_sparsity_pattern(toy_corpus):
    tm = build_term_matrix(toy_corpus)
    fm = tfidf(tm)
    assert ((tm.counts.toarray() > 0) == (fm.weights.toarray() > 0)).all()


def test_tfidf_nonzero_rows_unit_norm(toy_corpus):
    fm = tfidf(build_term_matrix(toy_corpus))
    norms = np.sqrt(np.asarray(fm.weights.multiply(fm.weights).sum(axis=1)).ravel())
    for norm in norms:
        assert norm == pytest.approx(1.0, abs=1e-9) or norm == 0.0
