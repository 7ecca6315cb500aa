"""Comment corpora: CSV loading, tokenization, term-frequency and tf-idf matrices."""

import csv
import re
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp


class Label(str, Enum):
    SATD = "SATD"
    NON_SATD = "NonSATD"
    UNKNOWN = "Unknown"


class CorpusError(Exception):
    """Base class for corpus ingestion problems."""


class SchemaError(CorpusError):
    pass


class EmptyCorpusError(CorpusError):
    pass


class RowError(CorpusError):
    pass


LABELED_COLUMNS = ("projectname", "classification", "commenttext")
UNLABELED_COLUMNS = ("projectname", "commenttext")

# classification value that maps to NonSATD; everything else in a labeled
# file (DESIGN, DEFECT, IMPLEMENTATION, ...) is a SATD
_NON_SATD_CLASSIFICATION = "without_classification"

# one token = maximal run of alphanumerics; underscores split like punctuation
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# grouped multi-line comments can exceed the default 128 KiB csv field limit
csv.field_size_limit(16 * 1024 * 1024)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on every non-alphanumeric character.

    No stemming, no stop-word removal; duplicates kept in order.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Comment:
    id: int
    project: str
    text: str
    label: Label


@dataclass
class Corpus:
    """Ordered collection of comments plus a project -> comment-ids index.

    Iteration order is the input-file order; after `load_corpus` the ids are
    dense 0..n-1. Corpora produced by `restrict` keep the original ids.
    """

    comments: list[Comment]
    projects: dict[str, list[int]]

    def __len__(self) -> int:
        return len(self.comments)

    def __iter__(self):
        return iter(self.comments)

    @property
    def project_names(self) -> list[str]:
        return list(self.projects.keys())

    def ids(self) -> list[int]:
        return [c.id for c in self.comments]

    def label_array(self) -> np.ndarray:
        """Labels as int8: 1 = SATD, 0 = NonSATD, -1 = Unknown."""
        codes = {Label.SATD: 1, Label.NON_SATD: 0, Label.UNKNOWN: -1}
        return np.array([codes[c.label] for c in self.comments], dtype=np.int8)

    def satd_ids(self) -> set[int]:
        return {c.id for c in self.comments if c.label is Label.SATD}

    def restrict(self, ids) -> "Corpus":
        """Sub-corpus with the given comment ids, original order and ids kept."""
        keep = set(ids)
        comments = [c for c in self.comments if c.id in keep]
        projects: dict[str, list[int]] = {}
        for c in comments:
            projects.setdefault(c.project, []).append(c.id)
        return Corpus(comments=comments, projects=projects)

    def without_project(self, name: str) -> "Corpus":
        return self.restrict(c.id for c in self.comments if c.project != name)

    def only_project(self, name: str) -> "Corpus":
        if name not in self.projects:
            raise KeyError(f"unknown project {name!r}")
        return self.restrict(self.projects[name])


def _normalize_classification(value: str) -> str:
    return value.strip().lower().replace(" ", "_")


def load_corpus(path, format: str = "labeled_csv") -> Corpus:
    """Load a comment CSV (RFC 4180, UTF-8, header row required).

    labeled_csv needs columns (projectname, classification, commenttext);
    a comment is NonSATD iff its classification is WITHOUT_CLASSIFICATION
    (case/underscore/space-insensitive), otherwise SATD. unlabeled_csv needs
    (projectname, commenttext) and yields Unknown labels throughout.
    """
    if format not in ("labeled_csv", "unlabeled_csv"):
        raise ValueError(f"unknown corpus format {format!r}")
    required = LABELED_COLUMNS if format == "labeled_csv" else UNLABELED_COLUMNS

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyCorpusError(f"{path}: file is empty") from None
        names = [h.strip().lower() for h in header]
        for col in required:
            if col not in names:
                raise SchemaError(f"{path}: missing column {col!r}")
        idx = {col: names.index(col) for col in required}

        comments: list[Comment] = []
        projects: dict[str, list[int]] = {}
        for row in reader:
            if not row:
                continue
            if len(row) != len(names):
                raise RowError(
                    f"{path}: row {reader.line_num}: expected {len(names)} "
                    f"fields, got {len(row)}"
                )
            cid = len(comments)
            project = row[idx["projectname"]]
            text = row[idx["commenttext"]]
            if format == "labeled_csv":
                cls = _normalize_classification(row[idx["classification"]])
                label = Label.NON_SATD if cls == _NON_SATD_CLASSIFICATION else Label.SATD
            else:
                label = Label.UNKNOWN
            comments.append(Comment(id=cid, project=project, text=text, label=label))
            projects.setdefault(project, []).append(cid)

    if not comments:
        raise EmptyCorpusError(f"{path}: no data rows")
    return Corpus(comments=comments, projects=projects)


@dataclass
class TermMatrix:
    """Raw term-frequency matrix; row i holds the counts for row_ids[i]."""

    vocabulary: dict[str, int]
    counts: sp.csr_matrix
    row_ids: np.ndarray


@dataclass
class FeatureMatrix:
    """tf-idf weights with the same shape and row order as its TermMatrix."""

    vocabulary: dict[str, int]
    weights: sp.csr_matrix
    row_ids: np.ndarray


def build_term_matrix(corpus: Corpus, vocabulary: dict[str, int] | None = None) -> TermMatrix:
    """Count tokens per comment.

    Without a vocabulary, columns are assigned in first-occurrence order over
    the corpus; with one, unseen tokens are dropped (fixed model dimension).
    """
    token_lists = [tokenize(c.text) for c in corpus.comments]
    if vocabulary is None:
        vocabulary = {}
        for tokens in token_lists:
            for tok in tokens:
                if tok not in vocabulary:
                    vocabulary[tok] = len(vocabulary)

    rows, cols, data = [], [], []
    for i, tokens in enumerate(token_lists):
        seen: dict[int, int] = {}
        for tok in tokens:
            j = vocabulary.get(tok)
            if j is not None:
                seen[j] = seen.get(j, 0) + 1
        for j, count in seen.items():
            rows.append(i)
            cols.append(j)
            data.append(count)
    counts = sp.csr_matrix(
        (data, (rows, cols)),
        shape=(len(corpus.comments), len(vocabulary)),
        dtype=np.int64,
    )
    counts.sort_indices()
    return TermMatrix(
        vocabulary=vocabulary,
        counts=counts,
        row_ids=np.array(corpus.ids(), dtype=np.int64),
    )


def tfidf(tm: TermMatrix) -> FeatureMatrix:
    """Smooth-idf tf-idf: tf * (1 + ln((1+n)/(1+df))), rows L2-normalized.

    All-zero rows (empty comments) stay zero; the sparsity pattern is
    preserved exactly.
    """
    counts = tm.counts
    n = counts.shape[0]
    df = counts.getnnz(axis=0)
    idf = 1.0 + np.log((1.0 + n) / (1.0 + df))
    weights = counts.astype(np.float64).multiply(idf[np.newaxis, :]).tocsr()
    norms = np.sqrt(np.asarray(weights.multiply(weights).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    weights = sp.diags(scale).dot(weights).tocsr()
    weights.sort_indices()
    return FeatureMatrix(vocabulary=tm.vocabulary, weights=weights, row_ids=tm.row_ids.copy())
