import os

import pytest

from satdfinder.corpus import Comment, Corpus, Label


def make_corpus(rows):
    """Build a corpus from (project, text, label) tuples with dense ids."""
    comments = []
    projects = {}
    for project, text, label in rows:
        cid = len(comments)
        comments.append(Comment(id=cid, project=project, text=text, label=label))
        projects.setdefault(project, []).append(cid)
    return Corpus(comments=comments, projects=projects)


@pytest.fixture
def toy_corpus():
    S, N = Label.SATD, Label.NON_SATD
    return make_corpus(
        [
            ("p1", "// TODO fix the parser", S),
            ("p1", "// build first node and then second node", N),
            ("p1", "// FIXME formatters are not thread-safe", S),
            ("p1", "// get message header", N),
            ("p2", "// this is an ugly hack, sorry", S),
            ("p2", "// parameters to pass to script file", N),
            ("p2", "// TODO: clean this up", S),
            ("p2", "// todo list rendering widget", N),
        ]
    )


def dataset_path():
    return os.environ.get("SATD_DATASET")


def corrected_path():
    return os.environ.get("SATD_DATASET_CORRECTED")


needs_dataset = pytest.mark.skipif(
    dataset_path() is None,
    reason="published 10-project dataset not available (set SATD_DATASET); "
    "sandbox has no network access to fetch it",
)

needs_corrected = pytest.mark.skipif(
    corrected_path() is None,
    reason="corrected-label dataset not available (set SATD_DATASET_CORRECTED)",
)
