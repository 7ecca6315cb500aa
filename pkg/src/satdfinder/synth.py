"""Synthetic comment corpora for demos and tests.

Plants the classic strong keywords in most SATD comments, a weaker
"smelly" vocabulary in the hard ones, and a trap keyword that is only
reliable inside a single project (so fixed keyword lists overreach on it).
"""

import csv
import random

from .corpus import Comment, Corpus, Label

STRONG_TOKENS = ("todo", "fixme", "hack", "workaround")
TRAP_TOKEN = "xxx"

HARD_HINTS = (
    "ugly", "refactor", "temporary", "cleanup", "broken", "wrong",
    "inefficient", "legacy", "fragile", "revisit", "rework", "smell",
    "kludge", "rewrite", "clumsy", "messy",
)

FILLER = (
    "the", "build", "node", "value", "parse", "return", "index", "buffer",
    "stream", "cache", "config", "handler", "message", "client", "server",
    "thread", "lock", "file", "path", "string", "list", "check", "create",
    "update", "remove", "load", "store", "init", "close", "open", "read",
    "write", "get", "set", "test", "data", "result", "error", "state",
    "event", "queue", "map", "key", "table", "row", "column", "query",
    "format", "header", "body", "request", "response", "token", "user",
    "name", "type", "size", "count", "offset", "length", "flag", "mode",
    "level", "timer", "null", "empty", "loop", "array", "object", "field",
    "method", "class", "module", "util", "helper", "context", "wrapper",
)

_SATD_CLASSIFICATIONS = ("DESIGN", "DEFECT", "IMPLEMENTATION", "TEST")


def synthetic_corpus(
    projects: tuple[str, ...] = ("alpha", "bravo", "carol", "delta", "echo", "fox"),
    comments_per_project: int = 120,
    satd_ratio: float = 0.25,
    easy_fraction: float = 0.55,
    seed: int = 0,
) -> Corpus:
    """Generate a labeled corpus whose strong patterns are exactly STRONG_TOKENS.

    Every hint occurrence inside a hard SATD is echoed into a random non-SATD
    comment with probability 0.75, which pins each hint's precision around
    0.57 (far below the mining threshold) while hint co-occurrence still
    separates hard SATDs for the learners.
    """
    rng = random.Random(seed)
    comments: list[Comment] = []
    project_index: dict[str, list[int]] = {}
    trap_project = projects[0]

    for project in projects:
        rows: list[tuple[list[str], bool]] = []
        hint_occurrences: list[str] = []
        for _ in range(comments_per_project):
            is_satd = rng.random() < satd_ratio
            words = rng.sample(FILLER, k=rng.randint(4, 9))
            if is_satd:
                if rng.random() < easy_fraction:
                    words.insert(rng.randrange(len(words)), rng.choice(STRONG_TOKENS))
                    if project == trap_project and rng.random() < 0.4:
                        words.append(TRAP_TOKEN)
                else:
                    for hint in rng.sample(HARD_HINTS, k=rng.randint(2, 4)):
                        words.insert(rng.randrange(len(words)), hint)
                        hint_occurrences.append(hint)
            elif project != trap_project and rng.random() < 0.03:
                words.append(TRAP_TOKEN)
            rows.append((words, is_satd))

        non_satd_rows = [i for i, (_, is_satd) in enumerate(rows) if not is_satd]
        if non_satd_rows:
            for hint in hint_occurrences:
                if rng.random() < 0.75:
                    rows[rng.choice(non_satd_rows)][0].append(hint)

        for words, is_satd in rows:
            cid = len(comments)
            text = "// " + " ".join(words)
            label = Label.SATD if is_satd else Label.NON_SATD
            comments.append(Comment(id=cid, project=project, text=text, label=label))
            project_index.setdefault(project, []).append(cid)
    return Corpus(comments=comments, projects=project_index)


def write_labeled_csv(corpus: Corpus, path, seed: int = 0) -> None:
    rng = random.Random(seed)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["projectname", "classification", "commenttext"])
        for comment in corpus.comments:
            if comment.label is Label.SATD:
                classification = rng.choice(_SATD_CLASSIFICATIONS)
            else:
                classification = "WITHOUT_CLASSIFICATION"
            writer.writerow([comment.project, classification, comment.text])


def write_unlabeled_csv(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["projectname", "commenttext"])
        for comment in corpus.comments:
            writer.writerow([comment.project, comment.text])
