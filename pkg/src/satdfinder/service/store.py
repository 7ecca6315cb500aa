"""Durable session state: append-only JSON-lines event logs plus replay.

Each session owns one log file under <data_dir>/sessions/. Replay rebuilds
counters, the labeled set, the estimate history, and the outstanding batch
exactly; the model is refit once from the replayed labels (training is
deterministic, so a recovered session continues identically).
"""

import hashlib
import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from ..corpus import Corpus, Label, load_corpus
from ..patterns import PatternSet, mine_patterns
from ..review import (
    Estimate,
    ReviewConfig,
    Session,
    init_session,
    undefined_estimate,
)


class UnknownSessionError(KeyError):
    pass


class UnknownCorpusError(KeyError):
    pass


def _easy_texts(corpus: Corpus, easy_found: list[int]) -> dict[int, tuple[str, str]]:
    wanted = set(easy_found)
    return {c.id: (c.project, c.text) for c in corpus.comments if c.id in wanted}


@dataclass
class SessionHandle:
    session_id: str
    corpus_id: str
    project: str
    session: Session
    log_path: Path
    # project/text of the auto-classified comments, which the session corpus
    # no longer contains (needed for export)
    easy_texts: dict[int, tuple[str, str]] = field(default_factory=dict)
    overrides: set[int] = field(default_factory=set)
    stopped: bool = False

    @property
    def status(self) -> str:
        if self.stopped:
            return "stopped"
        if self.session.exhausted:
            return "exhausted"
        return "active"


class ServiceStore:
    """Owns the training corpus, the mined patterns, corpora, and sessions."""

    def __init__(self, data_dir, training_corpus_path, default_learner: str = "rf",
                 learner_config: dict | None = None):
        self.data_dir = Path(data_dir)
        self.corpora_dir = self.data_dir / "corpora"
        self.sessions_dir = self.data_dir / "sessions"
        self.corpora_dir.mkdir(parents=True, exist_ok=True)
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.default_learner = default_learner
        self.learner_config = learner_config
        self.training_corpus = load_corpus(training_corpus_path, "labeled_csv")
        self.patterns: PatternSet = mine_patterns(self.training_corpus)
        self.handles: dict[str, SessionHandle] = {}

    # -- corpora ------------------------------------------------------------

    def corpus_path(self, corpus_id: str) -> Path:
        return self.corpora_dir / f"{corpus_id}.csv"

    def save_corpus(self, content: bytes) -> tuple[str, Corpus]:
        """Content-addressed store of an unlabeled CSV upload (validated)."""
        corpus_id = hashlib.sha256(content).hexdigest()[:12]
        path = self.corpus_path(corpus_id)
        if not path.exists():
            path.write_bytes(content)
        try:
            corpus = load_corpus(path, "unlabeled_csv")
        except Exception:
            path.unlink(missing_ok=True)
            raise
        return corpus_id, corpus

    def load_uploaded(self, corpus_id: str) -> Corpus:
        path = self.corpus_path(corpus_id)
        if not path.exists():
            raise UnknownCorpusError(corpus_id)
        return load_corpus(path, "unlabeled_csv")

    # -- event log ----------------------------------------------------------

    def append_event(self, handle: SessionHandle, event: str, **payload) -> None:
        record = {"event": event, "ts": time.time(), **payload}
        with open(handle.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            fh.flush()

    # -- session lifecycle ----------------------------------------------------

    def _build_session(self, corpus: Corpus, config: ReviewConfig) -> Session:
        return init_session(self.training_corpus, corpus, patterns=self.patterns, config=config)

    def create_session(
        self,
        corpus_id: str,
        learner: str | None = None,
        target_recall: float = 0.9,
        seed: int = 0,
        batch_size: int = 10,
    ) -> SessionHandle:
        corpus = self.load_uploaded(corpus_id)
        config = ReviewConfig(
            learner=learner or self.default_learner,
            batch_size=batch_size,
            target_recall=target_recall,
            seed=seed,
            learner_config=self.learner_config,
        )
        session = self._build_session(corpus, config)
        session_id = uuid.uuid4().hex[:12]
        project = corpus.project_names[0] if corpus.project_names else ""
        handle = SessionHandle(
            session_id=session_id,
            corpus_id=corpus_id,
            project=project,
            session=session,
            log_path=self.sessions_dir / f"{session_id}.jsonl",
            easy_texts=_easy_texts(corpus, session.easy_found),
        )
        self.handles[session_id] = handle
        self.append_event(
            handle,
            "session-created",
            session_id=session_id,
            corpus_id=corpus_id,
            project=project,
            config={
                "learner": config.learner,
                "target_recall": config.target_recall,
                "seed": config.seed,
                "batch_size": config.batch_size,
            },
            easy_found=session.easy_found,
            target_comments=len(session.target_ids),
        )
        return handle

    def get(self, session_id: str) -> SessionHandle:
        try:
            return self.handles[session_id]
        except KeyError:
            raise UnknownSessionError(session_id) from None

    # -- recovery -------------------------------------------------------------

    def recover(self) -> int:
        """Replay every session log found under the data directory."""
        count = 0
        for path in sorted(self.sessions_dir.glob("*.jsonl")):
            handle = self._replay(path)
            self.handles[handle.session_id] = handle
            count += 1
        return count

    def _replay(self, log_path: Path) -> SessionHandle:
        events = []
        with open(log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(json.loads(line))
        if not events or events[0]["event"] != "session-created":
            raise RuntimeError(f"{log_path}: log does not start with session-created")
        created = events[0]
        config = ReviewConfig(
            learner=created["config"]["learner"],
            batch_size=created["config"]["batch_size"],
            target_recall=created["config"]["target_recall"],
            seed=created["config"]["seed"],
            learner_config=self.learner_config,
        )
        corpus = self.load_uploaded(created["corpus_id"])
        session = self._build_session(corpus, config)
        handle = SessionHandle(
            session_id=created["session_id"],
            corpus_id=created["corpus_id"],
            project=created["project"],
            session=session,
            log_path=log_path,
            easy_texts=_easy_texts(corpus, session.easy_found),
        )

        outstanding: list[int] | None = None
        history: list[tuple[int, float]] = []
        latest: Estimate = undefined_estimate()
        relabeled = False
        for event in events[1:]:
            kind = event["event"]
            if kind == "batch-issued":
                outstanding = [int(i) for i in event["ids"]]
            elif kind == "label-submitted":
                for cid, value in event["answers"].items():
                    label = Label(value)
                    session.labeled[int(cid)] = label
                    if label is Label.SATD:
                        session.found_hard.add(int(cid))
                outstanding = None
                relabeled = True
            elif kind == "estimate-recorded":
                latest = Estimate(
                    estimated_total=float(event["estimated_total"]),
                    converged=bool(event["converged"]),
                    iterations=int(event["iterations"]),
                )
                history.append((int(event["labeled"]), float(event["estimated_total"])))
            elif kind == "override-recorded":
                handle.overrides.update(int(i) for i in event["ids"])
            elif kind == "session-stopped":
                handle.stopped = True

        session.outstanding_batch = outstanding
        session.estimate_history = history
        session.latest_estimate = latest
        if relabeled:
            # one deterministic refit covers all replayed batches
            session.retrain()
        return handle
