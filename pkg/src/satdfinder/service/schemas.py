"""Request/response models of the review service API."""

from typing import Literal

from pydantic import BaseModel, Field


class HealthView(BaseModel):
    status: str = "ok"


class CorpusCreated(BaseModel):
    corpus_id: str
    comments: int
    projects: list[str]


class SessionCreateRequest(BaseModel):
    corpus_id: str
    learner: str | None = None  # service default when omitted
    target_recall: float = Field(default=0.9, gt=0.0, le=1.0)
    seed: int = 0
    batch_size: int = Field(default=10, ge=1)


class SessionConfigView(BaseModel):
    learner: str
    target_recall: float
    seed: int
    batch_size: int


class Counters(BaseModel):
    easy_found: int
    overridden: int
    labeled: int
    found_hard: int
    remaining: int


class EstimateView(BaseModel):
    defined: bool
    estimated_total: float | None = None
    converged: bool | None = None
    iterations: int | None = None


class SessionView(BaseModel):
    session_id: str
    corpus_id: str
    project: str
    status: Literal["active", "stopped", "exhausted"]
    counters: Counters
    estimate: EstimateView
    estimated_recall: float | None = None
    suggest_stop: bool
    config: SessionConfigView
    # (labels_so_far, estimated_total) pairs for progress displays
    estimate_history: list[tuple[int, float]] = []


class BatchItem(BaseModel):
    id: int
    text: str


class BatchView(BaseModel):
    session_id: str
    items: list[BatchItem]


class LabelRequest(BaseModel):
    answers: dict[int, Literal["SATD", "NonSATD"]]


class OverrideRequest(BaseModel):
    ids: list[int]


class ErrorDetail(BaseModel):
    detail: str
