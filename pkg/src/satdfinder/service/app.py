"""HTTP review service: upload a comment corpus, label batches, export results.

Mutations on one session serialize behind an asyncio lock. Retraining runs on
a worker thread after the label response is sent (the reviewer's reading time
hides it); batch issuance waits for any pending retrain so ranking always uses
the freshest model.
"""

import asyncio
import csv
import io
import math
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.staticfiles import StaticFiles

from ..corpus import CorpusError
from ..review import apply_labels, next_batch, refresh_estimate, should_stop
from .schemas import (
    BatchItem,
    BatchView,
    Counters,
    CorpusCreated,
    EstimateView,
    HealthView,
    LabelRequest,
    OverrideRequest,
    SessionCreateRequest,
    SessionView,
)
from .store import ServiceStore, SessionHandle, UnknownCorpusError, UnknownSessionError

_LOCKS_ATTR = "_satd_lock"
_RETRAIN_ATTR = "_satd_retrain_task"


def _lock_of(handle: SessionHandle) -> asyncio.Lock:
    lock = getattr(handle, _LOCKS_ATTR, None)
    if lock is None:
        lock = asyncio.Lock()
        setattr(handle, _LOCKS_ATTR, lock)
    return lock


def _retrain_task(handle: SessionHandle):
    return getattr(handle, _RETRAIN_ATTR, None)


def _view(handle: SessionHandle) -> SessionView:
    session = handle.session
    estimate = session.latest_estimate
    estimated_recall = None
    if estimate.defined and estimate.estimated_total > 0:
        estimated_recall = len(session.found_hard) / estimate.estimated_total
    return SessionView(
        session_id=handle.session_id,
        corpus_id=handle.corpus_id,
        project=handle.project,
        status=handle.status,
        counters=Counters(
            easy_found=len(set(session.easy_found) - handle.overrides),
            overridden=len(handle.overrides),
            labeled=len(session.labeled),
            found_hard=len(session.found_hard),
            remaining=len(session.target_ids) - len(session.labeled),
        ),
        estimate=EstimateView(
            defined=estimate.defined,
            estimated_total=None if math.isnan(estimate.estimated_total) else estimate.estimated_total,
            converged=estimate.converged if estimate.defined else None,
            iterations=estimate.iterations if estimate.defined else None,
        ),
        estimated_recall=estimated_recall,
        suggest_stop=should_stop(session),
        config={
            "learner": session.config.learner,
            "target_recall": session.config.target_recall,
            "seed": session.config.seed,
            "batch_size": session.config.batch_size,
        },
        estimate_history=list(session.estimate_history),
    )


def _export_csv(handle: SessionHandle) -> str:
    session = handle.session
    text_of = {c.id: (c.project, c.text) for c in session.target_corpus.comments}
    # easy matches were stripped from the session corpus; fetch their text from
    # the full upload stored in the handle's easy snapshot
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "projectname", "commenttext", "source"])
    rows = []
    for cid in set(session.easy_found) - handle.overrides:
        rows.append((cid, "easy"))
    for cid in session.found_hard:
        rows.append((cid, "human"))
    for cid, source in sorted(rows):
        project, text = handle.easy_texts[cid] if source == "easy" else text_of[cid]
        writer.writerow([cid, project, text, source])
    return buf.getvalue()


def create_app(store: ServiceStore, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="satdfinder review service", version="0.1.0")

    async def settle(handle: SessionHandle) -> None:
        """Wait until no retrain is pending."""
        while True:
            task = _retrain_task(handle)
            if task is None:
                return
            try:
                await task
            finally:
                if _retrain_task(handle) is task:
                    setattr(handle, _RETRAIN_ATTR, None)

    async def acquire_settled(handle: SessionHandle) -> asyncio.Lock:
        """Take the session lock with no retrain in flight.

        A lock waiter can be woken between a label submission (which schedules
        a retrain) and the retrain task's first step, so re-check after
        acquiring and go around again.
        """
        while True:
            await settle(handle)
            lock = _lock_of(handle)
            await lock.acquire()
            if _retrain_task(handle) is None:
                return lock
            lock.release()

    def get_handle(session_id: str) -> SessionHandle:
        try:
            return store.get(session_id)
        except UnknownSessionError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")

    @app.get("/healthz", response_model=HealthView)
    async def healthz():
        return HealthView()

    @app.post("/corpora", response_model=CorpusCreated, status_code=201)
    async def upload_corpus(request: Request):
        content = await request.body()
        if not content:
            raise HTTPException(status_code=400, detail="empty upload")
        try:
            corpus_id, corpus = store.save_corpus(content)
        except CorpusError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return CorpusCreated(
            corpus_id=corpus_id, comments=len(corpus), projects=corpus.project_names
        )

    @app.post("/sessions", response_model=SessionView, status_code=201)
    async def create_session(request: SessionCreateRequest):
        try:
            handle = store.create_session(
                corpus_id=request.corpus_id,
                learner=request.learner,
                target_recall=request.target_recall,
                seed=request.seed,
                batch_size=request.batch_size,
            )
        except UnknownCorpusError:
            raise HTTPException(status_code=404, detail=f"unknown corpus {request.corpus_id!r}")
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return _view(handle)

    @app.get("/sessions/{session_id}", response_model=SessionView)
    async def get_session(session_id: str):
        return _view(get_handle(session_id))

    @app.get("/sessions/{session_id}/batch", response_model=BatchView)
    async def get_batch(session_id: str, n: int = 10):
        handle = get_handle(session_id)
        if handle.stopped:
            raise HTTPException(status_code=409, detail="session is stopped")
        if n < 1:
            raise HTTPException(status_code=400, detail="n must be >= 1")
        lock = await acquire_settled(handle)
        try:
            fresh = handle.session.outstanding_batch is None
            ids = next_batch(handle.session, k=n)
            if ids and fresh:
                store.append_event(handle, "batch-issued", ids=ids)
        finally:
            lock.release()
        text_of = {c.id: c.text for c in handle.session.target_corpus.comments}
        return BatchView(
            session_id=session_id,
            items=[BatchItem(id=cid, text=text_of[cid]) for cid in ids],
        )

    @app.post("/sessions/{session_id}/labels", response_model=SessionView)
    async def post_labels(session_id: str, request: LabelRequest):
        handle = get_handle(session_id)
        if handle.stopped:
            raise HTTPException(status_code=409, detail="session is stopped")

        async def retrain_and_estimate():
            async with _lock_of(handle):
                loop = asyncio.get_running_loop()
                await loop.run_in_executor(None, handle.session.retrain)
                fresh = refresh_estimate(handle.session)
                if fresh.defined:
                    store.append_event(
                        handle,
                        "estimate-recorded",
                        labeled=len(handle.session.labeled),
                        estimated_total=fresh.estimated_total,
                        converged=fresh.converged,
                        iterations=fresh.iterations,
                    )

        lock = await acquire_settled(handle)
        try:
            try:
                applied = apply_labels(handle.session, request.answers)
            except ValueError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            store.append_event(
                handle,
                "label-submitted",
                answers={str(cid): label.value for cid, label in applied.items()},
            )
            # interim estimate on current scores so the response is informative;
            # the post-retrain estimate lands in the log right after
            estimate = refresh_estimate(handle.session)
            if estimate.defined:
                store.append_event(
                    handle,
                    "estimate-recorded",
                    labeled=len(handle.session.labeled),
                    estimated_total=estimate.estimated_total,
                    converged=estimate.converged,
                    iterations=estimate.iterations,
                )
            view = _view(handle)
            # registered while the lock is held, so every later lock holder
            # either awaits this task or re-checks and backs off
            setattr(handle, _RETRAIN_ATTR, asyncio.create_task(retrain_and_estimate()))
        finally:
            lock.release()
        return view

    @app.post("/sessions/{session_id}/overrides", response_model=SessionView)
    async def post_overrides(session_id: str, request: OverrideRequest):
        handle = get_handle(session_id)
        easy = set(handle.session.easy_found)
        unknown = [cid for cid in request.ids if cid not in easy]
        if unknown:
            raise HTTPException(
                status_code=409,
                detail=f"ids not auto-classified by patterns: {sorted(unknown)}",
            )
        async with _lock_of(handle):
            new = set(request.ids) - handle.overrides
            if new:
                handle.overrides.update(new)
                store.append_event(handle, "override-recorded", ids=sorted(new))
        return _view(handle)

    @app.post("/sessions/{session_id}/stop", response_model=SessionView)
    async def stop_session(session_id: str):
        handle = get_handle(session_id)
        lock = await acquire_settled(handle)
        try:
            if not handle.stopped:
                handle.stopped = True
                store.append_event(handle, "session-stopped")
        finally:
            lock.release()
        return _view(handle)

    @app.get("/sessions/{session_id}/export")
    async def export_session(session_id: str):
        # lock-free snapshot: exports depend on labels and overrides only,
        # which mutate on this event loop, never on the retrain thread
        handle = get_handle(session_id)
        return Response(content=_export_csv(handle), media_type="text/csv")

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
