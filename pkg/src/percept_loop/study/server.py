"""HTTP session API for live studies.

Endpoints: POST /sessions, GET /sessions/{id}/next,
POST /sessions/{id}/votes, GET /sessions/{id}/status, GET /images/{path},
plus the static browser frontend under /app when a bundle directory is
provided. Session state (schedule, cursor) lives server-side so a page
refresh resumes at the current unanswered trial; votes go straight to
the append-only log.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .. import dataio
from .records import DuplicateVoteError, VoteLog, VoteRecord
from .scheduling import TrialSchedule, sanity_check, schedule_trials


class CreateSessionRequest(BaseModel):
    subject_id: str | None = None


class VoteRequest(BaseModel):
    trial_token: str
    choice: str = Field(pattern="^(left|right)$")
    elapsed_ms: int = Field(gt=0)


@dataclass
class Session:
    session_id: str
    subject_id: str
    schedule: TrialSchedule
    tokens: list[str]
    cursor: int = 0
    acks: dict = field(default_factory=dict)
    votes: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.schedule.trials)

    @property
    def done(self) -> bool:
        return self.cursor >= self.total


def create_app(corpus_dir, votes_path, *, methods=None, contents=None,
               sanity_rate: float = 0.1, min_consistency: float = 0.8,
               seed: int = 0, study_id: str = "study",
               static_dir=None) -> FastAPI:
    corpus_dir = Path(corpus_dir)
    manifest = dataio.load_manifest(corpus_dir)
    all_methods = list(methods) if methods else manifest.method_ids()
    all_contents = list(contents) if contents else manifest.content_ids()
    image_paths = {
        (e.content_id, e.method_id): e.path
        for e in manifest.entries if e.role == "enhanced"
    }
    for cid in all_contents:
        for m in all_methods:
            if (cid, m) not in image_paths:
                raise ValueError(f"corpus lacks an image for ({cid!r}, {m!r})")

    app = FastAPI(title="pairwise study session API")
    log = VoteLog(votes_path)
    state_lock = threading.Lock()
    sessions: dict[str, Session] = {}
    counter = {"n": 0}

    def current_trial(session: Session):
        return session.schedule.trials[session.cursor]

    def trial_payload(session: Session) -> dict:
        if session.done:
            return {"done": True, "index": session.total,
                    "total": session.total}
        trial = current_trial(session)
        left_method = (trial.method_a if trial.presented_left == "A"
                       else trial.method_b)
        right_method = (trial.method_b if trial.presented_left == "A"
                        else trial.method_a)
        return {
            "done": False,
            "trial_token": session.tokens[session.cursor],
            "left_image_url":
                f"/images/{image_paths[(trial.content_id, left_method)]}",
            "right_image_url":
                f"/images/{image_paths[(trial.content_id, right_method)]}",
            "index": session.cursor,
            "total": session.total,
        }

    @app.post("/sessions")
    def create_session(request: CreateSessionRequest):
        with state_lock:
            counter["n"] += 1
            n = counter["n"]
        subject_id = request.subject_id or f"subj-{n:04d}"
        session_id = uuid.uuid4().hex[:16]
        import numpy as np
        session_seed = int(np.random.default_rng(
            [seed, n]).integers(0, 2 ** 31))
        schedule = schedule_trials(all_contents, all_methods, subject_id,
                                   sanity_rate=sanity_rate, seed=session_seed)
        tokens = [uuid.uuid4().hex for _ in schedule.trials]
        with state_lock:
            sessions[session_id] = Session(session_id=session_id,
                                           subject_id=subject_id,
                                           schedule=schedule, tokens=tokens)
        return {"session_id": session_id, "schedule_id": session_id,
                "subject_id": subject_id, "study_id": study_id,
                "total_trials": len(schedule.trials)}

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown session {session_id!r}")
        return session

    @app.get("/sessions/{session_id}/next")
    def next_trial(session_id: str):
        with state_lock:
            return trial_payload(get_session(session_id))

    @app.post("/sessions/{session_id}/votes")
    def submit_vote(session_id: str, vote: VoteRequest):
        with state_lock:
            session = get_session(session_id)
            if vote.trial_token in session.acks:
                return session.acks[vote.trial_token]
            if session.done:
                raise HTTPException(status_code=409,
                                    detail="session already complete")
            if vote.trial_token != session.tokens[session.cursor]:
                raise HTTPException(
                    status_code=409,
                    detail="trial token does not match the current trial")
            trial = current_trial(session)
            chose_left = vote.choice == "left"
            letter = (trial.presented_left if chose_left
                      else ("B" if trial.presented_left == "A" else "A"))
            record = VoteRecord(
                study_id=study_id,
                subject_id=session.subject_id,
                content_id=trial.content_id,
                method_a=trial.method_a,
                method_b=trial.method_b,
                choice=letter,
                presented_left=trial.presented_left,
                elapsed_ms=vote.elapsed_ms,
                is_sanity=trial.is_sanity,
                timestamp_ms=int(time.time() * 1000),
            )
            try:
                sequence = log.append(record)
            except DuplicateVoteError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            session.votes.append(record)
            session.cursor += 1
            ack = {"accepted": True, "sequence": sequence,
                   "done": session.done, "index": session.cursor,
                   "total": session.total}
            session.acks[vote.trial_token] = ack
            return ack

    @app.get("/sessions/{session_id}/status")
    def session_status(session_id: str):
        with state_lock:
            session = get_session(session_id)
            payload = {
                "completed": session.done,
                "answered": session.cursor,
                "total": session.total,
                "sanity": None,
            }
            has_sanity = any(t.is_sanity for t in session.schedule.trials)
            if session.done and has_sanity:
                result = sanity_check(session.votes, min_consistency)
                payload["sanity"] = {
                    "passed": result.passed,
                    "consistency": result.consistency,
                    "n_sanity": result.n_sanity,
                }
            return payload

    @app.get("/images/{path:path}")
    def serve_image(path: str):
        target = (corpus_dir / path).resolve()
        if corpus_dir.resolve() not in target.parents:
            raise HTTPException(status_code=400, detail="invalid image path")
        if not target.is_file():
            raise HTTPException(status_code=404,
                                detail=f"no such image: {path}")
        return FileResponse(target, media_type="image/png")

    if static_dir is not None:
        app.mount("/app", StaticFiles(directory=str(static_dir), html=True),
                  name="frontend")

        @app.get("/")
        def index():
            return RedirectResponse(url="/app/")

    return app
