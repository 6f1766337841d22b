"""HTTP face of the ABX listening test.

JSON endpoints for session lifecycle plus opaque audio URLs. The X
sample gets its own token, so clients cannot learn X's identity by
comparing URLs; correctness and per-trial truth only ever appear in the
post-close stats payload.
"""

from __future__ import annotations

import hashlib
import secrets
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .abx import AbxStore, load_pair_pool, session_statistics
from .errors import ConflictError, NotFoundError, ValidationError


class CreateSessionRequest(BaseModel):
    n_trials: int = Field(default=50, ge=1)
    seed: int | None = None
    listener: str = "anonymous"


class ResponseBody(BaseModel):
    choice: str


def create_app(pool_manifest, state_dir, ui_dir=None) -> FastAPI:
    pool = load_pair_pool(pool_manifest)
    store = AbxStore(state_dir)
    token_secret = secrets.token_hex(16)
    app = FastAPI(title="abx-listening-test")

    def audio_token(session_id: str, trial_id: str, slot: str) -> str:
        digest = hashlib.sha256(f"{token_secret}:{session_id}:{trial_id}:{slot}".encode())
        return digest.hexdigest()[:32]

    token_paths: dict[str, str] = {}

    def trial_payload(session_id: str, index: int) -> dict:
        session = store.get(session_id)
        if not 0 <= index < len(session.trials):
            raise NotFoundError(f"trial index {index} out of range")
        trial = session.trials[index]
        urls = {}
        for slot in ("A", "B", "X"):
            token = audio_token(session_id, trial.trial_id, slot)
            token_paths[token] = trial.sample_path(slot)
            urls[slot] = f"/audio/{token}"
        return {
            "session_id": session_id,
            "trial_id": trial.trial_id,
            "index": index,
            "total": len(session.trials),
            "answered": trial.answered,
            "a_url": urls["A"],
            "b_url": urls["B"],
            "x_url": urls["X"],
        }

    @app.exception_handler(NotFoundError)
    async def _not_found(request, exc):
        raise HTTPException(status_code=404, detail=str(exc))

    @app.exception_handler(ConflictError)
    async def _conflict(request, exc):
        raise HTTPException(status_code=409, detail=str(exc))

    @app.exception_handler(ValidationError)
    async def _invalid(request, exc):
        raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/sessions")
    def create_session(body: CreateSessionRequest):
        seed = body.seed if body.seed is not None else secrets.randbelow(2**31)
        session = store.create(pool, n_trials=body.n_trials, seed=seed, listener=body.listener)
        return {
            "session_id": session.session_id,
            "num_trials": len(session.trials),
            "listener": session.listener,
        }

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        session = store.get(session_id)
        return {
            "session_id": session.session_id,
            "num_trials": len(session.trials),
            "answered": session.num_answered,
            "closed": session.closed,
        }

    @app.get("/sessions/{session_id}/trials/{index}")
    def get_trial(session_id: str, index: int):
        return trial_payload(session_id, index)

    @app.post("/sessions/{session_id}/trials/{index}/response")
    def post_response(session_id: str, index: int, body: ResponseBody):
        session = store.get(session_id)
        if not 0 <= index < len(session.trials):
            raise NotFoundError(f"trial index {index} out of range")
        trial = session.trials[index]
        store.record_response(session_id, trial.trial_id, body.choice)
        return {
            "recorded": True,
            "trial_id": trial.trial_id,
            "answered": session.num_answered,
            "total": len(session.trials),
        }

    @app.post("/sessions/{session_id}/close")
    def close_session(session_id: str):
        session = store.close(session_id)
        return {"closed": True, "answered": session.num_answered}

    @app.get("/sessions/{session_id}/stats")
    def get_stats(session_id: str):
        session = store.get(session_id)
        if not session.closed:
            raise ConflictError("session must be closed before statistics are released")
        stats = session_statistics(session)
        payload = stats.to_dict()
        payload["per_trial"] = [
            {
                "trial_id": t.trial_id,
                "pair_id": t.pair.pair_id,
                "response": t.response,
                "x_is": t.x_is,
                "correct": t.correct,
            }
            for t in session.trials
            if t.answered
        ]
        return payload

    @app.get("/audio/{token}")
    def get_audio(token: str):
        path = token_paths.get(token)
        if path is None:
            raise NotFoundError("unknown audio token")
        return Response(content=Path(path).read_bytes(), media_type="audio/wav")

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
