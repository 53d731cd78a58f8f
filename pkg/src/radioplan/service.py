"""HTTP service: sessions, prompt jobs, progress events, artifacts.

One worker executes turns per session (prompts to a busy session get
409); a bounded global pool caps concurrent sessions.  Progress events
form a totally ordered, gap-free stream per session addressed by a
numeric cursor, so clients resume with ``?since=<cursor>`` after a
dropped poll.  Artifacts and transcripts persist under the project
directory and survive restarts.
"""

from __future__ import annotations

import logging
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .agent import AgentConfig, model_backend, step
from .store import LogicalClock, ProjectStore, WallClock
from .tools import create_session

log = logging.getLogger(__name__)

DEFAULT_MAX_WORKERS = 4

CONTENT_TYPES = {".json": "application/json", ".png": "image/png",
                 ".osm": "application/xml"}


class ServiceConfig(BaseModel):
    project_root: str
    host: str = "127.0.0.1"
    port: int = 8040
    max_workers: int = DEFAULT_MAX_WORKERS
    backend_kind: str = "scripted-mock"
    backend_config: dict = Field(default_factory=dict)


class CreateSessionBody(BaseModel):
    session_id: str | None = None
    backend_kind: str | None = None
    backend_config: dict = Field(default_factory=dict)
    default_area: str | None = None
    resolution_m: float | None = None
    planning_overrides: dict = Field(default_factory=dict)
    profile_character: str | None = None


class PromptBody(BaseModel):
    text: str


class SessionRuntime:
    """Event log, job records, and serialized turn execution for a session."""

    def __init__(self, session):
        self.session = session
        self.lock = threading.Lock()
        self.cond = threading.Condition(self.lock)
        self.events: list[dict] = []
        self.busy = False
        self.jobs: dict[str, dict] = {}
        session.event_sink = self._on_agent_event
        self._active_job: str | None = None

    # -- events ---------------------------------------------------------

    def _append(self, event: dict) -> None:
        with self.cond:
            event = dict(event)
            event["seq"] = len(self.events) + 1
            self.events.append(event)
            self.cond.notify_all()

    def events_since(self, cursor: int, wait_s: float = 0.0) -> list[dict]:
        with self.cond:
            if wait_s > 0 and len(self.events) <= cursor:
                self.cond.wait(timeout=wait_s)
            return list(self.events[cursor:])

    def _on_agent_event(self, event: dict) -> None:
        kind = event.get("type")
        if kind in ("task_started", "task_progress", "task_finished", "task_aborted"):
            job_id = f"{self._active_job}/{event.get('task_id')}"
            state = {"task_started": "running", "task_progress": "running",
                     "task_finished": "succeeded", "task_aborted": "failed"}[kind]
            if kind == "task_finished" and event.get("status") != "succeeded":
                state = "failed"
            record = self.jobs.setdefault(job_id, {
                "job_id": job_id, "session_id": self.session.id,
                "task": event.get("tool"), "state": "queued",
                "percent": 0.0, "log_lines": [], "artifact_ids": []})
            if record["state"] not in ("succeeded", "failed"):  # terminal states stay
                record["state"] = state
                record["percent"] = max(record["percent"],
                                        float(event.get("percent", 0.0)))
            self._append({"type": "job", "job": dict(record)})
        elif kind == "artifact":
            if self._active_job and self._active_job in self.jobs:
                self.jobs[self._active_job]["artifact_ids"].append(
                    event["artifact"]["id"])
            self._append(event)
        else:
            self._append(event)

    # -- turns ----------------------------------------------------------

    def try_begin_turn(self, job_id: str) -> bool:
        with self.lock:
            if self.busy:
                return False
            self.busy = True
            self._active_job = job_id
            self.jobs[job_id] = {"job_id": job_id, "session_id": self.session.id,
                                 "task": "turn", "state": "queued",
                                 "percent": 0.0, "log_lines": [],
                                 "artifact_ids": []}
            return True

    def run_turn(self, job_id: str, prompt: str) -> None:
        job = self.jobs[job_id]
        try:
            job["state"] = "running"
            self._append({"type": "job", "job": dict(job)})
            response = step(self.session, prompt)
            job["state"] = "succeeded"
            job["percent"] = 100.0
            job["log_lines"] = response.log_lines
            job["artifact_ids"].extend(a.id for a in response.artifacts)
            self._append({"type": "message", "text": response.message})
        except Exception as exc:
            log.exception("turn failed for session %s", self.session.id)
            job["state"] = "failed"
            self._append({"type": "message", "text": f"turn failed: {exc}"})
        finally:
            self._append({"type": "job", "job": dict(job)})
            with self.lock:
                self.busy = False
                self._active_job = None


def create_app(config: ServiceConfig, backend_factory=None) -> FastAPI:
    """Build the FastAPI app around one project directory.

    ``backend_factory(kind, cfg)`` may be injected for tests; it defaults
    to :func:`radioplan.agent.model_backend`.
    """
    app = FastAPI(title="radioplan service", version=__version__)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"detail": exc.errors()})

    make_backend = backend_factory or model_backend
    clock = (LogicalClock() if config.backend_kind == "scripted-mock"
             else WallClock())
    store = ProjectStore(Path(config.project_root), clock=clock)
    runtimes: dict[str, SessionRuntime] = {}
    runtimes_lock = threading.Lock()
    pool = ThreadPoolExecutor(max_workers=config.max_workers)

    def get_runtime(session_id: str, must_exist: bool = True) -> SessionRuntime:
        with runtimes_lock:
            runtime = runtimes.get(session_id)
            if runtime is not None:
                return runtime
            if session_id not in store.list_sessions():
                raise HTTPException(status_code=404,
                                    detail=f"unknown session {session_id!r}")
            # Restore a persisted session (service restart path).
            backend = make_backend(config.backend_kind, config.backend_config)
            session = create_session(session_id, store, backend)
            runtime = SessionRuntime(session)
            runtimes[session_id] = runtime
            return runtime

    @app.get("/api/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/api/sessions", status_code=201)
    def create_session_endpoint(body: CreateSessionBody):
        session_id = body.session_id or f"s-{uuid.uuid4().hex[:12]}"
        with runtimes_lock:
            if session_id in runtimes or session_id in store.list_sessions():
                raise HTTPException(status_code=400,
                                    detail=f"session {session_id!r} already exists")
            kind = body.backend_kind or config.backend_kind
            backend_cfg = {**config.backend_config, **body.backend_config}
            try:
                backend = make_backend(kind, backend_cfg)
            except Exception as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            agent_cfg = AgentConfig(default_area=body.default_area,
                                    resolution_m=body.resolution_m,
                                    planning_overrides=body.planning_overrides)
            profile = None
            if body.profile_character:
                from .agent import default_profile

                profile = default_profile(str(store.root))
                profile.character_text = body.profile_character
            session = create_session(session_id, store, backend,
                                     profile=profile, config=agent_cfg)
            runtimes[session_id] = SessionRuntime(session)
        return {"session_id": session_id}

    @app.get("/api/sessions")
    def list_sessions():
        with runtimes_lock:
            live = set(runtimes)
        stored = set(store.list_sessions())
        out = []
        for sid in sorted(live | stored):
            runtime = runtimes.get(sid)
            out.append({"session_id": sid,
                        "busy": bool(runtime and runtime.busy),
                        "degraded": bool(runtime and runtime.session.degraded)})
        return {"sessions": out}

    @app.post("/api/sessions/{session_id}/prompts", status_code=202)
    def submit_prompt(session_id: str, body: PromptBody):
        runtime = get_runtime(session_id)
        job_id = f"j-{len(runtime.jobs) + 1:04d}"
        if not runtime.try_begin_turn(job_id):
            raise HTTPException(status_code=409,
                                detail="a turn is already in flight for this session")
        pool.submit(runtime.run_turn, job_id, body.text)
        return {"job_ids": [job_id]}

    @app.get("/api/sessions/{session_id}/events")
    def get_events(session_id: str, since: int = 0, wait_s: float = 0.0):
        runtime = get_runtime(session_id)
        events = runtime.events_since(since, wait_s=min(wait_s, 25.0))
        cursor = events[-1]["seq"] if events else since
        return {"events": events, "cursor": cursor, "busy": runtime.busy}

    @app.get("/api/sessions/{session_id}/artifacts")
    def list_artifacts(session_id: str):
        get_runtime(session_id)
        return {"artifacts": [ref.to_dict()
                              for ref in store.list_artifacts(session_id)]}

    @app.get("/api/sessions/{session_id}/artifacts/{artifact_id}")
    def get_artifact(session_id: str, artifact_id: str):
        get_runtime(session_id)
        ref = store.find_artifact(session_id, artifact_id)
        if ref is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown artifact {artifact_id!r}")
        path = store.resolve(ref)
        if not path.exists():
            raise HTTPException(status_code=410,
                                detail=f"artifact {artifact_id!r} is gone from disk")
        media = CONTENT_TYPES.get(path.suffix, "application/octet-stream")
        return Response(content=path.read_bytes(), media_type=media)

    app.state.store = store
    app.state.runtimes = runtimes
    return app


def run_service(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
