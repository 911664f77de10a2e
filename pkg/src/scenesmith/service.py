"""HTTP facade: pipeline sessions for the studio UI and automation.

Sessions are in-memory with optional JSON snapshots under a data dir. A
pipeline run is an async job: instruct returns immediately and clients poll
the session state. Within a session, instruct/clarify are serialized (busy
gives 409); the scene endpoint always serves the last consistent scene, so a
run mutates a private copy and the pointer swaps only on success.
"""

from __future__ import annotations

import os
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .actions import ActionPlan, RunReport, serialize_plan
from .jsonutil import canonical_bytes
from .planner import ClarificationRequest, PipelineConfig, PipelineError, run_pipeline
from .registry import Registry, load_registry
from .scene import SceneGraph, export_scene_json, import_scene_json

CLARIFY_TIMEOUT_S = 300.0

DATA_DIR_ENV = "SCENESMITH_DATA_DIR"


class InstructBody(BaseModel):
    text: str


class ClarifyBody(BaseModel):
    answers: dict[str, Any]


@dataclass
class Session:
    id: str
    scene: SceneGraph
    state: str = "idle"  # idle | running | awaiting_clarification | done | error
    plan: ActionPlan | None = None
    report: RunReport | None = None
    error: str | None = None
    pending: ClarificationRequest | None = None
    answers: "queue.Queue[dict[str, Any]]" = field(default_factory=queue.Queue)
    lock: threading.Lock = field(default_factory=threading.Lock)
    thread: threading.Thread | None = None
    job_counter: int = 0

    @property
    def busy(self) -> bool:
        return self.state in ("running", "awaiting_clarification")

    def view(self) -> dict:
        return {
            "id": self.id,
            "state": self.state,
            "instance_count": len(self.scene.instances),
            "has_terrain": self.scene.terrain is not None,
            "pending_clarification": self.pending.to_dict() if self.pending else None,
            "error": self.error,
            "executed_count": self.report.executed_count if self.report else 0,
            "failed_count": self.report.failed_count if self.report else 0,
        }


class SessionStore:
    def __init__(self, config: PipelineConfig, registry: Registry, data_dir: Path | None):
        self.config = config
        self.registry = registry
        self.data_dir = data_dir
        self.sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._counter = 0
        if data_dir is not None:
            data_dir.mkdir(parents=True, exist_ok=True)
            self._restore()

    def create(self) -> Session:
        with self._lock:
            self._counter += 1
            sid = f"s{self._counter:04d}"
            session = Session(id=sid, scene=SceneGraph(seed=self.config.seed))
            self.sessions[sid] = session
            return session

    def get(self, sid: str) -> Session | None:
        return self.sessions.get(sid)

    def _snapshot(self, session: Session) -> None:
        if self.data_dir is None:
            return
        payload = {
            "id": session.id,
            "scene": session.scene.to_dict(),
            "plan": session.plan.to_dict() if session.plan else None,
            "report": session.report.to_dict() if session.report else None,
        }
        (self.data_dir / f"{session.id}.json").write_bytes(canonical_bytes(payload))

    def _restore(self) -> None:
        import json

        for file in sorted(self.data_dir.glob("s*.json")):
            try:
                payload = json.loads(file.read_text(encoding="utf-8"))
                session = Session(
                    id=payload["id"],
                    scene=SceneGraph.from_dict(payload["scene"]),
                    state="done",
                    plan=ActionPlan.from_dict(payload["plan"]) if payload.get("plan") else None,
                )
                self.sessions[session.id] = session
                num = int(session.id.lstrip("s"))
                self._counter = max(self._counter, num)
            except (ValueError, KeyError, OSError):
                continue  # unreadable snapshot, skip

    def run_instruction(self, session: Session, text: str) -> None:
        """Worker-thread body: run the pipeline on a private copy and swap
        the scene pointer only on success."""
        working = import_scene_json(export_scene_json(session.scene))

        def clarifier(request: ClarificationRequest) -> dict[str, Any]:
            session.pending = request
            session.state = "awaiting_clarification"
            try:
                answers = session.answers.get(timeout=CLARIFY_TIMEOUT_S)
            except queue.Empty:
                raise PipelineError("clarify", "no clarification answers arrived in time") from None
            finally:
                session.pending = None
                session.state = "running"
            return answers

        try:
            scene, plan, report = run_pipeline(
                text,
                self.config,
                scene=working,
                clarifier=clarifier,
                registry=self.registry,
            )
        except PipelineError as e:
            session.error = str(e)
            session.state = "error"
            return
        except Exception as e:  # defensive: a worker must never die silently
            session.error = f"{type(e).__name__}: {e}"
            session.state = "error"
            return
        session.scene = scene
        session.plan = plan
        session.report = report
        session.error = None
        session.state = "done"
        self._snapshot(session)


def create_app(
    config: PipelineConfig,
    data_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    if data_dir is None:
        data_dir = os.environ.get(DATA_DIR_ENV) or None
    registry = load_registry(Path(config.registry_path), config.embedding_dim)
    store = SessionStore(config, registry, Path(data_dir) if data_dir else None)
    app = FastAPI(title="scenesmith", version="0.1.0")
    app.state.store = store

    def _not_found() -> JSONResponse:
        return JSONResponse(status_code=404, content={"error": "unknown session"})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session():
        session = store.create()
        return {"id": session.id}

    @app.get("/sessions/{sid}")
    def session_view(sid: str):
        session = store.get(sid)
        if session is None:
            return _not_found()
        return session.view()

    @app.post("/sessions/{sid}/instruct", status_code=202)
    def instruct(sid: str, body: InstructBody):
        session = store.get(sid)
        if session is None:
            return _not_found()
        with session.lock:
            if session.busy:
                return JSONResponse(status_code=409, content={"error": "session busy"})
            session.state = "running"
            session.job_counter += 1
            job = f"{sid}-job{session.job_counter}"
            session.thread = threading.Thread(
                target=store.run_instruction, args=(session, body.text), daemon=True
            )
            session.thread.start()
        return {"job": job, "state": "running"}

    @app.post("/sessions/{sid}/clarify")
    def clarify(sid: str, body: ClarifyBody):
        session = store.get(sid)
        if session is None:
            return _not_found()
        pending = session.pending
        if session.state != "awaiting_clarification" or pending is None:
            return JSONResponse(status_code=409, content={"error": "session is not awaiting clarification"})
        missing = [k for k in pending.missing if k not in body.answers]
        if missing:
            return JSONResponse(
                status_code=422,
                content={"error": "missing answer keys", "missing": missing},
            )
        session.answers.put(dict(body.answers))
        return {"state": "running"}

    @app.get("/sessions/{sid}/scene")
    def scene(sid: str):
        session = store.get(sid)
        if session is None:
            return _not_found()
        return Response(content=export_scene_json(session.scene), media_type="application/json")

    @app.get("/sessions/{sid}/plan")
    def plan(sid: str):
        session = store.get(sid)
        if session is None:
            return _not_found()
        if session.plan is None:
            return JSONResponse(status_code=404, content={"error": "no plan yet"})
        return Response(content=serialize_plan(session.plan), media_type="application/json")

    @app.get("/sessions/{sid}/report")
    def report(sid: str):
        session = store.get(sid)
        if session is None:
            return _not_found()
        if session.report is None:
            return JSONResponse(status_code=404, content={"error": "no report yet"})
        return Response(content=canonical_bytes(session.report.to_dict()), media_type="application/json")

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
