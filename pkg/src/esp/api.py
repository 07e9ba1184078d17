"""HTTP API over session directories, consumed by the web UI.

Every response is a deterministic function of session state and request.
Reads share the on-disk snapshots; mutations serialize per session through
a single-writer lock. Errors use ``{code, stage, message, refs}`` bodies.
"""

from __future__ import annotations

import json
import os
import tempfile
import threading
import zipfile

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .errors import EspError, UnknownSolutionError
from .ingest import scan_sources, with_secondary_assets
from .model import (
    OverheadVector,
    app_from_doc,
    kb_from_doc,
    snapshot,
    validate_app,
    validate_kb,
)
from .session import (
    ATTACKS_FILE,
    REPORT_FILE,
    SOLUTIONS_FILE,
    MitigateOptions,
    SessionDir,
)


class SessionStore:
    def __init__(self, root: str):
        self.root = str(root)
        os.makedirs(self.root, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._registry = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry:
            return self._locks.setdefault(session_id, threading.Lock())

    def ids(self) -> list[str]:
        out = []
        for name in sorted(os.listdir(self.root)):
            if SessionDir(os.path.join(self.root, name)).exists():
                out.append(name)
        return out

    def dir(self, session_id: str) -> SessionDir:
        sd = SessionDir(os.path.join(self.root, session_id))
        if not sd.exists():
            raise EspError(f"unknown session {session_id!r}")
        return sd


def _error_response(exc: EspError, status: int = 400, stage: str | None = None) -> JSONResponse:
    return JSONResponse(status_code=status, content=exc.to_dict(stage))


def create_app(root: str, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="esp", docs_url=None, redoc_url=None)
    store = SessionStore(root)

    @app.exception_handler(EspError)
    async def esp_error_handler(_request: Request, exc: EspError):
        status = 404 if isinstance(exc, UnknownSolutionError) or "unknown session" in exc.message else 400
        return _error_response(exc, status=status)

    @app.get("/api/sessions")
    def list_sessions():
        out = []
        for sid in store.ids():
            manifest = store.dir(sid).manifest()
            out.append(
                {
                    "id": sid,
                    "session": manifest.get("session"),
                    "stages": {
                        name: stage.get("status") for name, stage in manifest.get("stages", {}).items()
                    },
                }
            )
        return out

    @app.post("/api/sessions")
    async def create_session(request: Request):
        content_type = request.headers.get("content-type", "")
        kb_doc = None
        app_doc = None
        src_dir = None
        if content_type.startswith("multipart/"):
            form = await request.form()
            if "kb" in form:
                kb_doc = json.loads((await form["kb"].read()).decode("utf-8"))
            if "model" in form:
                app_doc = json.loads((await form["model"].read()).decode("utf-8"))
            if "src" in form:
                src_dir = tempfile.mkdtemp(prefix="esp-src-")
                archive = os.path.join(src_dir, "src.zip")
                with open(archive, "wb") as fh:
                    fh.write(await form["src"].read())
                with zipfile.ZipFile(archive) as zf:
                    zf.extractall(src_dir)
                os.remove(archive)
        else:
            body = await request.json()
            kb_doc = body.get("kb")
            app_doc = body.get("model")
        if kb_doc is None:
            raise EspError("session creation needs a kb")

        kb = kb_from_doc(kb_doc)
        kb_errors = [d for d in validate_kb(kb) if d.severity == "error"]
        if kb_errors:
            raise EspError("; ".join(f"{d.entity}: {d.message}" for d in kb_errors))
        if app_doc is not None:
            application = app_from_doc(app_doc)
        elif src_dir is not None:
            application = scan_sources(src_dir)
        else:
            raise EspError("session creation needs a model or a src archive")
        application = with_secondary_assets(
            application,
            depth=kb.thresholds.secondary_asset_depth,
            factor=kb.thresholds.secondary_asset_factor,
        )
        app_errors = [d for d in validate_app(application) if d.severity == "error"]
        if app_errors:
            raise EspError("; ".join(f"{d.entity}: {d.message}" for d in app_errors))

        session = snapshot(kb, application)
        sid = session.hash[:12]
        with store.lock(sid):
            SessionDir(os.path.join(store.root, sid)).init_from(kb, application)
        return {"id": sid, "session": session.hash}

    @app.get("/api/sessions/{sid}/framing")
    def get_framing(sid: str):
        return store.dir(sid).framing_doc()

    @app.put("/api/sessions/{sid}/framing")
    def put_framing(sid: str, payload: dict):
        sd = store.dir(sid)
        with store.lock(sid):
            diagnostics, session = sd.update_framing(payload)
        if session is None:
            return JSONResponse(
                status_code=422,
                content={
                    "code": "validation",
                    "stage": "framing",
                    "message": "framing edit rejected",
                    "refs": [f"{d.entity}: {d.message}" for d in diagnostics],
                    "diagnostics": [d.to_dict() for d in diagnostics],
                },
            )
        return sd.framing_doc()

    @app.post("/api/sessions/{sid}/assess")
    def post_assess(sid: str, payload: dict | None = None):
        payload = payload or {}
        sd = store.dir(sid)
        with store.lock(sid):
            return sd.assess(payload.get("max_depth"), payload.get("max_paths"))

    @app.get("/api/sessions/{sid}/attacks")
    def get_attacks(sid: str):
        sd = store.dir(sid)
        if not os.path.isfile(os.path.join(sd.path, ATTACKS_FILE)):
            raise EspError("session not assessed yet")
        return {"attacks": sd.read_json(ATTACKS_FILE), "report": sd.read_json(REPORT_FILE)}

    @app.post("/api/sessions/{sid}/mitigate")
    def post_mitigate(sid: str, payload: dict | None = None):
        payload = payload or {}
        sd = store.dir(sid)
        budgets = payload.get("budgets")
        if budgets is not None:
            base = sd.load().kb.thresholds.budgets
            values = base.as_dict() if base is not None else {n: 0.0 for n in OverheadVector().as_dict()}
            values.update({k: float(v) for k, v in budgets.items()})
            budgets = OverheadVector.from_dict(values)
        options = MitigateOptions(
            budgets=budgets,
            lmax=payload.get("lmax"),
            effort=payload.get("effort"),
            beam=payload.get("beam"),
            top=payload.get("top", 10),
        )
        with store.lock(sid):
            return sd.run_mitigation(options)

    @app.get("/api/sessions/{sid}/solutions")
    def get_solutions(sid: str):
        sd = store.dir(sid)
        if not os.path.isfile(os.path.join(sd.path, SOLUTIONS_FILE)):
            raise EspError("session not mitigated yet")
        return sd.read_json(SOLUTIONS_FILE)

    @app.post("/api/sessions/{sid}/whatif")
    def post_whatif(sid: str, payload: dict):
        return store.dir(sid).evaluate_what_if(payload)

    @app.post("/api/sessions/{sid}/hide")
    def post_hide(sid: str, payload: dict | None = None):
        payload = payload or {}
        sd = store.dir(sid)
        with store.lock(sid):
            return sd.run_hiding(
                payload.get("solution", "top"),
                gamma=payload.get("gamma"),
                solution_doc=payload.get("solution_doc"),
            )

    @app.get("/api/sessions/{sid}/plan/{solution_id}")
    def get_plan(sid: str, solution_id: str):
        sd = store.dir(sid)
        with store.lock(sid):
            return sd.export_plan(solution_id)

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
