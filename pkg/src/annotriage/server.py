"""HTTP review service consumed by the browser adjudication UI.

All state lives in a :class:`~annotriage.review.ReviewQueue`; every mutation
is persisted to the decision log before the response goes out. Static UI
assets, when present, are served at the root.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import HTMLResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .review import InvalidDecisionLabel, ReviewQueue, UnknownInstance

_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>Review API</title></head>
<body><h1>Review API is running</h1>
<p>No UI bundle is installed. The JSON API lives under <code>/api</code>:
<code>/api/queue</code>, <code>/api/decision</code>, <code>/api/progress</code>,
<code>/api/export</code>.</p></body></html>
"""


class DecisionRequest(BaseModel):
    instance_id: str
    label: str
    reviewer: str = "expert"


def create_app(queue: ReviewQueue, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="annotriage review API")

    @app.get("/api/queue")
    def get_queue(limit: int = Query(default=10, ge=1, le=1000)):
        return [item.to_dict() for item in queue.pending()[:limit]]

    @app.post("/api/decision")
    def post_decision(decision: DecisionRequest):
        try:
            result = queue.record_decision(
                decision.instance_id, decision.label, decision.reviewer
            )
        except UnknownInstance as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except InvalidDecisionLabel as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return result

    @app.get("/api/progress")
    def get_progress():
        return queue.progress()

    @app.get("/api/export")
    def get_export():
        return PlainTextResponse(
            queue.export_jsonl(), media_type="application/x-ndjson"
        )

    ui_path = Path(ui_dir) if ui_dir else None
    if ui_path and ui_path.is_dir():
        app.mount("/", StaticFiles(directory=ui_path, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return _PLACEHOLDER_PAGE

    return app


def serve(queue: ReviewQueue, host: str, port: int, ui_dir: str | Path | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(queue, ui_dir), host=host, port=port, log_level="info")
