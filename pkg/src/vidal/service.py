"""HTTP service behind the annotation workbench.

Wraps one loop state file. Reads serve a consistent in-memory snapshot;
mutations (annotation submissions, iterations) are serialized through a
lock and hit disk before the in-memory state or the response is updated,
so the persisted file is never older than what a client has seen.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from vidal import formats
from vidal.adapters import AdapterError, fetch_detections
from vidal.loop import (
    LoopError,
    LoopStopped,
    NotPending,
    PendingBatch,
    ingest_annotations,
    run_iteration,
)
from vidal.model import AnnotatedObject, BBox, GroundTruthFrame, ValidationError

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


class AnnotationObjectIn(BaseModel):
    bbox: list[float] = Field(min_length=4, max_length=4)
    class_index: int = Field(alias="class", ge=0)

    model_config = {"populate_by_name": True}


class AnnotationSubmission(BaseModel):
    objects: list[AnnotationObjectIn]


class SubmissionResponse(BaseModel):
    frame_index: int
    changed: bool
    pending_remaining: int
    iteration_complete: bool
    can_iterate: bool


class QueueItem(BaseModel):
    frame_index: int
    status: str
    frame_score: float | None
    weighted_score: float | None
    image_url: str


class QueueResponse(BaseModel):
    round_index: int
    items: list[QueueItem]
    pending_count: int
    can_iterate: bool
    stopped: bool


class IterateResponse(BaseModel):
    round_index: int
    queried: list[int]
    mu: float
    scores: list[dict]


class PredictionBox(BaseModel):
    bbox: list[float]
    probs: list[float]


class PredictionsResponse(BaseModel):
    frame_index: int
    detections: list[PredictionBox]


class ServiceContext:
    """Shared state of one running service instance."""

    def __init__(self, state_path, images_dir=None, adapter=None, report_path=None):
        self.state_path = Path(state_path)
        self.images_dir = Path(images_dir) if images_dir else None
        self.adapter = adapter
        self.report_path = Path(report_path) if report_path else None
        self.state = formats.load_state(self.state_path)
        self.lock = threading.Lock()
        self.predictions = {}
        self.score_rows = {}
        pred_sidecar = formats.predictions_path(self.state_path)
        if pred_sidecar.exists():
            self.predictions, _ = formats.load_detections(pred_sidecar)
        score_sidecar = formats.scores_path(self.state_path)
        if score_sidecar.exists():
            document = formats.read_document(score_sidecar, formats.SCORES_SCHEMA)
            self.score_rows = {row["index"]: row for row in document.get("frames", [])}

    def commit(self, state, predictions=None, report=None) -> None:
        """Persist first, then swap the snapshot."""
        formats.persist_state(state, self.state_path)
        if predictions is not None:
            formats.write_document(
                formats.predictions_path(self.state_path),
                formats.detections_document(predictions, state.iteration),
            )
            self.predictions = predictions
        if report is not None:
            formats.write_document(
                formats.scores_path(self.state_path),
                formats.scores_document(report, state.iteration),
            )
            self.score_rows = {row["index"]: row for row in report}
        self.state = state


def create_app(
    state_path,
    images_dir=None,
    adapter=None,
    report_path=None,
    frontend_dir=None,
) -> FastAPI:
    app = FastAPI(title="vidal annotation service")
    ctx = ServiceContext(state_path, images_dir, adapter, report_path)
    app.state.ctx = ctx

    def can_iterate(state) -> bool:
        return bool(state.labeled) and not state.pending and not state.stopped

    @app.get("/api/state")
    def get_state():
        state = ctx.state
        return {
            "iteration": state.iteration,
            "num_frames": state.meta.num_frames,
            "class_names": list(state.meta.class_names),
            "width": state.meta.width,
            "height": state.meta.height,
            "labeled_count": len(state.labeled),
            "unlabeled_count": len(state.unlabeled),
            "test_count": len(state.test),
            "stop_target": state.stop_target,
            "stopped": state.stopped,
            "pending_count": len(state.pending),
            "can_iterate": can_iterate(state),
            "strategy": formats.strategy_document(state.strategy),
        }

    @app.get("/api/queue", response_model=QueueResponse)
    def get_queue():
        state = ctx.state
        if not state.history:
            return QueueResponse(
                round_index=-1, items=[], pending_count=0,
                can_iterate=can_iterate(state), stopped=state.stopped,
            )
        record = state.history[-1]
        items = []
        for f in record.frames:
            weighted = record.scores.get(f) if record.scores else None
            row = ctx.score_rows.get(f)
            items.append(
                QueueItem(
                    frame_index=f,
                    status="done" if f in state.labeled else "pending",
                    frame_score=row["frame_score"] if row else None,
                    weighted_score=weighted,
                    image_url=f"/api/frames/{f}/image",
                )
            )
        items.sort(
            key=lambda item: (
                item.status != "pending",
                -(item.weighted_score if item.weighted_score is not None else 0.0),
                item.frame_index,
            )
        )
        return QueueResponse(
            round_index=record.round_index,
            items=items,
            pending_count=len(state.pending),
            can_iterate=can_iterate(state),
            stopped=state.stopped,
        )

    @app.get("/api/frames/{frame_index}/image")
    def get_image(frame_index: int):
        if ctx.images_dir is None:
            raise HTTPException(404, "no images directory configured")
        for name in (
            str(frame_index),
            f"{frame_index:06d}",
            f"frame_{frame_index:06d}",
            f"frame_{frame_index}",
        ):
            for suffix in _IMAGE_SUFFIXES:
                candidate = ctx.images_dir / f"{name}{suffix}"
                if candidate.exists():
                    return FileResponse(candidate)
        raise HTTPException(404, f"no image for frame {frame_index}")

    @app.get("/api/frames/{frame_index}/predictions", response_model=PredictionsResponse)
    def get_predictions(frame_index: int):
        frame = ctx.predictions.get(frame_index)
        detections = []
        if frame is not None:
            detections = [
                PredictionBox(
                    bbox=[d.bbox.cx, d.bbox.cy, d.bbox.bw, d.bbox.bh],
                    probs=list(d.probs.probs),
                )
                for d in frame.detections
            ]
        return PredictionsResponse(frame_index=frame_index, detections=detections)

    @app.post("/api/frames/{frame_index}/annotations", response_model=SubmissionResponse)
    def submit_annotations(frame_index: int, submission: AnnotationSubmission):
        with ctx.lock:
            state = ctx.state
            try:
                objects = tuple(
                    AnnotatedObject(
                        bbox=_bbox_from(o.bbox), class_index=o.class_index
                    )
                    for o in submission.objects
                )
                gt = GroundTruthFrame(frame_index, objects)
            except ValidationError as exc:
                raise HTTPException(422, str(exc)) from exc

            existing = state.annotations.get(frame_index)
            if existing is not None:
                if existing == gt:
                    return SubmissionResponse(
                        frame_index=frame_index,
                        changed=False,
                        pending_remaining=len(state.pending),
                        iteration_complete=not state.pending,
                        can_iterate=can_iterate(state),
                    )
                raise HTTPException(
                    409, f"frame {frame_index} already has a different annotation"
                )
            try:
                new_state = ingest_annotations(state, [gt])
            except NotPending as exc:
                raise HTTPException(409, str(exc)) from exc
            except (ValidationError, LoopError) as exc:
                raise HTTPException(422, str(exc)) from exc
            ctx.commit(new_state)
            return SubmissionResponse(
                frame_index=frame_index,
                changed=True,
                pending_remaining=len(new_state.pending),
                iteration_complete=not new_state.pending,
                can_iterate=can_iterate(new_state),
            )

    @app.post("/api/iterate", response_model=IterateResponse)
    def iterate():
        if ctx.adapter is None:
            raise HTTPException(400, "no detector adapter configured for this service")
        with ctx.lock:
            state = ctx.state
            try:
                detections = fetch_detections(
                    ctx.adapter, set(state.unlabeled), state, optional=set(state.test)
                )
                result = run_iteration(state, detections)
            except (PendingBatch, LoopStopped) as exc:
                raise HTTPException(409, str(exc)) from exc
            except (AdapterError, LoopError) as exc:
                raise HTTPException(502, str(exc)) from exc
            queried_predictions = {f: detections[f] for f in result.queried}
            ctx.commit(result.state, predictions=queried_predictions, report=result.report)
            return IterateResponse(
                round_index=result.state.history[-1].round_index,
                queried=list(result.queried),
                mu=result.mu,
                scores=result.report,
            )

    @app.get("/api/history")
    def get_history():
        state = ctx.state
        entries = []
        for record in state.history:
            scores = record.scores or {}
            entries.append(
                {
                    "round": record.round_index,
                    "frames": list(record.frames),
                    "scores": {str(f): s for f, s in sorted(scores.items())},
                    "done": all(f in state.labeled for f in record.frames),
                    "mean_weighted_score": (
                        sum(scores.values()) / len(scores) if scores else None
                    ),
                }
            )
        map_series = None
        if ctx.report_path and ctx.report_path.exists():
            report = formats.read_document(ctx.report_path, formats.REPORT_SCHEMA)
            map_series = report.get("map_series")
        return {"iteration": state.iteration, "rounds": entries, "map_series": map_series}

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="workbench")
    return app


def _bbox_from(values: list[float]) -> BBox:
    return BBox(*[float(v) for v in values])
