"""Annotation study service: session flow, submission validation, reporting.

The core logic lives in AnnotationService, which is plain Python and fully
testable without HTTP; create_app wraps it in a FastAPI application that maps
domain errors onto stable JSON error bodies.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .geometry import Contour
from .mask import CCAnnotation, SegMask, SingularAnnotation, composite, is_subset
from .report import ImageAnnotations, dataset_report
from .store import (
    METHODS,
    SURVEY_DIMENSIONS,
    AnnotationRecord,
    SessionRecord,
    Store,
    SurveyRecord,
    TaskSpec,
)


class ServiceError(Exception):
    """Domain error with a stable wire code."""

    status = 500
    code = "internal"


class NotFoundError(ServiceError):
    status = 404
    code = "not-found"


class ConflictError(ServiceError):
    status = 409
    code = "conflict"


class UnprocessableError(ServiceError):
    status = 422
    code = "unprocessable"


@dataclass(frozen=True)
class ImageEntry:
    image_id: str
    path: Path
    width: int
    height: int


class DatasetIndex:
    """Images of one dataset, in manifest order, addressable by id."""

    def __init__(self, dataset_id: str, entries: Sequence[ImageEntry]):
        if not entries:
            raise ValueError("dataset has no images")
        self.dataset_id = dataset_id
        self.entries = list(entries)
        self._by_id = {e.image_id: e for e in self.entries}
        if len(self._by_id) != len(self.entries):
            raise ValueError("duplicate image ids in dataset")

    @classmethod
    def from_manifest(cls, manifest_path) -> "DatasetIndex":
        from .foggyblob import load_manifest

        path = Path(manifest_path)
        manifest = load_manifest(path)
        size = int(manifest["config"]["image_size"])
        root = path.parent
        entries = [
            ImageEntry(
                image_id=s["id"],
                path=root / s["image"],
                width=size,
                height=size,
            )
            for s in manifest["samples"]
        ]
        return cls(manifest["dataset_id"], entries)

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, image_id: str) -> Optional[ImageEntry]:
        return self._by_id.get(image_id)


def _parse_operation(op) -> tuple[str, list]:
    if isinstance(op, dict):
        mode = op.get("op")
        points = op.get("contour")
        if mode not in ("add", "subtract"):
            raise UnprocessableError(f"unknown contour operation {mode!r}")
    else:
        mode, points = "add", op
    if not isinstance(points, list) or len(points) < 3:
        raise UnprocessableError("contour needs at least three [x, y] points")
    for p in points:
        if (
            not isinstance(p, (list, tuple))
            or len(p) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)
        ):
            raise UnprocessableError("contour points must be [x, y] numbers")
    return mode, points


def _replay_layer(ops, width: int, height: int) -> SegMask:
    """Rebuild a mask by applying contour add/subtract operations in order."""
    if not isinstance(ops, list):
        raise UnprocessableError("mask layer must be a list of contour operations")
    mask = SegMask.empty(width, height)
    for op in ops:
        mode, points = _parse_operation(op)
        try:
            contour = Contour(points)
        except ValueError as exc:
            raise UnprocessableError(str(exc)) from exc
        mask = composite(mask, contour, mode)
    return mask


def _require_count(payload: dict, key: str) -> int:
    value = payload.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise UnprocessableError(f"{key} must be a non-negative integer")
    return value


class AnnotationService:
    """Runs counterbalanced annotation sessions over registered datasets."""

    def __init__(
        self,
        store: Store,
        datasets: Sequence[DatasetIndex],
        images_per_method: int = 40,
        clock=time.time,
    ):
        if not datasets:
            raise ValueError("need at least one dataset")
        self.store = store
        self.datasets = {d.dataset_id: d for d in datasets}
        if len(self.datasets) != len(datasets):
            raise ValueError("duplicate dataset ids")
        self.default_images_per_method = images_per_method
        self.clock = clock
        self._lock = threading.RLock()
        # How often each (dataset, method, image) has been handed out, so new
        # sessions spread coverage instead of dogpiling the first images.
        self._assign_counts: dict[tuple[str, str, str], int] = {}
        self._session_count = 0
        for session in store.records("session"):
            self._session_count += 1
            for task in session.tasks:
                key = (session.dataset_id, task.method, task.image_id)
                self._assign_counts[key] = self._assign_counts.get(key, 0) + 1

    # -- session flow -----------------------------------------------------

    def create_session(
        self,
        annotator_id: str,
        dataset_id: str,
        images_per_method: Optional[int] = None,
    ) -> SessionRecord:
        """Open a session with counterbalanced method order and fresh images.

        Method order alternates with session parity (even-numbered sessions
        run singular first). Within each method the least-assigned images
        come first, ties in manifest order, so coverage stays even across
        annotators.
        """
        if not annotator_id or not isinstance(annotator_id, str):
            raise ValueError("annotator_id must be a non-empty string")
        dataset = self.datasets.get(dataset_id)
        if dataset is None:
            raise NotFoundError(f"unknown dataset {dataset_id!r}")
        n = self.default_images_per_method if images_per_method is None else images_per_method
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ValueError("images_per_method must be a positive integer")
        if n > len(dataset):
            raise ValueError(
                f"images_per_method {n} exceeds dataset size {len(dataset)}"
            )
        with self._lock:
            order = (
                ("singular", "cc") if self._session_count % 2 == 0 else ("cc", "singular")
            )
            session_id = f"s{self._session_count:04d}"
            tasks = []
            position = 0
            for method in order:
                for entry in self._pick_images(dataset, method, n):
                    tasks.append(
                        TaskSpec(
                            task_id=f"{session_id}:{position}",
                            image_id=entry.image_id,
                            method=method,
                            position=position,
                        )
                    )
                    position += 1
            record = SessionRecord(
                session_id=session_id,
                annotator_id=annotator_id,
                dataset_id=dataset_id,
                method_order=order,
                tasks=tuple(tasks),
                created_at=self.clock(),
            )
            self.store.append(record)
            self._session_count += 1
            for task in tasks:
                key = (dataset_id, task.method, task.image_id)
                self._assign_counts[key] = self._assign_counts.get(key, 0) + 1
            return record

    def _pick_images(self, dataset: DatasetIndex, method: str, n: int):
        ranked = sorted(
            range(len(dataset.entries)),
            key=lambda i: (
                self._assign_counts.get(
                    (dataset.dataset_id, method, dataset.entries[i].image_id), 0
                ),
                i,
            ),
        )
        return [dataset.entries[i] for i in ranked[:n]]

    def _session_or_404(self, session_id: str) -> SessionRecord:
        session = self.store.session(session_id)
        if session is None:
            raise NotFoundError(f"unknown session {session_id!r}")
        return session

    def next_task(self, session_id: str) -> Optional[dict]:
        """First unsubmitted task of the session, or None when all are done."""
        session = self._session_or_404(session_id)
        for task in session.tasks:
            if not self.store.has_annotation(task.task_id):
                entry = self.datasets[session.dataset_id].get(task.image_id)
                return {
                    "task_id": task.task_id,
                    "image_id": task.image_id,
                    "method": task.method,
                    "position": task.position,
                    "total": len(session.tasks),
                    "width": entry.width,
                    "height": entry.height,
                    "image_url": f"/api/images/{task.image_id}",
                }
        return None

    # -- submissions -------------------------------------------------------

    def submit_annotation(self, payload: dict) -> int:
        """Validate, rasterize, and persist one annotation submission.

        The server rebuilds masks from the submitted contour operations and
        enforces the min-within-max invariant itself; nothing reaches the
        store when validation fails.
        """
        if not isinstance(payload, dict):
            raise UnprocessableError("payload must be a JSON object")
        session = self._session_or_404(str(payload.get("session_id")))
        task_id = str(payload.get("task_id"))
        task = next((t for t in session.tasks if t.task_id == task_id), None)
        if task is None:
            raise NotFoundError(f"unknown task {task_id!r}")
        method = payload.get("method")
        if method != task.method:
            raise UnprocessableError(
                f"task {task_id!r} expects a {task.method} annotation"
            )
        entry = self.datasets[session.dataset_id].get(task.image_id)
        duration = _require_count(payload, "client_duration_ms")
        edit_ops = _require_count(payload, "edit_ops")

        with self._lock:
            if self.store.has_annotation(task_id):
                raise ConflictError(f"task {task_id!r} already has an annotation")
            stem_base = f"{session.session_id}_{task.position:03d}"
            written: list[Path] = []
            try:
                if method == "singular":
                    mask = _replay_layer(
                        payload.get("contours"), entry.width, entry.height
                    )
                    rel = self.store.write_mask(f"{stem_base}_mask", mask)
                    written.append(self.store.root / rel)
                    mask_paths = {"mask": rel}
                else:
                    min_mask = _replay_layer(
                        payload.get("min"), entry.width, entry.height
                    )
                    max_mask = _replay_layer(
                        payload.get("max"), entry.width, entry.height
                    )
                    if not is_subset(min_mask, max_mask):
                        raise UnprocessableError(
                            "min mask must stay within max mask"
                        )
                    rel_min = self.store.write_mask(f"{stem_base}_min", min_mask)
                    written.append(self.store.root / rel_min)
                    rel_max = self.store.write_mask(f"{stem_base}_max", max_mask)
                    written.append(self.store.root / rel_max)
                    mask_paths = {"min": rel_min, "max": rel_max}
                record = AnnotationRecord(
                    session_id=session.session_id,
                    task_id=task_id,
                    image_id=task.image_id,
                    method=method,
                    mask_paths=mask_paths,
                    client_duration_ms=duration,
                    edit_ops=edit_ops,
                    received_at=self.clock(),
                )
                return self.store.append(record)
            except Exception:
                for path in written:
                    path.unlink(missing_ok=True)
                raise

    def submit_survey(self, session_id: str, method, scores) -> int:
        """Persist a post-method workload survey, gated on method completion."""
        session = self._session_or_404(session_id)
        if method not in METHODS:
            raise UnprocessableError(f"unknown method {method!r}")
        if not isinstance(scores, dict):
            raise UnprocessableError("scores must be an object")
        if set(scores) != set(SURVEY_DIMENSIONS):
            raise UnprocessableError(
                "scores must cover exactly: " + ", ".join(SURVEY_DIMENSIONS)
            )
        for dim, value in scores.items():
            if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 10:
                raise UnprocessableError(f"score {dim!r} must be an integer in 1..10")
        with self._lock:
            pending = [
                t.task_id
                for t in session.tasks
                if t.method == method and not self.store.has_annotation(t.task_id)
            ]
            if pending:
                raise ConflictError(
                    f"{len(pending)} {method} task(s) still unsubmitted"
                )
            if self.store.has_survey(session_id, method):
                raise ConflictError(f"survey for {method} already recorded")
            record = SurveyRecord(
                session_id=session_id,
                method=method,
                scores=dict(scores),
                received_at=self.clock(),
            )
            return self.store.append(record)

    # -- retrieval ---------------------------------------------------------

    def image_bytes(self, image_id: str) -> bytes:
        for dataset in self.datasets.values():
            entry = dataset.get(image_id)
            if entry is not None:
                return entry.path.read_bytes()
        raise NotFoundError(f"unknown image {image_id!r}")

    def metrics_report(self, dataset_id: str) -> dict:
        """Aggregate every stored annotation of a dataset into the report."""
        if dataset_id not in self.datasets:
            raise NotFoundError(f"unknown dataset {dataset_id!r}")
        session_ids = {
            s.session_id
            for s in self.store.records("session")
            if s.dataset_id == dataset_id
        }
        grouped: dict[str, ImageAnnotations] = {}
        for rec in self.store.records("annotation"):
            if rec.session_id not in session_ids:
                continue
            item = grouped.setdefault(
                rec.image_id, ImageAnnotations(rec.image_id, [], [])
            )
            if rec.method == "singular":
                item.singular.append(
                    SingularAnnotation(self.store.load_mask(rec.mask_paths["mask"]))
                )
            else:
                item.ccs.append(
                    CCAnnotation(
                        min=self.store.load_mask(rec.mask_paths["min"]),
                        max=self.store.load_mask(rec.mask_paths["max"]),
                    )
                )
        return dataset_report(list(grouped.values()))

    def export_stream(self):
        return self.store.export_stream()


def create_app(service: AnnotationService):
    """FastAPI application exposing the service over HTTP."""
    from fastapi import Body, FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse, Response, StreamingResponse

    app = FastAPI(title="ccseg annotation service", docs_url=None, redoc_url=None)

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.code, "detail": str(exc)}
        )

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400, content={"error": "invalid-argument", "detail": str(exc)}
        )

    @app.exception_handler(RequestValidationError)
    async def _body_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"error": "unprocessable", "detail": "malformed request body"},
        )

    @app.post("/api/sessions")
    def create_session(body: dict = Body(...)):
        record = service.create_session(
            annotator_id=body.get("annotator_id"),
            dataset_id=body.get("dataset_id"),
            images_per_method=body.get("images_per_method"),
        )
        return {
            "session_id": record.session_id,
            "dataset_id": record.dataset_id,
            "method_order": list(record.method_order),
            "task_count": len(record.tasks),
        }

    @app.get("/api/sessions/{session_id}/tasks/next")
    def next_task(session_id: str):
        task = service.next_task(session_id)
        if task is None:
            return {"done": True, "task": None}
        return {"done": False, "task": task}

    @app.get("/api/images/{image_id}")
    def get_image(image_id: str):
        return Response(content=service.image_bytes(image_id), media_type="image/png")

    @app.post("/api/annotations")
    def submit_annotation(body: dict = Body(...)):
        return {"record_id": service.submit_annotation(body)}

    @app.post("/api/surveys")
    def submit_survey(body: dict = Body(...)):
        record_id = service.submit_survey(
            str(body.get("session_id")), body.get("method"), body.get("scores")
        )
        return {"record_id": record_id}

    @app.get("/api/reports/{dataset_id}")
    def get_report(dataset_id: str):
        return service.metrics_report(dataset_id)

    @app.get("/api/export")
    def export():
        return StreamingResponse(
            service.export_stream(), media_type="application/x-ndjson"
        )

    return app
