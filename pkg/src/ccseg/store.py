"""Append-only study storage: checksummed JSONL records plus mask files.

Every record is one JSON line carrying a CRC of its own canonical form.
Records are never rewritten; a torn final line from a crash is dropped on
reopen, while damage anywhere else refuses to load rather than guess.
"""

from __future__ import annotations

import json
import os
import threading
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

from .mask import SegMask, is_subset, load_mask_png, save_mask_png

SCHEMA_VERSION = 1

SURVEY_DIMENSIONS = (
    "mental_demand",
    "physical_demand",
    "temporal_demand",
    "performance",
    "effort",
    "frustration",
)

METHODS = ("singular", "cc")


class StoreCorruptedError(RuntimeError):
    """The records file is damaged somewhere other than a torn tail."""


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    image_id: str
    method: str
    position: int

    def to_doc(self) -> dict:
        return {
            "task_id": self.task_id,
            "image_id": self.image_id,
            "method": self.method,
            "position": self.position,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "TaskSpec":
        return cls(doc["task_id"], doc["image_id"], doc["method"], doc["position"])


@dataclass(frozen=True)
class SessionRecord:
    session_id: str
    annotator_id: str
    dataset_id: str
    method_order: tuple[str, str]
    tasks: tuple[TaskSpec, ...]
    created_at: float
    record_id: Optional[int] = None

    kind = "session"

    def to_doc(self) -> dict:
        return {
            "session_id": self.session_id,
            "annotator_id": self.annotator_id,
            "dataset_id": self.dataset_id,
            "method_order": list(self.method_order),
            "tasks": [t.to_doc() for t in self.tasks],
            "created_at": self.created_at,
        }

    @classmethod
    def from_doc(cls, doc: dict, record_id: int) -> "SessionRecord":
        return cls(
            session_id=doc["session_id"],
            annotator_id=doc["annotator_id"],
            dataset_id=doc["dataset_id"],
            method_order=tuple(doc["method_order"]),
            tasks=tuple(TaskSpec.from_doc(t) for t in doc["tasks"]),
            created_at=doc["created_at"],
            record_id=record_id,
        )


@dataclass(frozen=True)
class AnnotationRecord:
    session_id: str
    task_id: str
    image_id: str
    method: str
    mask_paths: dict
    client_duration_ms: int
    edit_ops: int
    received_at: float
    record_id: Optional[int] = None

    kind = "annotation"

    def to_doc(self) -> dict:
        return {
            "session_id": self.session_id,
            "task_id": self.task_id,
            "image_id": self.image_id,
            "method": self.method,
            "mask_paths": dict(self.mask_paths),
            "client_duration_ms": self.client_duration_ms,
            "edit_ops": self.edit_ops,
            "received_at": self.received_at,
        }

    @classmethod
    def from_doc(cls, doc: dict, record_id: int) -> "AnnotationRecord":
        return cls(
            session_id=doc["session_id"],
            task_id=doc["task_id"],
            image_id=doc["image_id"],
            method=doc["method"],
            mask_paths=dict(doc["mask_paths"]),
            client_duration_ms=doc["client_duration_ms"],
            edit_ops=doc["edit_ops"],
            received_at=doc["received_at"],
            record_id=record_id,
        )


@dataclass(frozen=True)
class SurveyRecord:
    session_id: str
    method: str
    scores: dict
    received_at: float
    record_id: Optional[int] = None

    kind = "survey"

    def to_doc(self) -> dict:
        return {
            "session_id": self.session_id,
            "method": self.method,
            "scores": dict(self.scores),
            "received_at": self.received_at,
        }

    @classmethod
    def from_doc(cls, doc: dict, record_id: int) -> "SurveyRecord":
        return cls(
            session_id=doc["session_id"],
            method=doc["method"],
            scores=dict(doc["scores"]),
            received_at=doc["received_at"],
            record_id=record_id,
        )


_KINDS = {
    "session": SessionRecord,
    "annotation": AnnotationRecord,
    "survey": SurveyRecord,
}


def _canonical(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _line_for(doc: dict) -> bytes:
    crc = format(zlib.crc32(_canonical(doc)), "08x")
    return _canonical({**doc, "crc": crc}) + b"\n"


def _parse_line(raw: bytes) -> Optional[dict]:
    """Decode and verify one record line; None when the line is damaged."""
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return None
    if not isinstance(doc, dict) or "crc" not in doc:
        return None
    crc = doc.pop("crc")
    if format(zlib.crc32(_canonical(doc)), "08x") != crc:
        return None
    return doc


class Store:
    """Durable, append-only collection of study records and mask files."""

    def __init__(self, root, create: bool = True):
        self.root = Path(root)
        self.records_path = self.root / "records.jsonl"
        self.masks_dir = self.root / "masks"
        if create:
            self.masks_dir.mkdir(parents=True, exist_ok=True)
        elif not self.records_path.exists():
            raise FileNotFoundError(f"no store at {self.root}")
        self._lock = threading.Lock()
        self._records: list = []
        self._sessions: dict[str, SessionRecord] = {}
        self._annotated_tasks: set[str] = set()
        self._surveyed: set[tuple[str, str]] = set()
        self._next_id = 0
        self._load()
        self._fh = open(self.records_path, "ab")

    def _load(self) -> None:
        if not self.records_path.exists():
            self.records_path.touch()
            return
        data = self.records_path.read_bytes()
        keep = len(data)
        # A crash can tear only the tail: first a partial line with no
        # newline, otherwise a complete final line whose checksum fails.
        if data and not data.endswith(b"\n"):
            keep = data.rfind(b"\n") + 1
        lines = data[:keep].split(b"\n")[:-1]
        docs = []
        for i, raw in enumerate(lines):
            doc = _parse_line(raw)
            if doc is None:
                if i == len(lines) - 1:
                    keep = sum(len(l) + 1 for l in lines[:-1])
                    break
                raise StoreCorruptedError(
                    f"record line {i + 1} of {self.records_path} is damaged"
                )
            docs.append(doc)
        if keep < len(data):
            with open(self.records_path, "r+b") as fh:
                fh.truncate(keep)
        for doc in docs:
            self._index(doc)

    def _index(self, doc: dict) -> None:
        kind = doc.get("kind")
        record_id = doc.get("record_id")
        if kind not in _KINDS or not isinstance(record_id, int):
            raise StoreCorruptedError("record with unknown kind or missing id")
        if record_id != self._next_id:
            raise StoreCorruptedError(
                f"record ids must increase without gaps (saw {record_id}, "
                f"expected {self._next_id})"
            )
        record = _KINDS[kind].from_doc(doc, record_id)
        self._records.append(record)
        self._next_id = record_id + 1
        if kind == "session":
            self._sessions[record.session_id] = record
        elif kind == "annotation":
            self._annotated_tasks.add(record.task_id)
        elif kind == "survey":
            self._surveyed.add((record.session_id, record.method))

    def _validate(self, record) -> None:
        if isinstance(record, SessionRecord):
            if record.session_id in self._sessions:
                raise ValueError(f"duplicate session id {record.session_id!r}")
            if sorted(record.method_order) != sorted(METHODS):
                raise ValueError("method_order must list both methods exactly once")
            seen = set()
            for pos, task in enumerate(record.tasks):
                if task.method not in METHODS:
                    raise ValueError(f"unknown task method {task.method!r}")
                if task.task_id in seen:
                    raise ValueError(f"duplicate task id {task.task_id!r}")
                seen.add(task.task_id)
                if task.position != pos:
                    raise ValueError("task positions must be contiguous from zero")
        elif isinstance(record, AnnotationRecord):
            session = self._sessions.get(record.session_id)
            if session is None:
                raise ValueError(f"unknown session {record.session_id!r}")
            task = next(
                (t for t in session.tasks if t.task_id == record.task_id), None
            )
            if task is None:
                raise ValueError(f"task {record.task_id!r} not in session")
            if record.task_id in self._annotated_tasks:
                raise ValueError(f"task {record.task_id!r} already annotated")
            if record.method != task.method or record.image_id != task.image_id:
                raise ValueError("annotation does not match its task")
            if record.client_duration_ms < 0 or record.edit_ops < 0:
                raise ValueError("durations and edit counts cannot be negative")
            self._validate_masks(record)
        elif isinstance(record, SurveyRecord):
            session = self._sessions.get(record.session_id)
            if session is None:
                raise ValueError(f"unknown session {record.session_id!r}")
            if record.method not in METHODS:
                raise ValueError(f"unknown method {record.method!r}")
            if (record.session_id, record.method) in self._surveyed:
                raise ValueError("survey already recorded for this method")
            if set(record.scores) != set(SURVEY_DIMENSIONS):
                raise ValueError("survey must score exactly the six dimensions")
            for dim, value in record.scores.items():
                if not isinstance(value, int) or not 1 <= value <= 10:
                    raise ValueError(f"score {dim} must be an integer in 1..10")
        else:
            raise TypeError(f"unknown record type {type(record).__name__}")

    def _validate_masks(self, record: AnnotationRecord) -> None:
        paths = record.mask_paths
        if record.method == "singular":
            expected = {"mask"}
        elif record.method == "cc":
            expected = {"min", "max"}
        else:
            raise ValueError(f"unknown method {record.method!r}")
        if set(paths) != expected:
            raise ValueError(f"{record.method} annotation needs masks {expected}")
        loaded = {}
        for key, rel in paths.items():
            full = self.root / rel
            if not full.is_file():
                raise ValueError(f"mask file {rel!r} does not exist")
            loaded[key] = load_mask_png(full)
        if record.method == "cc" and not is_subset(loaded["min"], loaded["max"]):
            raise ValueError("cc annotation violates min within max")

    def append(self, record) -> int:
        """Validate, persist, and index one record; returns its record id."""
        with self._lock:
            self._validate(record)
            record_id = self._next_id
            doc = {"kind": record.kind, "record_id": record_id, **record.to_doc()}
            self._fh.write(_line_for(doc))
            self._fh.flush()
            os.fsync(self._fh.fileno())
            self._index(doc)
            return record_id

    def records(self, kind: Optional[str] = None) -> list:
        with self._lock:
            if kind is None:
                return list(self._records)
            return [r for r in self._records if r.kind == kind]

    def session(self, session_id: str) -> Optional[SessionRecord]:
        with self._lock:
            return self._sessions.get(session_id)

    def has_annotation(self, task_id: str) -> bool:
        with self._lock:
            return task_id in self._annotated_tasks

    def has_survey(self, session_id: str, method: str) -> bool:
        with self._lock:
            return (session_id, method) in self._surveyed

    def write_mask(self, stem: str, mask: SegMask) -> str:
        """Store a mask PNG under masks/; returns the store-relative path."""
        if not stem or "/" in stem or "\\" in stem or stem.startswith("."):
            raise ValueError(f"unusable mask file stem {stem!r}")
        rel = f"masks/{stem}.png"
        full = self.root / rel
        if full.exists():
            raise ValueError(f"mask file {rel!r} already exists")
        save_mask_png(mask, full)
        return rel

    def load_mask(self, rel_path: str) -> SegMask:
        return load_mask_png(self.root / rel_path)

    def export_stream(self) -> Iterator[bytes]:
        """Schema-version header line followed by the records verbatim."""
        yield json.dumps(
            {"schema_version": SCHEMA_VERSION}, sort_keys=True, separators=(",", ":")
        ).encode("utf-8") + b"\n"
        with self._lock:
            self._fh.flush()
        with open(self.records_path, "rb") as fh:
            while True:
                chunk = fh.read(1 << 16)
                if not chunk:
                    break
                yield chunk

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "Store":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
