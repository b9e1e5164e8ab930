import json

import numpy as np
import pytest

from ccseg.mask import SegMask
from ccseg.store import (
    AnnotationRecord,
    SessionRecord,
    Store,
    StoreCorruptedError,
    SurveyRecord,
    TaskSpec,
)


def make_session(session_id="s0000", n_tasks=2) -> SessionRecord:
    tasks = []
    for i in range(n_tasks):
        method = "singular" if i < n_tasks // 2 else "cc"
        tasks.append(
            TaskSpec(
                task_id=f"{session_id}:{i}",
                image_id=f"{i:04d}",
                method=method,
                position=i,
            )
        )
    return SessionRecord(
        session_id=session_id,
        annotator_id="alice",
        dataset_id="demo",
        method_order=("singular", "cc"),
        tasks=tuple(tasks),
        created_at=100.0,
    )


def masks_for(store: Store, stem: str, subset_ok=True):
    inner = SegMask(np.eye(6, dtype=bool))
    outer = SegMask(np.ones((6, 6), dtype=bool))
    if subset_ok:
        rel_min = store.write_mask(f"{stem}_min", inner)
        rel_max = store.write_mask(f"{stem}_max", outer)
    else:
        rel_min = store.write_mask(f"{stem}_min", outer)
        rel_max = store.write_mask(f"{stem}_max", inner)
    return rel_min, rel_max


def annotation_for(store, session, position=0) -> AnnotationRecord:
    task = session.tasks[position]
    if task.method == "singular":
        rel = store.write_mask(f"{session.session_id}_{position:03d}_mask", SegMask(np.eye(6, dtype=bool)))
        paths = {"mask": rel}
    else:
        rel_min, rel_max = masks_for(store, f"{session.session_id}_{position:03d}")
        paths = {"min": rel_min, "max": rel_max}
    return AnnotationRecord(
        session_id=session.session_id,
        task_id=task.task_id,
        image_id=task.image_id,
        method=task.method,
        mask_paths=paths,
        client_duration_ms=1500,
        edit_ops=4,
        received_at=101.0,
    )


SCORES = {
    "mental_demand": 3,
    "physical_demand": 2,
    "temporal_demand": 4,
    "performance": 8,
    "effort": 5,
    "frustration": 1,
}


class TestAppendAndReload:
    def test_round_trip(self, tmp_path):
        store = Store(tmp_path)
        session = make_session()
        assert store.append(session) == 0
        ann = annotation_for(store, session, 0)
        assert store.append(ann) == 1
        survey = SurveyRecord(
            session_id="s0000", method="singular", scores=SCORES, received_at=102.0
        )
        assert store.append(survey) == 2
        store.close()

        reopened = Store(tmp_path)
        records = reopened.records()
        assert [r.record_id for r in records] == [0, 1, 2]
        assert [r.kind for r in records] == ["session", "annotation", "survey"]
        assert reopened.session("s0000").annotator_id == "alice"
        assert reopened.records("annotation")[0].mask_paths == ann.mask_paths
        assert reopened.records("survey")[0].scores == SCORES
        reopened.close()

    def test_append_is_durable(self, tmp_path):
        store = Store(tmp_path)
        store.append(make_session())
        data = (tmp_path / "records.jsonl").read_bytes()
        assert data.endswith(b"\n")
        doc = json.loads(data.decode().splitlines()[0])
        assert doc["kind"] == "session" and "crc" in doc
        store.close()

    def test_kind_filter(self, tmp_path):
        store = Store(tmp_path)
        session = make_session()
        store.append(session)
        store.append(annotation_for(store, session, 0))
        assert len(store.records("session")) == 1
        assert len(store.records("annotation")) == 1
        assert store.records("survey") == []
        store.close()

    def test_missing_store_without_create(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            Store(tmp_path / "absent", create=False)


class TestCrashSafety:
    def test_partial_trailing_line_dropped(self, tmp_path):
        store = Store(tmp_path)
        session = make_session()
        store.append(session)
        store.append(annotation_for(store, session, 0))
        store.close()
        good = (tmp_path / "records.jsonl").read_bytes()

        with open(tmp_path / "records.jsonl", "ab") as fh:
            fh.write(b'{"kind": "survey", "record_id": 2, "trunc')

        reopened = Store(tmp_path)
        assert len(reopened.records()) == 2
        assert (tmp_path / "records.jsonl").read_bytes() == good
        # the next record reuses the dropped slot and the file stays valid
        survey = SurveyRecord(
            session_id="s0000", method="singular", scores=SCORES, received_at=103.0
        )
        assert reopened.append(survey) == 2
        reopened.close()
        again = Store(tmp_path)
        assert [r.record_id for r in again.records()] == [0, 1, 2]
        again.close()

    def test_corrupt_final_checksum_dropped(self, tmp_path):
        store = Store(tmp_path)
        store.append(make_session())
        store.close()
        good = (tmp_path / "records.jsonl").read_bytes()
        bad_line = good.splitlines()[0].replace(b'"alice"', b'"mallory"')
        with open(tmp_path / "records.jsonl", "ab") as fh:
            fh.write(bad_line + b"\n")

        reopened = Store(tmp_path)
        assert len(reopened.records()) == 1
        assert reopened.session("s0000").annotator_id == "alice"
        reopened.close()

    def test_interior_corruption_refuses_to_load(self, tmp_path):
        store = Store(tmp_path)
        session = make_session()
        store.append(session)
        store.append(annotation_for(store, session, 0))
        store.close()
        lines = (tmp_path / "records.jsonl").read_bytes().splitlines(keepends=True)
        lines[0] = lines[0].replace(b'"alice"', b'"mallory"')
        (tmp_path / "records.jsonl").write_bytes(b"".join(lines))
        with pytest.raises(StoreCorruptedError):
            Store(tmp_path)


class TestValidation:
    def test_duplicate_session_rejected(self, tmp_path):
        store = Store(tmp_path)
        store.append(make_session())
        with pytest.raises(ValueError):
            store.append(make_session())
        store.close()

    def test_bad_method_order(self, tmp_path):
        store = Store(tmp_path)
        session = make_session()
        broken = SessionRecord(
            session_id="s1",
            annotator_id="a",
            dataset_id="d",
            method_order=("singular", "singular"),
            tasks=session.tasks,
            created_at=1.0,
        )
        with pytest.raises(ValueError):
            store.append(broken)
        store.close()

    def test_failed_append_leaves_file_untouched(self, tmp_path):
        store = Store(tmp_path)
        store.append(make_session())
        before = (tmp_path / "records.jsonl").read_bytes()
        with pytest.raises(ValueError):
            store.append(make_session())  # duplicate id
        assert (tmp_path / "records.jsonl").read_bytes() == before
        store.close()

    def test_annotation_needs_known_session_and_task(self, tmp_path):
        store = Store(tmp_path)
        session = make_session()
        ann = annotation_for(store, session, 0)
        with pytest.raises(ValueError):
            store.append(ann)  # session not recorded yet
        store.append(session)
        wrong_task = AnnotationRecord(
            session_id="s0000",
            task_id="s0000:99",
            image_id="0000",
            method="singular",
            mask_paths=ann.mask_paths,
            client_duration_ms=10,
            edit_ops=0,
            received_at=1.0,
        )
        with pytest.raises(ValueError):
            store.append(wrong_task)
        store.close()

    def test_duplicate_annotation_rejected(self, tmp_path):
        store = Store(tmp_path)
        session = make_session()
        store.append(session)
        store.append(annotation_for(store, session, 0))
        rel = store.write_mask("again_mask", SegMask(np.eye(6, dtype=bool)))
        dup = AnnotationRecord(
            session_id="s0000",
            task_id="s0000:0",
            image_id="0000",
            method="singular",
            mask_paths={"mask": rel},
            client_duration_ms=10,
            edit_ops=0,
            received_at=1.0,
        )
        with pytest.raises(ValueError):
            store.append(dup)
        store.close()

    def test_cc_mask_subset_enforced(self, tmp_path):
        store = Store(tmp_path)
        session = make_session("s0000", n_tasks=2)  # task 1 is cc
        store.append(session)
        rel_min, rel_max = masks_for(store, "bad", subset_ok=False)
        ann = AnnotationRecord(
            session_id="s0000",
            task_id="s0000:1",
            image_id="0001",
            method="cc",
            mask_paths={"min": rel_min, "max": rel_max},
            client_duration_ms=10,
            edit_ops=0,
            received_at=1.0,
        )
        with pytest.raises(ValueError):
            store.append(ann)
        store.close()

    def test_missing_mask_file_rejected(self, tmp_path):
        store = Store(tmp_path)
        session = make_session()
        store.append(session)
        ann = AnnotationRecord(
            session_id="s0000",
            task_id="s0000:0",
            image_id="0000",
            method="singular",
            mask_paths={"mask": "masks/nope.png"},
            client_duration_ms=10,
            edit_ops=0,
            received_at=1.0,
        )
        with pytest.raises(ValueError):
            store.append(ann)
        store.close()

    def test_negative_duration_rejected(self, tmp_path):
        store = Store(tmp_path)
        session = make_session()
        store.append(session)
        ann = annotation_for(store, session, 0)
        bad = AnnotationRecord(
            session_id=ann.session_id,
            task_id=ann.task_id,
            image_id=ann.image_id,
            method=ann.method,
            mask_paths=ann.mask_paths,
            client_duration_ms=-5,
            edit_ops=0,
            received_at=1.0,
        )
        with pytest.raises(ValueError):
            store.append(bad)
        store.close()

    def test_survey_scores_validated(self, tmp_path):
        store = Store(tmp_path)
        store.append(make_session())
        with pytest.raises(ValueError):
            store.append(
                SurveyRecord("s0000", "singular", {"effort": 5}, received_at=1.0)
            )
        with pytest.raises(ValueError):
            store.append(
                SurveyRecord(
                    "s0000", "singular", {**SCORES, "effort": 11}, received_at=1.0
                )
            )
        with pytest.raises(ValueError):
            store.append(
                SurveyRecord(
                    "s0000", "singular", {**SCORES, "effort": 5.5}, received_at=1.0
                )
            )
        store.close()

    def test_duplicate_survey_rejected(self, tmp_path):
        store = Store(tmp_path)
        store.append(make_session())
        store.append(SurveyRecord("s0000", "singular", SCORES, received_at=1.0))
        with pytest.raises(ValueError):
            store.append(SurveyRecord("s0000", "singular", SCORES, received_at=2.0))
        store.close()


class TestMaskFiles:
    def test_write_and_load(self, tmp_path):
        store = Store(tmp_path)
        mask = SegMask(np.eye(9, dtype=bool))
        rel = store.write_mask("sample", mask)
        assert rel == "masks/sample.png"
        assert store.load_mask(rel) == mask
        store.close()

    def test_no_overwrites(self, tmp_path):
        store = Store(tmp_path)
        store.write_mask("sample", SegMask.empty(4, 4))
        with pytest.raises(ValueError):
            store.write_mask("sample", SegMask.full(4, 4))
        store.close()

    def test_rejects_path_tricks(self, tmp_path):
        store = Store(tmp_path)
        for stem in ("", "a/b", "..", ".hidden", "c\\d"):
            with pytest.raises(ValueError):
                store.write_mask(stem, SegMask.empty(4, 4))
        store.close()


class TestExport:
    def test_header_plus_verbatim(self, tmp_path):
        store = Store(tmp_path)
        session = make_session()
        store.append(session)
        store.append(annotation_for(store, session, 0))
        exported = b"".join(store.export_stream())
        header, rest = exported.split(b"\n", 1)
        assert json.loads(header) == {"schema_version": 1}
        assert rest == (tmp_path / "records.jsonl").read_bytes()
        store.close()

    def test_empty_store_export(self, tmp_path):
        store = Store(tmp_path)
        exported = b"".join(store.export_stream())
        assert json.loads(exported.decode()) == {"schema_version": 1}
        store.close()
