"""Blinded pairwise human evaluation service.

Annotators see an instructional input plus two outputs labeled A/B with a
per-item randomized, server-side-only mapping to the two systems; they pick
A, B, tie, or neither. Once every item holds the required number of
judgments, per-item verdicts are taken by strict majority vote (no majority
means tie) and unblinded into corpus percentages.

Storage is an append-only event log plus derived in-memory state: judgments
are written to the log before they are acknowledged and survive restarts.
"""
from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from .core import derive_rng

CHOICES = ("A", "B", "tie", "neither")


class CreateStudyRequest(BaseModel):
    system1_id: str
    system2_id: str
    inputs: dict[str, str]
    outputs1: dict[str, str]
    outputs2: dict[str, str]
    annotations_per_item: int = 3
    seed: int = 0


class JudgmentRequest(BaseModel):
    item_id: str
    annotator_id: str
    choice: str = Field(description="A | B | tie | neither")


class AnnotationError(ValueError):
    """Carries an HTTP-ish status code for the API layer."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


@dataclass
class ComparisonItem:
    item_id: str
    prompt: str  # instruction + source shown to the annotator
    output_a: str
    output_b: str
    a_is_system1: bool  # hidden mapping, never serialized into annotator payloads

    def payload(self) -> dict[str, str]:
        return {"item_id": self.item_id, "prompt": self.prompt,
                "output_a": self.output_a, "output_b": self.output_b}


@dataclass(frozen=True)
class Judgment:
    item_id: str
    annotator_id: str
    choice: str
    timestamp: float

    def __post_init__(self):
        if self.choice not in CHOICES:
            raise AnnotationError(422, f"choice must be one of {CHOICES}")


@dataclass
class Study:
    study_id: str
    system1_id: str
    system2_id: str
    annotations_per_item: int
    items: dict[str, ComparisonItem]
    judgments: dict[str, dict[str, Judgment]] = field(default_factory=dict)  # item -> annotator

    def item_judgment_count(self, item_id: str) -> int:
        return len(self.judgments.get(item_id, {}))

    def complete(self) -> bool:
        return all(
            self.item_judgment_count(item_id) >= self.annotations_per_item
            for item_id in self.items
        )


@dataclass(frozen=True)
class AggregateResult:
    per_item: dict[str, str]  # item_id -> system id | "tie" | "neither"
    counts: dict[str, int]
    percentages: dict[str, float]  # keys: system1, system2, tie, neither


class StudyStore:
    """Event-sourced store: every mutation appends to events.jsonl before it is
    acknowledged; state is rebuilt by replay on startup."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.log_path = self.root / "events.jsonl"
        self._lock = threading.Lock()
        self.studies: dict[str, Study] = {}
        if self.log_path.exists():
            with open(self.log_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._apply(json.loads(line))

    def _append(self, event: dict[str, Any]) -> None:
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")
            fh.flush()

    def _apply(self, event: dict[str, Any]) -> None:
        if event["type"] == "study":
            items = {
                i["item_id"]: ComparisonItem(
                    item_id=i["item_id"],
                    prompt=i["prompt"],
                    output_a=i["output_a"],
                    output_b=i["output_b"],
                    a_is_system1=i["a_is_system1"],
                )
                for i in event["items"]
            }
            self.studies[event["study_id"]] = Study(
                study_id=event["study_id"],
                system1_id=event["system1_id"],
                system2_id=event["system2_id"],
                annotations_per_item=event["annotations_per_item"],
                items=items,
            )
        elif event["type"] == "judgment":
            study = self.studies[event["study_id"]]
            judgment = Judgment(
                item_id=event["item_id"],
                annotator_id=event["annotator_id"],
                choice=event["choice"],
                timestamp=event["timestamp"],
            )
            study.judgments.setdefault(judgment.item_id, {})[judgment.annotator_id] = judgment

    # -- operations ---------------------------------------------------------

    def create_study(
        self,
        system1_id: str,
        system2_id: str,
        inputs: dict[str, str],
        outputs1: dict[str, str],
        outputs2: dict[str, str],
        annotations_per_item: int = 3,
        seed: int = 0,
        study_id: str | None = None,
    ) -> str:
        if set(outputs1) != set(outputs2) or set(outputs1) != set(inputs):
            raise AnnotationError(400, "the two systems must cover identical item ids")
        if not inputs:
            raise AnnotationError(400, "study needs at least one item")
        if annotations_per_item < 1:
            raise AnnotationError(400, "annotations_per_item must be >= 1")
        study_id = study_id or uuid.uuid4().hex[:12]
        rng = derive_rng(seed, "blinding")
        item_events = []
        for item_id in sorted(inputs):
            a_is_system1 = rng.random() < 0.5
            out1, out2 = outputs1[item_id], outputs2[item_id]
            item_events.append({
                "item_id": item_id,
                "prompt": inputs[item_id],
                "output_a": out1 if a_is_system1 else out2,
                "output_b": out2 if a_is_system1 else out1,
                "a_is_system1": a_is_system1,
            })
        event = {
            "type": "study",
            "study_id": study_id,
            "system1_id": system1_id,
            "system2_id": system2_id,
            "annotations_per_item": annotations_per_item,
            "items": item_events,
            "created_at": time.time(),
        }
        with self._lock:
            if study_id in self.studies:
                raise AnnotationError(409, f"study {study_id!r} already exists")
            self._append(event)
            self._apply(event)
        return study_id

    def _study(self, study_id: str) -> Study:
        study = self.studies.get(study_id)
        if study is None:
            raise AnnotationError(404, f"unknown study {study_id!r}")
        return study

    def next_item(self, study_id: str, annotator_id: str) -> dict[str, Any]:
        """The next unjudged, not-yet-saturated item for this annotator, blinded."""
        if not annotator_id:
            raise AnnotationError(400, "annotator token required")
        study = self._study(study_id)
        total = len(study.items)
        judged = sum(
            1 for item_id in study.items if annotator_id in study.judgments.get(item_id, {})
        )
        progress = {"judged": judged, "total": total}
        for item_id in sorted(study.items):
            if annotator_id in study.judgments.get(item_id, {}):
                continue
            if study.item_judgment_count(item_id) >= study.annotations_per_item:
                continue
            return {"done": False, "progress": progress, **study.items[item_id].payload()}
        return {"done": True, "progress": progress}

    def submit_judgment(self, study_id: str, item_id: str, annotator_id: str, choice: str) -> None:
        study = self._study(study_id)
        if item_id not in study.items:
            raise AnnotationError(404, f"unknown item {item_id!r}")
        if choice not in CHOICES:
            raise AnnotationError(422, f"choice must be one of {CHOICES}")
        if not annotator_id:
            raise AnnotationError(400, "annotator token required")
        event = {
            "type": "judgment",
            "study_id": study_id,
            "item_id": item_id,
            "annotator_id": annotator_id,
            "choice": choice,
            "timestamp": time.time(),
        }
        # Single committer: the duplicate and saturation checks plus the
        # append are atomic, so over-served items cannot exceed the cap.
        with self._lock:
            if annotator_id in study.judgments.get(item_id, {}):
                raise AnnotationError(409, "duplicate judgment for this (item, annotator)")
            if study.item_judgment_count(item_id) >= study.annotations_per_item:
                raise AnnotationError(409, "item already has the required number of judgments")
            self._append(event)
            self._apply(event)

    def aggregate(self, study_id: str) -> AggregateResult:
        study = self._study(study_id)
        unjudged = [
            item_id
            for item_id in sorted(study.items)
            if study.item_judgment_count(item_id) < study.annotations_per_item
        ]
        if unjudged:
            raise AnnotationError(
                409, f"study incomplete; items missing judgments: {', '.join(unjudged)}"
            )
        per_item: dict[str, str] = {}
        counts = {"system1": 0, "system2": 0, "tie": 0, "neither": 0}
        for item_id in sorted(study.items):
            item = study.items[item_id]
            votes: dict[str, int] = {"system1": 0, "system2": 0, "tie": 0, "neither": 0}
            for judgment in study.judgments[item_id].values():
                if judgment.choice == "A":
                    votes["system1" if item.a_is_system1 else "system2"] += 1
                elif judgment.choice == "B":
                    votes["system2" if item.a_is_system1 else "system1"] += 1
                else:
                    votes[judgment.choice] += 1
            total = sum(votes.values())
            best = max(votes, key=lambda k: votes[k])
            # Strict majority; a 1-1-1 split (or any non-majority) counts as tie.
            verdict = best if votes[best] * 2 > total else "tie"
            counts[verdict] += 1
            per_item[item_id] = {
                "system1": study.system1_id,
                "system2": study.system2_id,
            }.get(verdict, verdict)
        n = len(study.items)
        percentages = {k: 100.0 * v / n for k, v in counts.items()}
        return AggregateResult(per_item=per_item, counts=counts, percentages=percentages)


def create_app(store: StudyStore):
    """FastAPI app exposing the four study endpoints over HTTP+JSON.

    CORS is wide open: the annotator UI is served from a different origin
    than the service, and no payload here is sensitive (system identities
    never leave the server until a study completes).
    """
    from fastapi import FastAPI, Query, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse

    app = FastAPI(title="pairwise annotation service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(AnnotationError)
    async def _annotation_error(_request: Request, exc: AnnotationError):
        return JSONResponse(status_code=exc.status, content={"detail": str(exc)})

    @app.post("/studies")
    def create_study(req: CreateStudyRequest):
        study_id = store.create_study(
            system1_id=req.system1_id,
            system2_id=req.system2_id,
            inputs=req.inputs,
            outputs1=req.outputs1,
            outputs2=req.outputs2,
            annotations_per_item=req.annotations_per_item,
            seed=req.seed,
        )
        return {"study_id": study_id, "items": len(req.inputs)}

    @app.get("/studies/{study_id}/next")
    def next_item(study_id: str, annotator: str = Query(...)):
        return store.next_item(study_id, annotator)

    @app.post("/studies/{study_id}/judgments")
    def submit_judgment(study_id: str, req: JudgmentRequest):
        store.submit_judgment(study_id, req.item_id, req.annotator_id, req.choice)
        return {"accepted": True}

    @app.get("/studies/{study_id}/results")
    def results(study_id: str):
        study = store._study(study_id)
        agg = store.aggregate(study_id)
        return {
            "study_id": study_id,
            "system1_id": study.system1_id,
            "system2_id": study.system2_id,
            "counts": agg.counts,
            "percentages": agg.percentages,
            "per_item": agg.per_item,
        }

    return app
