"""HTTP surface: JSON analyze endpoint plus the reader-study API."""
from __future__ import annotations

import os
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Header, HTTPException, Query
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from . import study as study_mod
from .densenet import Params, predict, segment_to_image, PipelineError
from .ecgio import load_manifest, load_manifest_records
from .preprocess import (
    MIN_SEGMENT_S, MAX_SEGMENT_S, Segment, extract_lead, split_segments,
)

DEFAULT_ADMIN_TOKEN = "admin-token"
DEFAULT_ANALYZE_TOKEN = "analyze-token"


class AnalyzeRequest(BaseModel):
    record_id: str
    sampling_rate_hz: float = Field(gt=0)
    lead: str = "I"
    samples_uv: list[float] = Field(min_length=1)


class StudyCreateRequest(BaseModel):
    manifest_path: str
    raters: list[str] = Field(min_length=1)
    seed: int = 0
    study_id: str | None = None


class AnnotationRequest(BaseModel):
    item_id: str
    label: str


def create_app(
    store: study_mod.StudyStore,
    model_params: Params | None = None,
    admin_token: str | None = None,
    analyze_token: str | None = None,
) -> FastAPI:
    admin_token = admin_token or os.environ.get("ECGSTUDY_ADMIN_TOKEN", DEFAULT_ADMIN_TOKEN)
    analyze_token = analyze_token or os.environ.get("ECGSTUDY_ANALYZE_TOKEN", DEFAULT_ANALYZE_TOKEN)
    app = FastAPI(title="ecgstudy", version="0.1.0")

    def require_bearer(authorization: str | None, token: str):
        if authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="invalid or missing token")

    @app.post("/api/analyze")
    def analyze(req: AnalyzeRequest, authorization: str | None = Header(default=None)):
        require_bearer(authorization, analyze_token)
        if model_params is None:
            raise HTTPException(status_code=503, detail="no model checkpoint loaded")
        duration = len(req.samples_uv) / req.sampling_rate_hz
        if not (MIN_SEGMENT_S <= duration <= MAX_SEGMENT_S):
            raise HTTPException(
                status_code=422,
                detail=f"duration {duration:.2f} s outside [{MIN_SEGMENT_S:g}, {MAX_SEGMENT_S:g}] s",
            )
        if req.lead != "I":
            raise HTTPException(status_code=422, detail="only lead I is analyzed")
        seg = Segment(
            parent_id=req.record_id, segment_index=0, lead_name="I",
            samples=np.asarray(req.samples_uv, dtype=float),
            sampling_rate_hz=req.sampling_rate_hz, start_s=0.0,
        )
        try:
            image = segment_to_image(seg, model_params.config)
            pred = predict(model_params, image)
        except (PipelineError, ValueError):
            incident = uuid.uuid4().hex[:12]
            raise HTTPException(status_code=500, detail=f"analysis failed (incident {incident})")
        return {
            "class": pred.predicted_class,
            "probabilities": pred.as_dict(),
            "model_version": pred.model_version,
        }

    @app.post("/api/studies")
    def create_study(req: StudyCreateRequest, authorization: str | None = Header(default=None)):
        require_bearer(authorization, admin_token)
        try:
            manifest = load_manifest(Path(req.manifest_path))
            records = load_manifest_records(manifest)
            segments, labels = [], []
            label_by_id = {e.record_id: e.label for e in manifest.entries}
            for rec in records:
                for seg in split_segments(extract_lead(rec, "I")):
                    segments.append(seg)
                    labels.append(label_by_id[rec.record_id])
            state = store.create_study(
                segments, labels, req.raters, seed=req.seed, study_id=req.study_id
            )
        except (OSError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {
            "study_id": state.study_id,
            "n_items": len(state.items),
            "raters": [{"rater_id": r.rater_id, "token": r.token} for r in state.raters],
        }

    @app.get("/api/studies/{study_id}/next")
    def next_item(study_id: str, x_rater_token: str | None = Header(default=None)):
        try:
            return store.next_item(study_id, x_rater_token or "")
        except study_mod.AuthError as exc:
            raise HTTPException(status_code=401, detail=str(exc))
        except study_mod.NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/api/studies/{study_id}/annotations")
    def submit(study_id: str, req: AnnotationRequest,
               x_rater_token: str | None = Header(default=None)):
        try:
            return store.submit_annotation(study_id, x_rater_token or "", req.item_id, req.label)
        except study_mod.AuthError as exc:
            raise HTTPException(status_code=401, detail=str(exc))
        except study_mod.ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except study_mod.NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except study_mod.StudyError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/api/studies/{study_id}/model-run")
    def model_run(study_id: str, authorization: str | None = Header(default=None)):
        require_bearer(authorization, admin_token)
        if model_params is None:
            raise HTTPException(status_code=503, detail="no model checkpoint loaded")
        try:
            return store.run_model(study_id, model_params)
        except study_mod.NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/api/studies/{study_id}/report")
    def report(study_id: str, authorization: str | None = Header(default=None),
               format: str = Query(default="json")):
        require_bearer(authorization, admin_token)
        try:
            rep = store.build_report(study_id)
        except study_mod.NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except study_mod.StudyError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        if format == "markdown":
            return PlainTextResponse(study_mod.report_markdown(rep))
        return rep

    return app
