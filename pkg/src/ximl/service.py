"""HTTP/JSON session gateway for the interactive loop.

One live session by default; all mutations are serialized behind a lock.
Image assets (base PNG, explanation overlay PNG) are served per pending
query; binary masks travel as run-length encoding over JSON.
"""

from __future__ import annotations

import io
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image as PILImage
from pydantic import BaseModel, Field

from .dataset import Pools, split_pools
from .engine import (
    Feedback,
    FeedbackError,
    Mode,
    Outcome,
    PendingQuery,
    Session,
    SessionConfig,
    SessionError,
)
from .evaluation import (
    Evaluator,
    ExperimentConfig,
    SimulatedOracle,
    load_experiment_dataset,
)
from .explainer import explanation_mask
from .segmentation import mask_from_segments, segments_touching_mask

API_VERSION = 1


# -- masks over JSON ---------------------------------------------------------

def rle_encode(mask: np.ndarray) -> dict[str, Any]:
    """Row-major run lengths, alternating zero/one runs, zeros first."""
    mask = np.asarray(mask).astype(bool)
    flat = mask.ravel()
    counts: list[int] = []
    current = False  # runs start with zeros by convention
    run = 0
    for bit in flat:
        if bit == current:
            run += 1
        else:
            counts.append(run)
            current = bit
            run = 1
    counts.append(run)
    return {"size": [int(mask.shape[0]), int(mask.shape[1])], "counts": counts}


def rle_decode(payload: dict[str, Any]) -> np.ndarray:
    h, w = payload["size"]
    counts = payload["counts"]
    total = sum(counts)
    if total != h * w:
        raise ValueError(f"RLE counts sum to {total}, expected {h * w}")
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    bit = False
    for run in counts:
        if bit:
            flat[pos:pos + run] = True
        pos += run
        bit = not bit
    return flat.reshape(h, w)


# -- image assets -------------------------------------------------------------

def image_png(pixels: np.ndarray) -> bytes:
    arr = np.clip(np.asarray(pixels) * 255.0, 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    PILImage.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def overlay_png(pixels: np.ndarray, mask: np.ndarray) -> bytes:
    """Grayscale base with the decisive superpixels tinted green."""
    base = np.clip(np.asarray(pixels) * 255.0, 0, 255).astype(np.uint8)
    rgb = np.stack([base, base, base], axis=-1).astype(np.float32)
    tint = np.array([40.0, 200.0, 60.0], dtype=np.float32)
    rgb[mask] = 0.55 * rgb[mask] + 0.45 * tint
    buf = io.BytesIO()
    PILImage.fromarray(rgb.astype(np.uint8), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


# -- payloads ------------------------------------------------------------------

class RLEMask(BaseModel):
    size: list[int] = Field(min_length=2, max_length=2)
    counts: list[int]


class SessionRequest(BaseModel):
    budget: int | None = None
    counterexamples: int | None = None
    mode: Literal["RWR_ONLY", "RWR_PLUS_W"] | None = None
    seed: int | None = None


class FeedbackRequest(BaseModel):
    outcome: Literal["RRR", "RWR", "W"]
    corrected_label: int | None = None
    mask: RLEMask | None = None
    segment_ids: list[int] | None = None
    token: str
    instance_id: str | None = None


@dataclass
class ServerConfig:
    """Data source plus session defaults for the gateway."""

    experiment: ExperimentConfig = field(default_factory=lambda: ExperimentConfig(
        dataset_kind="synthetic", n_per_class=60, l0_size=16, test_size=40,
        expl_test_size=8, budget=10,
    ))
    session: SessionConfig = field(default_factory=lambda: SessionConfig(budget=10))
    allow_multiple_sessions: bool = False
    # stroke-to-superpixel conversion threshold
    min_overlap: float = 0.3
    simulate_metrics: bool = True
    # directory with the built browser UI, mounted at /ui when set
    ui_dir: Path | None = None

    def resolve_data_dir(self) -> None:
        override = os.environ.get("XIML_DATA_DIR")
        if override and self.experiment.dataset_path:
            candidate = Path(self.experiment.dataset_path)
            if not candidate.is_absolute():
                self.experiment.dataset_path = str(Path(override) / candidate)


@dataclass
class LiveSession:
    id: str
    session: Session
    assets: dict[int, dict[str, bytes]] = field(default_factory=dict)
    tokens: dict[str, dict[str, Any]] = field(default_factory=dict)

    def store_assets(self, iteration: int, pending: PendingQuery,
                     max_features: int) -> None:
        mask = explanation_mask(pending.explanation, pending.segments, max_features)
        self.assets[iteration] = {
            "base": image_png(pending.image.pixels),
            "overlay": overlay_png(pending.image.pixels, mask),
        }
        for old in sorted(self.assets):
            if old < iteration - 1:
                del self.assets[old]


class SessionManager:
    """Owns the live sessions; one writer at a time."""

    def __init__(self, config: ServerConfig) -> None:
        self.config = config
        self.lock = threading.Lock()
        self.sessions: dict[str, LiveSession] = {}
        self._pools: Pools | None = None

    def pools(self) -> Pools:
        if self._pools is None:
            exp = self.config.experiment
            dataset = load_experiment_dataset(exp)
            self._pools = split_pools(
                dataset, seed=exp.split_seed, l0_size=exp.l0_size,
                test_size=exp.test_size, expl_test_size=exp.expl_test_size,
                mask_threshold=exp.mask_threshold,
            )
        return self._pools

    def create_session(self, request: SessionRequest) -> LiveSession:
        if self.sessions and not self.config.allow_multiple_sessions:
            raise HTTPException(status_code=409, detail="a session is already live")
        base = self.config.session
        cfg = SessionConfig(
            budget=request.budget if request.budget is not None else base.budget,
            counterexamples=(
                request.counterexamples
                if request.counterexamples is not None
                else base.counterexamples
            ),
            mode=Mode(request.mode) if request.mode else base.mode,
            explainer=base.explainer,
            segmentation=base.segmentation,
            model=base.model,
            augment=base.augment,
            seed=request.seed if request.seed is not None else base.seed,
            event_log=base.event_log,
            min_accuracy=base.min_accuracy,
        )
        pools = self.pools()
        evaluator = None
        if self.config.simulate_metrics and pools.test:
            evaluator = Evaluator(
                test=pools.test,
                expl_test=pools.expl_test,
                explainer_config=cfg.explainer,
                segmentation_params=cfg.segmentation,
                budget=cfg.budget,
                explanation_every=0,  # explanation scoring is expensive; off by default
            )
        session = Session(cfg, pools, evaluator=evaluator)
        live = LiveSession(id=uuid.uuid4().hex[:12], session=session)
        if not session.complete:
            pending = session.begin_iteration()
            live.store_assets(session.iteration, pending, cfg.explainer.max_features)
        self.sessions[live.id] = live
        return live

    def get(self, session_id: str) -> LiveSession:
        if session_id not in self.sessions:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return self.sessions[session_id]


def snapshot_payload(live: LiveSession, class_names: tuple[str, str],
                     min_overlap: float = 0.3) -> dict[str, Any]:
    session = live.session
    pending = session.pending
    payload: dict[str, Any] = {
        "api_version": API_VERSION,
        "session_id": live.id,
        "iteration": session.iteration,
        "budget": session.config.budget,
        "mode": session.config.mode.value,
        "complete": session.complete and pending is None,
        "annotation_min_overlap": min_overlap,
        "class_names": list(class_names),
        "pool_sizes": {
            "labeled": len(session.labeled),
            "unlabeled": len(session.unlabeled),
        },
        "latest_metrics": session.all_records()[-1].to_json(),
        "pending": None,
    }
    if pending is not None:
        h, w = pending.image.pixels.shape
        payload["pending"] = {
            "instance_id": pending.image.id,
            "predicted_label": pending.predicted_label,
            "predicted_class": class_names[pending.predicted_label],
            "confidence": pending.confidence,
            "explanation": {
                "weights": [float(x) for x in pending.explanation.weights],
                "intercept": pending.explanation.intercept,
                "selected": list(pending.explanation.selected),
                "fidelity": pending.explanation.fidelity,
            },
            "segments": [int(x) for x in pending.segments.assignment.ravel()],
            "n_segments": pending.segments.n_segments,
            "size": [h, w],
            "assets": {
                "image": f"/session/{live.id}/assets/{session.iteration}/base.png",
                "overlay": f"/session/{live.id}/assets/{session.iteration}/overlay.png",
            },
        }
    return payload


def create_app(config: ServerConfig | None = None) -> FastAPI:
    config = config or ServerConfig()
    config.resolve_data_dir()
    manager = SessionManager(config)
    app = FastAPI(title="ximl session gateway")
    app.state.manager = manager

    @app.exception_handler(RequestValidationError)
    async def invalid_payload(request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    # the annotation UI may be served from another origin during development
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    if config.ui_dir is not None:
        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    def class_names() -> tuple[str, str]:
        return manager.pools().class_names

    @app.post("/session", status_code=201)
    def create_session(request: SessionRequest | None = None) -> dict[str, Any]:
        with manager.lock:
            try:
                live = manager.create_session(request or SessionRequest())
            except (ValueError, SessionError) as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            return snapshot_payload(live, class_names(), config.min_overlap)

    @app.get("/session/{session_id}/query")
    def get_query(session_id: str) -> dict[str, Any]:
        live = manager.get(session_id)
        if live.session.pending is None:
            raise HTTPException(status_code=409, detail="session complete: no pending query")
        return snapshot_payload(live, class_names(), config.min_overlap)

    @app.get("/session/{session_id}/assets/{iteration}/{name}.png")
    def get_asset(session_id: str, iteration: int, name: str) -> Response:
        live = manager.get(session_id)
        bundle = live.assets.get(iteration)
        if bundle is None or name not in bundle:
            raise HTTPException(status_code=404, detail="asset expired or unknown")
        return Response(content=bundle[name], media_type="image/png")

    @app.get("/session/{session_id}/metrics")
    def get_metrics(session_id: str) -> list[dict[str, Any]]:
        live = manager.get(session_id)
        return [rec.to_json() for rec in live.session.all_records()]

    @app.post("/session/{session_id}/feedback")
    def post_feedback(session_id: str, payload: FeedbackRequest) -> dict[str, Any]:
        live = manager.get(session_id)
        with manager.lock:
            if payload.token in live.tokens:
                return live.tokens[payload.token]  # idempotent replay
            session = live.session
            if session.pending is None:
                raise HTTPException(status_code=409, detail="no pending query")
            if (
                payload.instance_id is not None
                and payload.instance_id != session.pending.image.id
            ):
                raise HTTPException(
                    status_code=409,
                    detail="stale feedback: the pending query has changed",
                )
            mask = _resolve_mask(payload, session.pending, config.min_overlap)
            feedback = Feedback(
                outcome=Outcome(payload.outcome),
                corrected_label=payload.corrected_label,
                corrected_mask=mask,
            )
            try:
                session.submit_feedback(feedback)
            except FeedbackError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            except SessionError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            if not session.complete:
                pending = session.begin_iteration()
                live.store_assets(
                    session.iteration, pending, session.config.explainer.max_features
                )
            response = snapshot_payload(live, class_names(), config.min_overlap)
            live.tokens[payload.token] = response
            return response

    return app


def _resolve_mask(payload: FeedbackRequest, pending: PendingQuery,
                  min_overlap: float) -> np.ndarray | None:
    """Combine freehand RLE strokes and clicked superpixels into one mask.

    Freehand strokes snap to the superpixels they sufficiently overlap, so
    corrections always align with the interpretable features.
    """
    ids: set[int] = set()
    if payload.segment_ids:
        bad = [i for i in payload.segment_ids
               if i < 0 or i >= pending.segments.n_segments]
        if bad:
            raise HTTPException(status_code=400, detail=f"segment ids out of range: {bad}")
        ids.update(int(i) for i in payload.segment_ids)
    if payload.mask is not None:
        try:
            stroke = rle_decode(payload.mask.model_dump())
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        if stroke.shape != pending.image.pixels.shape:
            raise HTTPException(
                status_code=400,
                detail=f"mask size {list(stroke.shape)} does not match the image",
            )
        ids.update(segments_touching_mask(pending.segments, stroke, min_overlap))
    if not ids:
        if payload.mask is not None or payload.segment_ids is not None:
            raise HTTPException(
                status_code=400,
                detail="annotation selects no superpixels (empty mask correction)",
            )
        return None
    return mask_from_segments(pending.segments, sorted(ids))


def serve(config: ServerConfig, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="info")
