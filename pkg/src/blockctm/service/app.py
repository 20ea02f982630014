"""FastAPI application: session endpoints, classification, static UI."""
from __future__ import annotations

import os
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import RedirectResponse
from fastapi.staticfiles import StaticFiles

from .. import classify as clf
from ..features import BlockScheme, extract_block_features
from ..raster import decode_image, encode_seg_mask_png
from . import schemas
from .sessions import SessionStore, StaleRevision, UnknownSession, mask_runs

MODEL_DIR_ENV = "BLOCKCTM_MODEL_DIR"


class ModelRegistry:
    """Loads CTMM model files by name from one directory, with caching."""

    def __init__(self, directory: Path):
        self.directory = directory
        self._cache: dict[str, tuple[float, object]] = {}
        self._lock = threading.Lock()

    def names(self) -> list[str]:
        if not self.directory.is_dir():
            return []
        return sorted(p.stem for p in self.directory.glob("*.ctmm"))

    def load(self, name: str):
        if "/" in name or "\\" in name or name.startswith("."):
            raise ValueError(f"invalid model name: {name!r}")
        path = self.directory / f"{name}.ctmm"
        if not path.is_file():
            raise FileNotFoundError(f"no model named {name!r} in {self.directory}")
        mtime = path.stat().st_mtime
        with self._lock:
            cached = self._cache.get(name)
            if cached is not None and cached[0] == mtime:
                return cached[1]
            model = clf.load_model_file(path)
            self._cache[name] = (mtime, model)
            return model


def _params_out(session) -> schemas.ParamsOut:
    p = session.params
    return schemas.ParamsOut(lam=p.lam, sigma_c=p.sigma_c, bins=p.bins,
                             max_rounds=p.max_rounds)


def create_app(model_dir: Path | str | None = None, session_capacity: int = 64,
               frontend_dir: Path | str | None = None) -> FastAPI:
    app = FastAPI(title="blockctm", version="0.1.0")
    store = SessionStore(capacity=session_capacity)
    resolved_model_dir = Path(
        model_dir or os.environ.get(MODEL_DIR_ENV) or Path.cwd() / "models")
    registry = ModelRegistry(resolved_model_dir)
    app.state.store = store
    app.state.registry = registry

    def get_session(session_id: str):
        try:
            return store.get(session_id)
        except UnknownSession:
            raise HTTPException(404, f"unknown session: {session_id}")

    @app.post("/api/sessions", response_model=schemas.SessionCreated, status_code=201)
    async def create_session(request: Request):
        data = await request.body()
        try:
            image = decode_image(data)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        session = store.create(image)
        return schemas.SessionCreated(
            session_id=session.session_id, width=session.width,
            height=session.height, revision=session.revision,
            params=_params_out(session))

    @app.get("/api/sessions/{session_id}", response_model=schemas.SessionMeta)
    def session_meta(session_id: str):
        session = get_session(session_id)
        fg, bg = session.seed_counts()
        mask_info = None
        if session.mask is not None:
            mask_info = schemas.MaskInfo(
                revision=session.mask_revision, energy=session.mask.energy,
                rounds=session.mask.rounds,
                foreground_pixels=int(session.mask.foreground.sum()))
        return schemas.SessionMeta(
            session_id=session.session_id, width=session.width,
            height=session.height, revision=session.revision,
            params=_params_out(session),
            seeds=schemas.SeedCounts(fg=fg, bg=bg), mask=mask_info)

    @app.post("/api/sessions/{session_id}/seeds", response_model=schemas.SeedsOut)
    def update_seeds(session_id: str, update: schemas.SeedsUpdate):
        session = get_session(session_id)
        try:
            revision = session.apply_seed_runs(update.runs, update.mode)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        fg, bg = session.seed_counts()
        return schemas.SeedsOut(revision=revision,
                                seeds=schemas.SeedCounts(fg=fg, bg=bg))

    @app.put("/api/sessions/{session_id}/params", response_model=schemas.SessionMeta)
    def update_params(session_id: str, update: schemas.ParamsUpdate):
        session = get_session(session_id)
        try:
            session.update_params(**update.model_dump())
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return session_meta(session_id)

    @app.post("/api/sessions/{session_id}/segment", response_model=schemas.MaskInfo)
    def run_segmentation(session_id: str, request: schemas.SegmentRequest):
        session = get_session(session_id)
        try:
            result = session.segment(request.expected_revision)
        except StaleRevision as exc:
            raise HTTPException(409, str(exc))
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return schemas.MaskInfo(revision=session.mask_revision, energy=result.energy,
                                rounds=result.rounds,
                                foreground_pixels=int(result.foreground.sum()))

    def current_mask(session):
        try:
            return session.current_mask()
        except LookupError as exc:
            raise HTTPException(404, str(exc))
        except StaleRevision as exc:
            raise HTTPException(409, str(exc))

    @app.get("/api/sessions/{session_id}/mask.png")
    def mask_png(session_id: str):
        session = get_session(session_id)
        mask = current_mask(session)
        return Response(content=encode_seg_mask_png(mask), media_type="image/png")

    @app.get("/api/sessions/{session_id}/mask.rle", response_model=schemas.MaskRle)
    def mask_rle(session_id: str):
        session = get_session(session_id)
        mask = current_mask(session)
        return schemas.MaskRle(width=session.width, height=session.height,
                               revision=session.mask_revision, energy=mask.energy,
                               rounds=mask.rounds, runs=mask_runs(mask))

    @app.post("/api/sessions/{session_id}/classify",
              response_model=schemas.ClassifyResponse)
    def classify_session(session_id: str, request: schemas.ClassifyRequest):
        session = get_session(session_id)
        mask = current_mask(session)
        try:
            model = registry.load(request.model)
        except FileNotFoundError as exc:
            raise HTTPException(404, str(exc))
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        if not mask.foreground.any():
            raise HTTPException(409, "segmentation has no foreground pixels to classify")
        scheme = BlockScheme(model.grid or 1)
        features = extract_block_features(session.chroma, mask.foreground, scheme)
        try:
            if isinstance(model, clf.KnnModel):
                result = clf.knn_classify(model, features.values)
                return schemas.ClassifyResponse(
                    label=result.label, class_name=model.class_names[result.label],
                    classifier="knn", nearest_distance=result.nearest_distance)
            result = clf.pnn_classify(model, features.values)
            return schemas.ClassifyResponse(
                label=result.label, class_name=model.class_names[result.label],
                classifier="pnn",
                densities={name: float(result.densities[i])
                           for i, name in enumerate(model.class_names)})
        except ValueError as exc:
            raise HTTPException(400, str(exc))

    @app.delete("/api/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str):
        try:
            store.delete(session_id)
        except UnknownSession:
            raise HTTPException(404, f"unknown session: {session_id}")

    @app.get("/api/models", response_model=schemas.ModelList)
    def list_models():
        return schemas.ModelList(models=registry.names())

    if frontend_dir is not None:
        ui_dir = Path(frontend_dir)
    else:
        # ./frontend/dist, falling back to the development-tree location
        # next to the installed package
        candidates = [Path.cwd() / "frontend" / "dist",
                      Path(__file__).resolve().parents[3] / "frontend" / "dist"]
        ui_dir = next((c for c in candidates if c.is_dir()), candidates[0])
    if ui_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

        @app.get("/", include_in_schema=False)
        def index():
            return RedirectResponse("/ui/")

    return app
