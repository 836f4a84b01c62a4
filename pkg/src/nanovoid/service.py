"""HTTP JSON API: frames, superpixels, annotations, and asynchronous jobs.

Single-node deployment over a data root directory:

    frames/        input frames as 8-bit grayscale PNG, one per frame id
    superpixels/   cached SuperpixelMap JSON per frame id
    annotations/   stored Annotation JSON per frame id
    params/        parameter files referencable by jobs
    jobs/          one directory per job: job.json plus artifacts

Long-running work (learn, simulate, predict) goes through a FIFO worker
pool; job state lives in jobs/{id}/job.json and survives restarts (queued
or running jobs found at startup are marked failed as "interrupted").
Inputs are snapshotted into the job directory at submission time, and the
job body calls the same runner functions as the CLI, so a finished job's
artifacts are byte-identical to the command-line twin.
"""

from __future__ import annotations

import json
import math
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from PIL import Image
from pydantic import BaseModel, ConfigDict, Field

from . import runners
from .annot import (Annotation, annotation_to_json_dict, compose_mask,
                    rasterize_strokes, save_annotation)
from .energy import ModelParams, ParamBounds
from .errors import (InvalidKError, LabelOutOfRangeError, NanovoidError, SchemaError,
                     StaleAnnotationError)
from .grid import Mask
from .learn import extract_state
from .slic import SuperpixelMap, slic_segment
from .storage import atomic_write_json, atomic_write_text, load_mask_png, save_state

FRAME_FMT = runners.FRAME_NAME


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class JobRegistry:
    """File-backed job table with a bounded worker pool.

    Status only moves forward (queued -> running -> done | failed) and
    progress never decreases; both are updated under one lock so concurrent
    polls cannot observe a regression.
    """

    def __init__(self, jobs_dir: Path, n_workers: int):
        self.dir = Path(jobs_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._jobs = {}
        self._pool = ThreadPoolExecutor(max_workers=n_workers)
        self._recover()

    def _persist(self, job: dict) -> None:
        atomic_write_json(self.dir / job["id"] / "job.json", job)

    def _recover(self) -> None:
        for path in sorted(self.dir.glob("*/job.json")):
            try:
                job = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError):
                continue
            if job.get("status") in ("queued", "running"):
                job["status"] = "failed"
                job["error"] = "interrupted"
                job["updated"] = _now()
                self._persist(job)
            self._jobs[job["id"]] = job

    def create(self, kind: str) -> str:
        job_id = uuid.uuid4().hex[:12]
        (self.dir / job_id).mkdir(parents=True)
        job = {"id": job_id, "kind": kind, "status": "queued", "progress": 0.0,
               "result_ref": None, "error": None, "created": _now(), "updated": _now()}
        with self._lock:
            self._jobs[job_id] = job
            self._persist(job)
        return job_id

    def job_dir(self, job_id: str) -> Path:
        return self.dir / job_id

    def update(self, job_id: str, **changes) -> None:
        with self._lock:
            job = self._jobs[job_id]
            if "progress" in changes:
                changes["progress"] = max(job["progress"], min(1.0, float(changes["progress"])))
            job.update(changes)
            job["updated"] = _now()
            self._persist(job)

    def fail(self, job_id: str, error: str) -> None:
        self.update(job_id, status="failed", error=error)

    def start(self, job_id: str, work) -> None:
        """Queue the job body; work(progress_cb) returns the result_ref."""

        def body():
            self.update(job_id, status="running")
            try:
                ref = work(lambda f: self.update(job_id, progress=f))
            except Exception as e:  # job isolation: any failure lands in job.json
                self.fail(job_id, f"{type(e).__name__}: {e}")
                return
            self.update(job_id, status="done", progress=1.0, result_ref=ref)

        self._pool.submit(body)

    def get(self, job_id: str) -> Optional[dict]:
        with self._lock:
            job = self._jobs.get(job_id)
            return dict(job) if job else None


class SuperpixelRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    k: int = Field(ge=2)
    m: float = Field(default=20.0, gt=0)
    max_iter: int = Field(default=10, ge=1)


class Stroke(BaseModel):
    model_config = ConfigDict(extra="forbid")
    points: list[tuple[float, float]] = Field(min_length=1)
    radius: float = Field(gt=0)


class AnnotationPut(BaseModel):
    model_config = ConfigDict(extra="forbid")
    superpixel_ref: str
    selected: list[int]
    erased: Optional[dict] = None
    strokes: Optional[list[Stroke]] = None
    author: str = ""
    timestamp: Optional[str] = None


class LearnPair(BaseModel):
    model_config = ConfigDict(extra="forbid")
    init_frame: str
    target_frame: str
    k: int = Field(ge=1)


class LearnRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    pairs: list[LearnPair] = Field(min_length=1)
    bounds: dict[str, tuple[float, float]] = Field(default_factory=dict)
    lambda1: float = Field(default=1e3, ge=0)
    lambda2: float = Field(default=1e3, ge=0)
    learning_rate: float = Field(default=0.05, gt=0)
    iterations: int = Field(default=100, ge=0)
    dt: float = Field(gt=0)
    gradient_mode: Literal["central_fd", "adjoint"] = "adjoint"
    seed: int = 0
    interface_width: float = Field(default=runners.DEFAULT_INTERFACE_WIDTH, gt=0)


class SimulateInit(BaseModel):
    model_config = ConfigDict(extra="forbid")
    pfs: Optional[str] = None
    frame_id: Optional[str] = None


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    theta: Optional[dict] = None
    params_path: Optional[str] = None
    init: SimulateInit
    dt: float = Field(gt=0)
    n_steps: int = Field(ge=1)
    snapshot_every: int = Field(ge=1)
    interface_width: float = Field(default=runners.DEFAULT_INTERFACE_WIDTH, gt=0)


class PredictRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    theta: Optional[dict] = None
    params_path: Optional[str] = None
    frame_id: str
    dt: float = Field(gt=0)
    step_list: list[int] = Field(min_length=1)
    threshold: float = 0.5
    interface_width: float = Field(default=runners.DEFAULT_INTERFACE_WIDTH, gt=0)


def create_app(data_root, n_workers: Optional[int] = None) -> FastAPI:
    root = Path(data_root)
    for sub in ("frames", "superpixels", "annotations", "params", "jobs"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    workers = n_workers if n_workers else max(1, (os.cpu_count() or 2) // 2)

    app = FastAPI(title="nanovoid")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    registry = JobRegistry(root / "jobs", workers)
    annot_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def _on_invalid(request, exc):
        err = exc.errors()[0]
        loc = [str(p) for p in err["loc"] if p != "body"]
        return JSONResponse(status_code=400,
                            content={"error": err["msg"], "field": ".".join(loc) or "body"})

    @app.exception_handler(SchemaError)
    async def _on_schema(request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc), "field": exc.field})

    @app.exception_handler(InvalidKError)
    async def _on_bad_k(request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc), "field": "k"})

    @app.exception_handler(LabelOutOfRangeError)
    async def _on_label(request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc), "field": "selected"})

    @app.exception_handler(StaleAnnotationError)
    async def _on_stale(request, exc):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(NanovoidError)
    async def _on_domain(request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    def frame_png(frame_id: str) -> Path:
        p = root / "frames" / f"{frame_id}.png"
        if not p.is_file():
            raise HTTPException(status_code=404, detail=f"unknown frame {frame_id!r}")
        return p

    def sp_path(frame_id: str) -> Path:
        return root / "superpixels" / f"{frame_id}.json"

    def ann_path(frame_id: str) -> Path:
        return root / "annotations" / f"{frame_id}.json"

    def load_sp(frame_id: str) -> SuperpixelMap:
        p = sp_path(frame_id)
        if not p.is_file():
            raise HTTPException(status_code=404,
                                detail=f"no superpixel map for frame {frame_id!r}")
        return SuperpixelMap.from_json(p.read_text())

    def load_ann_dict(frame_id: str) -> dict:
        p = ann_path(frame_id)
        if not p.is_file():
            raise HTTPException(status_code=404,
                                detail=f"no annotation for frame {frame_id!r}")
        return json.loads(p.read_text())

    def resolve_rel(rel: str, field: str) -> Path:
        p = Path(rel)
        if p.is_absolute() or ".." in p.parts:
            raise SchemaError(f"{field} must be a relative path inside the data root",
                              field=field)
        full = root / p
        if not full.is_file():
            raise SchemaError(f"{field}: no such file {rel!r}", field=field)
        return full

    def resolve_theta(payload, job_dir: Path) -> Path:
        """Materialize the requested parameters as <job>/params.json."""
        if (payload.theta is None) == (payload.params_path is None):
            raise SchemaError("provide exactly one of theta or params_path", field="theta")
        if payload.theta is not None:
            try:
                theta = ModelParams.from_dict(payload.theta)
            except SchemaError as e:
                raise SchemaError(str(e), field=f"theta.{e.field}")
        else:
            theta = runners.read_params(resolve_rel(payload.params_path, "params_path"))
        out = job_dir / "params.json"
        runners.write_params(theta, out)
        return out

    def stored_annotation_mask(frame_id: str) -> tuple:
        sp = load_sp(frame_id)
        from .annot import annotation_from_json_dict
        ann = annotation_from_json_dict(load_ann_dict(frame_id), n_labels=sp.n_labels)
        return sp, ann, compose_mask(sp, ann)

    @app.get("/api/frames")
    def list_frames():
        out = []
        for p in sorted((root / "frames").glob("*.png")):
            with Image.open(p) as img:
                w, h = img.size
            out.append({"frame_id": p.stem, "width": w, "height": h})
        return out

    @app.get("/api/frames/{frame_id}.png")
    def get_frame(frame_id: str):
        return FileResponse(frame_png(frame_id), media_type="image/png")

    @app.post("/api/frames/{frame_id}/superpixels")
    def post_superpixels(frame_id: str, req: SuperpixelRequest):
        from .storage import load_gray_png
        image = load_gray_png(frame_png(frame_id))
        sp = slic_segment(image, req.k, req.m, req.max_iter)
        atomic_write_text(sp_path(frame_id), sp.to_json())
        body = sp.to_json_dict()
        body["hash"] = sp.content_hash()
        return body

    @app.get("/api/frames/{frame_id}/superpixels")
    def get_superpixels(frame_id: str):
        sp = load_sp(frame_id)
        body = sp.to_json_dict()
        body["hash"] = sp.content_hash()
        return body

    @app.put("/api/frames/{frame_id}/annotation")
    def put_annotation(frame_id: str, req: AnnotationPut):
        frame_png(frame_id)
        p = sp_path(frame_id)
        if not p.is_file():
            raise StaleAnnotationError("no superpixel map for this frame; segment first")
        sp = SuperpixelMap.from_json(p.read_text())
        if req.superpixel_ref != sp.content_hash():
            raise StaleAnnotationError("superpixel_ref does not match the current map")
        if any(v < 0 or v >= sp.n_labels for v in req.selected):
            raise SchemaError(f"selected label out of range (n_labels={sp.n_labels})",
                              field="selected")
        if req.erased is not None and req.strokes is not None:
            raise SchemaError("provide erased runs or strokes, not both", field="erased")
        if req.strokes is not None:
            erased = rasterize_strokes(
                [{"points": [list(pt) for pt in s.points], "radius": s.radius}
                 for s in req.strokes], sp.width, sp.height)
        elif req.erased is not None:
            from .annot import _mask_from_json_dict
            erased = _mask_from_json_dict(req.erased, "erased")
            if (erased.width, erased.height) != (sp.width, sp.height):
                raise SchemaError("erased mask dimensions must match the frame",
                                  field="erased")
        else:
            erased = Mask(sp.width, sp.height, ())
        ann = Annotation(frame_id=frame_id, superpixel_ref=req.superpixel_ref,
                         selected=tuple(req.selected), erased=erased,
                         author=req.author, timestamp=req.timestamp or _now())
        with annot_lock:
            save_annotation(ann, ann_path(frame_id))
        return annotation_to_json_dict(ann)

    @app.get("/api/frames/{frame_id}/annotation")
    def get_annotation(frame_id: str):
        return load_ann_dict(frame_id)

    @app.post("/api/jobs/learn")
    def post_learn(req: LearnRequest):
        try:
            bounds = ParamBounds.from_dict({k: list(v) for k, v in req.bounds.items()})
        except SchemaError as e:
            raise SchemaError(str(e), field=f"bounds.{e.field}")
        job_id = registry.create("learn")
        jdir = registry.job_dir(job_id)
        try:
            data = jdir / "data"
            data.mkdir()
            frame_ids = sorted({p.init_frame for p in req.pairs}
                               | {p.target_frame for p in req.pairs})
            from .storage import save_mask_png
            for fid in frame_ids:
                _, _, mask = stored_annotation_mask(fid)
                save_mask_png(mask, data / f"{fid}.png")
            pairs_doc = {
                "dt": req.dt,
                "interface_width": req.interface_width,
                "dx": 1.0,
                "pairs": [{"init": f"{p.init_frame}.png",
                           "target": f"{p.target_frame}.png",
                           "k": p.k} for p in req.pairs],
            }
            atomic_write_json(data / "pairs.json", pairs_doc)
            bounds_path = None
            if req.bounds:
                bounds_path = jdir / "bounds.json"
                runners.write_bounds(bounds, bounds_path)
        except Exception as e:
            registry.fail(job_id, f"{type(e).__name__}: {e}")
            raise

        def work(progress):
            rows = []

            def on_report(i, n, report):
                # strict JSON has no Infinity/NaN, so non-finite losses poll as null
                vals = {k: (v if math.isfinite(v) else None)
                        for k, v in [("mismatch", report.mismatch),
                                     ("penalty_lo", report.penalty_lo),
                                     ("penalty_hi", report.penalty_hi),
                                     ("total", report.total)]}
                rows.append({"iteration": i, **vals})
                registry.update(job_id, loss_history=list(rows))

            theta, _ = runners.run_learn(
                data, jdir / "params.json", bounds_path=bounds_path,
                lambda1=req.lambda1, lambda2=req.lambda2,
                learning_rate=req.learning_rate,
                iterations=req.iterations,
                gradient_mode=req.gradient_mode, seed=req.seed,
                history_path=jdir / "history.csv", progress=progress,
                report_cb=on_report)
            registry.update(job_id, theta=theta.to_dict())
            return f"jobs/{job_id}"

        registry.start(job_id, work)
        return {"job_id": job_id}

    @app.post("/api/jobs/simulate")
    def post_simulate(req: SimulateRequest):
        if (req.init.pfs is None) == (req.init.frame_id is None):
            raise SchemaError("init needs exactly one of pfs or frame_id", field="init")
        job_id = registry.create("simulate")
        jdir = registry.job_dir(job_id)
        try:
            params_path = resolve_theta(req, jdir)
            theta = runners.read_params(params_path)
            init_path = jdir / "init.pfs"
            if req.init.pfs is not None:
                src = resolve_rel(req.init.pfs, "init.pfs")
                init_path.write_bytes(src.read_bytes())
            else:
                _, _, mask = stored_annotation_mask(req.init.frame_id)
                state = extract_state(mask, theta, req.interface_width)
                save_state(state, init_path)
        except Exception as e:
            registry.fail(job_id, f"{type(e).__name__}: {e}")
            raise

        def work(progress):
            runners.run_simulate(params_path, init_path, req.dt, req.n_steps,
                                 req.snapshot_every, jdir / "traj", progress=progress)
            runners.run_render(jdir / "traj", "eta", jdir / "frames")
            return f"jobs/{job_id}"

        registry.start(job_id, work)
        return {"job_id": job_id}

    @app.post("/api/jobs/predict")
    def post_predict(req: PredictRequest):
        steps = req.step_list
        if any(b <= a for a, b in zip(steps, steps[1:])) or steps[0] < 0:
            raise SchemaError("step_list must be non-negative and strictly increasing",
                              field="step_list")
        job_id = registry.create("predict")
        jdir = registry.job_dir(job_id)
        try:
            params_path = resolve_theta(req, jdir)
            sp, ann, _ = stored_annotation_mask(req.frame_id)
            sp_copy = jdir / "superpixels.json"
            ann_copy = jdir / "annotation.json"
            atomic_write_text(sp_copy, sp.to_json())
            save_annotation(ann, ann_copy)
        except Exception as e:
            registry.fail(job_id, f"{type(e).__name__}: {e}")
            raise

        def work(progress):
            runners.run_predict(params_path, ann_copy, sp_copy, req.dt, steps,
                                req.threshold, jdir / "pred",
                                interface_width=req.interface_width,
                                render_frames=True, progress=progress)
            return f"jobs/{job_id}"

        registry.start(job_id, work)
        return {"job_id": job_id}

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        job = registry.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return job

    @app.get("/api/results/{job_id}/frame/{k}.png")
    def get_result_frame(job_id: str, k: int):
        job = registry.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        if job["status"] != "done":
            raise HTTPException(status_code=404,
                                detail=f"job {job_id} is {job['status']}, not done")
        jdir = registry.job_dir(job_id)
        for candidate in (jdir / "frames", jdir / "pred" / "frames"):
            p = candidate / (FRAME_FMT % k)
            if p.is_file():
                return FileResponse(p, media_type="image/png")
        raise HTTPException(status_code=404, detail=f"no frame {k} for job {job_id}")

    return app
