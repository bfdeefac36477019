"""Read-only HTTP service over trained surrogate artifacts.

Models are immutable after load; each request runs an independent forward
solve, so concurrent requests share nothing. Training never happens in
this process. Responses carry a top-level ``schema_version`` and are
byte-identical for identical requests.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ConfigDict, Field

from .contact import StepContact
from .errors import EpikappaError
from .fitting import TrainedModel
from .params import STATE_NAMES
from .scenario import breach_day
from .simplex import project_feasible, project_feasible_batch
from .solvers import SolveConfig, solve

SCHEMA_VERSION = 1
IS_INDEX = 3
D_INDEX = 6


class StepOverride(BaseModel):
    """Mechanistic step-contact what-if knobs."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["step"] = "step"
    kappa1: float = Field(ge=0.0, le=1.0)
    kappa2: float = Field(ge=0.0, le=1.0)
    t_ld: float = Field(ge=0.0)


class ObservationSeries(BaseModel):
    """Recent observed counts for observer-on inference."""

    model_config = ConfigDict(extra="forbid")

    t: list[float] = Field(min_length=2)
    y: list[list[float]] = Field(min_length=2)


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())

    schema_version: int = SCHEMA_VERSION
    model_id: str
    horizon: int = Field(default=89, ge=1)
    # None means "use the model's training initial state"
    initial_state: list[float] | None = Field(default=None, min_length=7, max_length=7)
    contact: Literal["learned"] | StepOverride = "learned"
    observations: ObservationSeries | None = None
    icu_coefficient: float = Field(default=0.05, ge=0.0)
    icu_capacity: float = Field(default=150.0, gt=0.0)
    threshold: float = Field(default=0.75, gt=0.0, le=1.0)


def run_request(model: TrainedModel, req: SimulateRequest) -> dict:
    """Solve one scenario request against a loaded model.

    The same function backs the HTTP endpoint and the CLI replay path, so
    an exported request reproduces its response exactly. The returned
    trajectory is projected onto the feasible set before leaving.
    """
    N = model.params.N
    if req.initial_state is None:
        u0 = model.u0.copy()
    else:
        u0 = np.asarray(req.initial_state, dtype=float)
        if not np.all(np.isfinite(u0)):
            raise EpikappaError("initial_state entries must be finite")
        u0 = project_feasible(u0, N)

    data = None
    if req.observations is not None:
        if model.gains is None:
            raise EpikappaError(
                f"model {req.model_id!r} has no observer gains; omit observations"
            )
        if not isinstance(req.contact, str):
            raise EpikappaError("observer correction applies to the learned contact only")
        t_obs = np.asarray(req.observations.t, dtype=float)
        y_obs = np.asarray(req.observations.y, dtype=float)
        if y_obs.shape != (t_obs.size, model.obs.n_series):
            raise EpikappaError(
                f"observations.y must be ({t_obs.size}, {model.obs.n_series}), "
                f"got {y_obs.shape}"
            )
        if not (np.all(np.isfinite(t_obs)) and np.all(np.isfinite(y_obs))):
            raise EpikappaError("observations must be finite")
        data = (t_obs, y_obs)

    t = model.t0 + np.arange(req.horizon + 1, dtype=float)
    if isinstance(req.contact, StepOverride):
        traj = solve(
            u0,
            (model.t0, model.t0 + req.horizon),
            model.params,
            StepContact(req.contact.kappa1, req.contact.kappa2, req.contact.t_ld),
            SolveConfig(method="rk4", h=model.h),
            saveat=t,
        )
        states = traj.states
    else:
        states = model.daily_states(req.horizon, data=data, u0=u0)
    states = project_feasible_batch(states, N)

    icu = req.icu_coefficient * states[:, IS_INDEX]
    bd = breach_day(t, icu, req.icu_capacity, req.threshold)
    return {
        "schema_version": SCHEMA_VERSION,
        "model": {
            "id": req.model_id,
            "strategy": model.strategy,
            "seed": model.seed,
            "config_hash": model.config_hash,
            "status": model.status,
        },
        "request": req.model_dump(mode="json"),
        "t": [float(x) for x in t],
        "compartments": {
            name: [float(v) for v in states[:, j]] for j, name in enumerate(STATE_NAMES)
        },
        "icu": [float(v) for v in icu],
        "threshold_level": req.threshold * req.icu_capacity,
        "breach_day": bd,
        "summary": {
            "peak_Is": float(states[:, IS_INDEX].max()),
            "peak_icu": float(icu.max()),
            "final_D": float(states[-1, D_INDEX]),
            "final_R": float(states[-1, 5]),
            "breach_day": bd,
        },
    }


def render_response(doc: dict) -> bytes:
    """Exactly the bytes the HTTP layer emits for ``doc``."""
    return json.dumps(
        doc, ensure_ascii=False, allow_nan=False, indent=None, separators=(",", ":")
    ).encode("utf-8")


def model_manifest(model_id: str, model: TrainedModel) -> dict:
    return {
        "id": model_id,
        "strategy": model.strategy,
        "seed": model.seed,
        "config_hash": model.config_hash,
        "status": model.status,
        "horizon": model.n_obs - 1,
        "has_observer": model.gains is not None,
        "metrics": {k: model.metrics[k] for k in ("loss", "data") if k in model.metrics},
    }


class ModelStore:
    """Trained artifacts from a directory of model JSON files.

    File stem = model id. Non-model JSON files (manifests, configs) in the
    same directory are skipped.
    """

    def __init__(self, models_dir):
        self.dir = Path(models_dir)
        self.models: dict[str, TrainedModel] = {}
        self.ready = False

    def load(self) -> None:
        found = {}
        for p in sorted(self.dir.glob("**/*.json")):
            try:
                found[p.stem] = TrainedModel.load(p)
            except (EpikappaError, KeyError, TypeError, json.JSONDecodeError):
                continue
        self.models = found
        self.ready = True

    def require(self, model_id: str) -> TrainedModel:
        if not self.ready:
            raise HTTPException(status_code=503, detail="models are still loading")
        if model_id not in self.models:
            raise HTTPException(status_code=404, detail=f"unknown model {model_id!r}")
        return self.models[model_id]


def build_app(models_dir, static_dir=None, preload: bool = True) -> FastAPI:
    """Assemble the service over one models directory.

    ``static_dir`` (when it exists) is mounted at /ui for the browser
    explorer; the API itself lives at /health, /models, /simulate.
    """
    store = ModelStore(models_dir)
    if preload:
        store.load()

    app = FastAPI(title="epikappa scenario service")
    app.state.store = store

    @app.exception_handler(RequestValidationError)
    async def invalid_request(_, exc: RequestValidationError):
        detail = [
            {
                "field": ".".join(str(p) for p in err["loc"] if p != "body"),
                "message": err["msg"],
            }
            for err in exc.errors()
        ]
        return JSONResponse(
            status_code=400,
            content={"schema_version": SCHEMA_VERSION, "error": "invalid request", "detail": detail},
        )

    @app.get("/health")
    def health():
        return {
            "schema_version": SCHEMA_VERSION,
            "status": "ok" if store.ready else "loading",
            "n_models": len(store.models),
        }

    @app.get("/models")
    def models():
        if not store.ready:
            raise HTTPException(status_code=503, detail="models are still loading")
        return {
            "schema_version": SCHEMA_VERSION,
            "models": [model_manifest(mid, m) for mid, m in sorted(store.models.items())],
        }

    @app.post("/simulate")
    def simulate(req: SimulateRequest):
        model = store.require(req.model_id)
        try:
            doc = run_request(model, req)
        except EpikappaError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return JSONResponse(content=doc)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
