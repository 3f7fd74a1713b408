"""HTTP surface: client registration, preference subscriptions, agent
start/stop controls and database status, plus the static admin UI.

Every non-2xx response body carries {"code", "message"}.
"""

from __future__ import annotations

import logging
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import datastore as ds
from .clocks import Clock, SystemClock
from .config import AppConfig
from .fetch_combinators import RealTransport, Transport
from .harvest_pipeline import AgentRunner, ConfigError
from .match_notify import analyze_new, dispatch_pending

logger = logging.getLogger(__name__)

__all__ = ["ServiceHost", "create_app"]


class ServiceHost:
    """Wires the store, the per-category agent runners and the notifier.

    After every harvest cycle the notifier runs one analyze+dispatch
    pass; a lock keeps those passes serialized across agents."""

    def __init__(
        self,
        store: ds.Datastore,
        config: AppConfig,
        clock: Clock | None = None,
        transport: Transport | None = None,
        gateway=None,
    ):
        self.store = store
        self.config = config
        self.clock = clock or SystemClock()
        self.transport = transport or RealTransport()
        self.gateway = gateway or config.build_gateway(store.data_dir)
        self._notify_lock = threading.Lock()
        self._control_lock = threading.Lock()
        self.runners = {
            name: AgentRunner(cfg, store, self.clock, self.transport, self._on_report)
            for name, cfg in config.categories.items()
        }

    def _on_report(self, report) -> None:
        try:
            self.notify_cycle()
        except Exception:
            logger.exception("notify cycle failed after %s harvest", report.category)

    def notify_cycle(self) -> tuple[int, object]:
        with self._notify_lock:
            created, _ = analyze_new(self.store, clock=self.clock)
            dispatched = dispatch_pending(self.store, self.gateway, clock=self.clock)
            return created, dispatched

    def start_agent(self, category: str) -> None:
        with self._control_lock:
            runner = self._runner(category)
            if runner.running:
                raise AgentStateError(f"agent {category} already running")
            runner.start()

    def stop_agent(self, category: str) -> None:
        with self._control_lock:
            runner = self._runner(category)
            if not runner.running:
                raise AgentStateError(f"agent {category} not running")
            runner.stop()

    def stop_all(self) -> None:
        with self._control_lock:
            for runner in self.runners.values():
                if runner.running:
                    runner.stop()

    def _runner(self, category: str) -> AgentRunner:
        if category not in self.runners:
            raise ConfigError(f"category {category!r} is not configured")
        return self.runners[category]

    def agent_statuses(self) -> list[dict]:
        return [self.runners[name].status().as_dict() for name in sorted(self.runners)]


class AgentStateError(Exception):
    pass


class ClientIn(BaseModel):
    name: str
    mobile: str


class ConstraintIn(BaseModel):
    field: str
    mode: str
    value: str


class PreferenceIn(BaseModel):
    category: str
    constraints: list[ConstraintIn]


class SubscriptionIn(BaseModel):
    preference_id: int


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def create_app(host: ServiceHost, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="adharvest", docs_url=None, redoc_url=None)
    store = host.store

    @app.exception_handler(RequestValidationError)
    async def on_request_validation(request: Request, exc: RequestValidationError):
        return _error(422, "validation", str(exc.errors()))

    @app.exception_handler(ds.ValidationError)
    async def on_store_validation(request: Request, exc: ds.ValidationError):
        return _error(422, "validation", str(exc))

    @app.exception_handler(ds.UnknownClient)
    async def on_unknown_client(request: Request, exc: ds.UnknownClient):
        return _error(404, "unknown-client", f"no client {exc}")

    @app.exception_handler(ds.UnknownPreference)
    async def on_unknown_preference(request: Request, exc: ds.UnknownPreference):
        return _error(404, "unknown-preference", f"no preference {exc}")

    @app.exception_handler(ConfigError)
    async def on_config_error(request: Request, exc: ConfigError):
        return _error(404, "unknown-category", str(exc))

    @app.exception_handler(AgentStateError)
    async def on_agent_state(request: Request, exc: AgentStateError):
        return _error(409, "agent-state", str(exc))

    # -- clients and preferences -------------------------------------------

    @app.post("/clients")
    def create_client(body: ClientIn):
        result = store.put_client(body.name, body.mobile)
        return JSONResponse(status_code=201 if result.inserted else 200, content={"id": result.id})

    @app.get("/clients")
    def list_clients():
        return [
            {
                "id": c.id,
                "name": c.name,
                "mobile": c.mobile,
                "subscriptions": sorted(c.subscriptions),
            }
            for c in store.list_clients()
        ]

    @app.post("/preferences")
    def create_preference(body: PreferenceIn):
        constraints = [(c.field, c.mode, c.value) for c in body.constraints]
        result = store.put_preference(body.category, constraints)
        return JSONResponse(status_code=201 if result.inserted else 200, content={"id": result.id})

    @app.get("/preferences")
    def list_preferences():
        return [
            {
                "id": p.id,
                "category": p.category,
                "constraints": [
                    {"field": f, "mode": m, "value": v} for f, m, v in p.constraints
                ],
            }
            for p in store.list_preferences()
        ]

    @app.post("/clients/{client_id}/subscriptions")
    def subscribe(client_id: int, body: SubscriptionIn):
        store.subscribe(client_id, body.preference_id)
        return {"ok": True}

    # -- agents and status ----------------------------------------------------

    @app.post("/agents/{category}/start")
    def start_agent(category: str):
        host.start_agent(category)
        return JSONResponse(status_code=202, content={"category": category, "state": "running"})

    @app.post("/agents/{category}/stop")
    def stop_agent(category: str):
        host.stop_agent(category)
        return JSONResponse(status_code=202, content={"category": category, "state": "stopped"})

    @app.get("/agents")
    def list_agents():
        return host.agent_statuses()

    @app.get("/status")
    def status():
        return {"counts": store.counts(), "agents": host.agent_statuses()}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
