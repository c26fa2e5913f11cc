"""HTTP service: one memory per instance, single-writer command handling,
snapshot+log persistence with replay recovery on startup."""

from __future__ import annotations

import logging
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .agents import render_claim_text
from .arbitration import AnswerMismatch
from .config import ServiceConfig
from .constructor import SegmentDescriptor, build_memory, decompose_claims, derive_dependencies, ingest_graph, select_keyframes
from .engine import Engine
from .graph import GraphError, GraphState
from .memory import Action, Actor, AuthorityError, Edit, MemoryError_, SemanticMemory
from .store import DataStore
from .synth import Ontology

logger = logging.getLogger(__name__)


class AnswerBody(BaseModel):
    type: str
    value: str


class OverrideBody(BaseModel):
    value: str


class IngestBody(BaseModel):
    slices: dict
    segments: list | None = None
    ontology: dict | None = None
    truth: dict | None = None
    budget: int | None = None


def error(status: int, code: str, message: str, field: str | None = None):
    detail = {"code": code, "message": message}
    if field:
        detail["field"] = field
    return HTTPException(status_code=status, detail=detail)


class ServiceHost:
    """Owns the engine behind a single writer lock; verification runs in a
    background thread and reports through the status endpoint."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.store = DataStore(config.resolved_data_dir())
        self.lock = threading.Lock()
        self.engine: Engine | None = None
        self.verify_status = {"running": False, "rounds": 0, "converged": False,
                              "runs": 0}
        if self.store.exists():
            self.engine = self.store.build_engine(config)
            logger.info("recovered memory at version %s from %s",
                        self.engine.memory.version, self.store.dir)

    def require_engine(self) -> Engine:
        if self.engine is None:
            raise error(409, "no_memory", "no memory ingested yet")
        return self.engine

    def ingest(self, body: IngestBody) -> dict:
        with self.lock:
            try:
                slices = {int(k): v for k, v in body.slices.items()}
            except (TypeError, ValueError):
                raise error(400, "invalid_request", "slice keys must be frame ids",
                            field="slices")
            segments = None
            if body.segments is not None:
                try:
                    segments = [SegmentDescriptor(int(s["start"]), int(s["end"]),
                                                  bool(s["dynamic"]))
                                for s in body.segments]
                except (KeyError, TypeError, ValueError) as exc:
                    raise error(400, "invalid_request",
                                f"malformed segment descriptor: {exc}", field="segments")
            try:
                memory = build_memory(slices, segments,
                                      budget=body.budget or self.config.budget.keyframes,
                                      iou_threshold=self.config.iou_threshold)
            except (GraphError, ValueError, MemoryError_) as exc:
                raise error(400, "invalid_request", str(exc), field="slices")
            ontology = (Ontology.from_dict(body.ontology) if body.ontology
                        else _ontology_from_graph(memory.graph))
            truth = GraphState.from_dict(body.truth) if body.truth else None
            self.store.save_initial(memory, ontology, truth)
            self.engine = self.store.build_engine(self.config)
            self.store.sync(self.engine)
            return {"version": self.engine.memory.version,
                    "claims": len(self.engine.memory.claims),
                    "entities": len(self.engine.memory.graph.entities)}

    def start_verify(self) -> dict:
        engine = self.require_engine()
        if engine.agents is None:
            raise error(409, "no_backend",
                        "no verification backend: ingest with ground truth "
                        "or configure an external adapter")
        with self.lock:
            if self.verify_status["running"]:
                raise error(409, "busy", "verification already in progress")
            self.verify_status.update(running=True)

        def work():
            try:
                reports = engine.run_refinement()
                with self.lock:
                    self.store.sync(engine)
                    self.verify_status.update(
                        rounds=len(reports),
                        converged=len(reports) < engine.config.fusion.rounds_max,
                        runs=self.verify_status["runs"] + 1)
            finally:
                self.verify_status["running"] = False

        threading.Thread(target=work, daemon=True).start()
        return {"started": True}

    def answer(self, item_id: str, body: AnswerBody) -> dict:
        engine = self.require_engine()
        if engine.agents is None:
            raise error(409, "no_backend",
                        "no verification backend for closure re-verification")
        with self.lock:
            if self.verify_status["running"]:
                raise error(409, "busy", "verification in progress")
            item = engine.find_item(item_id)
            if item is None:
                raise error(404, "unknown_item", f"no queue item {item_id}")
            if item.status != "open":
                raise error(409, "stale_item", f"item {item_id} is {item.status}")
            claim = engine.memory.claims.get(item.claim_id)
            if claim is None:
                item.status = "expired"
                raise error(409, "stale_item", f"claim {item.claim_id} is gone")
            try:
                result = engine.answer(item_id, {"type": body.type, "value": body.value})
            except AnswerMismatch as exc:
                raise error(400, "answer_mismatch", str(exc))
            self.store.sync(engine)
            return {
                "item_id": item_id,
                "reverify": result.plan.to_dict(),
                "calls_actual": result.calls_actual,
                "calls_full": result.calls_full,
                "queue_open": len(engine.open_items()),
            }

    def override(self, claim_id: str, value: str) -> dict:
        engine = self.require_engine()
        with self.lock:
            if claim_id not in engine.memory.claims:
                raise error(404, "unknown_claim", f"no claim {claim_id}")
            try:
                version = engine.memory.apply_edit(
                    Edit(Action.OVERRIDE, claim_id=claim_id, value=value),
                    Actor.HUMAN)
            except (AuthorityError, MemoryError_) as exc:
                raise error(400, "rejected", str(exc))
            self.store.sync(engine)
            return {"version": version}

    def lock_claim(self, claim_id: str) -> dict:
        engine = self.require_engine()
        with self.lock:
            if claim_id not in engine.memory.claims:
                raise error(404, "unknown_claim", f"no claim {claim_id}")
            version = engine.memory.lock_claim(claim_id)
            self.store.sync(engine)
            return {"version": version}


def _ontology_from_graph(graph: GraphState) -> Ontology:
    labels = sorted({e.canonical_label for e in graph.entities.values()})
    predicates = sorted({r.predicate for r in graph.relations.values()})
    values: dict[str, list[str]] = {}
    for a in graph.attributes.values():
        values.setdefault(a.attribute_key, [])
        if a.attribute_value not in values[a.attribute_key]:
            values[a.attribute_key].append(a.attribute_value)
    return Ontology(labels=labels, predicates=predicates, attribute_values=values)


def create_app(config: ServiceConfig, console_dir: str | None = None) -> FastAPI:
    host = ServiceHost(config)
    app = FastAPI(title="claimloop", version="0.1.0")
    app.state.host = host

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        errors = exc.errors()
        field = ".".join(str(p) for p in errors[0]["loc"][1:]) if errors else None
        return JSONResponse(status_code=400,
                            content={"code": "invalid_request",
                                     "message": errors[0]["msg"] if errors else "invalid body",
                                     "field": field})

    @app.exception_handler(HTTPException)
    async def http_error_handler(request: Request, exc: HTTPException):
        # one flat error shape everywhere: {code, message, field?}
        if isinstance(exc.detail, dict):
            return JSONResponse(status_code=exc.status_code, content=exc.detail)
        return JSONResponse(status_code=exc.status_code,
                            content={"code": "error", "message": str(exc.detail)})

    @app.get("/health")
    def health():
        return {"ok": True, "memory": host.engine is not None}

    @app.post("/ingest")
    def ingest(body: IngestBody):
        return host.ingest(body)

    @app.get("/memory")
    def memory(version: int | None = None):
        engine = host.require_engine()
        with host.lock:
            if version is None:
                return engine.memory.snapshot_dict()
            try:
                return engine.memory.state_at(version)
            except MemoryError_ as exc:
                raise error(404, "unknown_version", str(exc))

    @app.get("/claims")
    def claims():
        engine = host.require_engine()
        with host.lock:
            return [{**c.to_dict(),
                     "claim_text": render_claim_text(c, engine.memory.graph)}
                    for _, c in sorted(engine.memory.claims.items())]

    @app.get("/claims/{claim_id}/evidence")
    def claim_evidence(claim_id: str):
        engine = host.require_engine()
        with host.lock:
            try:
                return engine.claim_detail(claim_id)
            except KeyError:
                raise error(404, "unknown_claim", f"no claim {claim_id}")

    @app.get("/queue")
    def queue():
        engine = host.require_engine()
        with host.lock:
            return {"items": [i.to_dict() for i in engine.open_items()]}

    @app.post("/queue/{item_id}/answer")
    def answer(item_id: str, body: AnswerBody):
        return host.answer(item_id, body)

    @app.post("/claims/{claim_id}/override")
    def override(claim_id: str, body: OverrideBody):
        return host.override(claim_id, body.value)

    @app.post("/claims/{claim_id}/lock")
    def lock(claim_id: str):
        return host.lock_claim(claim_id)

    @app.post("/verify")
    def verify():
        return host.start_verify()

    @app.get("/verify/status")
    def verify_status():
        return dict(host.verify_status)

    @app.get("/provenance")
    def provenance(from_seq: int = 1):
        engine = host.require_engine()
        with host.lock:
            return {"entries": [e.to_dict() for e in engine.memory.log
                                if e.seq >= from_seq]}

    @app.get("/metrics")
    def metrics():
        engine = host.require_engine()
        with host.lock:
            report = engine.metrics_report()
            truth = host.store.load_truth()
            if truth is not None:
                from .metrics import entity_accuracy, graph_edit_distance

                report.entity_acc = entity_accuracy(engine.memory.graph, truth)
                try:
                    report.ged_norm = graph_edit_distance(engine.memory.graph, truth)
                except ValueError:
                    report.ged_norm = None
            return report.to_dict()

    console = Path(console_dir) if console_dir else None
    if console and console.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=str(console), html=True),
                  name="console")

    return app


def serve(config: ServiceConfig, console_dir: str | None = None) -> None:
    import uvicorn

    app = create_app(config, console_dir)
    host, port = config.host_port
    uvicorn.run(app, host=host, port=port, log_level="warning")
