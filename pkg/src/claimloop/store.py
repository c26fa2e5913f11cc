"""On-disk layout for one memory: version-0 snapshot plus append-only
provenance, with engine state (trace, queue) alongside for crash recovery."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .agents import ExternalAgent, OracleConfig, make_oracle_agents, ROLE_ORDER
from .arbitration import ArbitrationItem
from .config import ServiceConfig
from .engine import Engine, EngineConfig
from .claims import ClaimStatus
from .graph import GraphState
from .memory import SemanticMemory, load_provenance, replay, snapshot_to_state
from .metrics import RunTrace
from .synth import Ontology

SNAPSHOT_FILE = "snapshot_v0.json"
PROVENANCE_FILE = "provenance.jsonl"
ONTOLOGY_FILE = "ontology.json"
TRUTH_FILE = "truth.json"
TRACE_FILE = "trace.json"
QUEUE_FILE = "queue.json"
HEAD_FILE = "state_head.json"


def state_fingerprint(snapshot: dict) -> str:
    return hashlib.sha256(
        json.dumps(snapshot, sort_keys=True).encode("utf-8")).hexdigest()


class DataStore:
    """Persistence for a single memory instance under one directory."""

    def __init__(self, data_dir):
        self.dir = Path(data_dir)

    def path(self, name: str) -> Path:
        return self.dir / name

    def exists(self) -> bool:
        return self.path(SNAPSHOT_FILE).exists()

    # -- writes ----------------------------------------------------------------

    def save_initial(self, memory: SemanticMemory, ontology: Ontology,
                     truth: GraphState | None = None) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        with open(self.path(SNAPSHOT_FILE), "w", encoding="utf-8") as fh:
            json.dump(memory.initial_snapshot, fh, indent=2, sort_keys=True)
        with open(self.path(ONTOLOGY_FILE), "w", encoding="utf-8") as fh:
            json.dump(ontology.to_dict(), fh, indent=2, sort_keys=True)
        if truth is not None:
            with open(self.path(TRUTH_FILE), "w", encoding="utf-8") as fh:
                json.dump(truth.to_dict(), fh, indent=2, sort_keys=True)
        with open(self.path(PROVENANCE_FILE), "w", encoding="utf-8") as fh:
            for entry in memory.log:
                fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")

    def sync(self, engine: Engine) -> None:
        """Append provenance entries past the persisted tail, refresh engine state."""
        log_path = self.path(PROVENANCE_FILE)
        persisted = 0
        if log_path.exists():
            with open(log_path, encoding="utf-8") as fh:
                persisted = sum(1 for line in fh if line.strip())
        with open(log_path, "a", encoding="utf-8") as fh:
            for entry in engine.memory.log[persisted:]:
                fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")
        with open(self.path(TRACE_FILE), "w", encoding="utf-8") as fh:
            json.dump(engine.trace.to_dict(), fh, sort_keys=True)
        with open(self.path(QUEUE_FILE), "w", encoding="utf-8") as fh:
            json.dump({"items": [i.to_dict() for i in engine.queue],
                       "binary_rejected": sorted(engine._binary_rejected)},
                      fh, sort_keys=True)
        snapshot = engine.memory.snapshot_dict()
        with open(self.path(HEAD_FILE), "w", encoding="utf-8") as fh:
            json.dump({"version": snapshot["version"],
                       "fingerprint": state_fingerprint(snapshot)}, fh)

    def audit_replay(self) -> dict:
        """Replay the log and compare against the recorded live-state head."""
        memory = self.load_memory()
        snapshot = memory.snapshot_dict()
        result = {"version": snapshot["version"], "entries": len(memory.log),
                  "fingerprint": state_fingerprint(snapshot), "head": None,
                  "matches_head": None}
        if self.path(HEAD_FILE).exists():
            with open(self.path(HEAD_FILE), encoding="utf-8") as fh:
                head = json.load(fh)
            result["head"] = head
            result["matches_head"] = (head.get("fingerprint") == result["fingerprint"]
                                      and head.get("version") == result["version"])
        return result

    # -- reads ------------------------------------------------------------------

    def load_memory(self) -> SemanticMemory:
        if not self.exists():
            raise FileNotFoundError(f"no memory under {self.dir} (run ingest first)")
        with open(self.path(SNAPSHOT_FILE), encoding="utf-8") as fh:
            snapshot = json.load(fh)
        entries = []
        if self.path(PROVENANCE_FILE).exists():
            entries = load_provenance(self.path(PROVENANCE_FILE))
        return replay(snapshot, entries)

    def load_ontology(self) -> Ontology:
        if self.path(ONTOLOGY_FILE).exists():
            with open(self.path(ONTOLOGY_FILE), encoding="utf-8") as fh:
                return Ontology.from_dict(json.load(fh))
        return Ontology()

    def load_truth(self) -> GraphState | None:
        if self.path(TRUTH_FILE).exists():
            with open(self.path(TRUTH_FILE), encoding="utf-8") as fh:
                return GraphState.from_dict(json.load(fh))
        return None

    def build_engine(self, config: ServiceConfig, require_agents: bool = False) -> Engine:
        memory = self.load_memory()
        ontology = self.load_ontology()
        agents = self.build_agents(config, ontology)
        if agents is None and require_agents:
            raise FileNotFoundError(
                f"oracle backend needs {TRUTH_FILE} in {self.dir}; "
                "ingest with --truth or configure an external backend")
        engine_config = EngineConfig(fusion=config.fusion, utility=config.utility,
                                     budget=config.budget)
        engine = Engine(memory, agents, ontology, engine_config)
        if self.path(TRACE_FILE).exists():
            with open(self.path(TRACE_FILE), encoding="utf-8") as fh:
                engine.trace = RunTrace.from_dict(json.load(fh))
        if self.path(QUEUE_FILE).exists():
            with open(self.path(QUEUE_FILE), encoding="utf-8") as fh:
                saved = json.load(fh)
            for item_dict in saved.get("items", []):
                item = ArbitrationItem(**item_dict)
                claim = memory.claims.get(item.claim_id)
                if item.status == "open" and (
                        claim is None or claim.status is not ClaimStatus.ESCALATED):
                    item.status = "expired"
                engine.queue.append(item)
            engine._binary_rejected = set(saved.get("binary_rejected", []))
        return engine

    def build_agents(self, config: ServiceConfig, ontology: Ontology):
        if config.backend == "external":
            def lookup(claim):
                return ontology.values_for(claim)

            return [ExternalAgent(role, config.adapter.endpoint, lookup,
                                  timeout=config.adapter.timeout_s,
                                  retries=config.adapter.retries)
                    for role in ROLE_ORDER]
        truth = self.load_truth()
        if truth is None:
            return None  # no backend available: verification paths must refuse
        noise = config.oracle
        return make_oracle_agents(OracleConfig(
            ground_truth=truth, flip_rate=noise.flip_rate,
            abstain_rate=noise.abstain_rate, invalid_rate=noise.invalid_rate,
            clutter_abstain_scale=noise.clutter_abstain_scale,
            rng_seed=noise.rng_seed, role_rates=noise.role_rates))
