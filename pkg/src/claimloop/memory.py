"""Versioned semantic memory: graph state, claims, dependencies, provenance.

All writes flow through `apply_edit`, which enforces the per-actor authority
contract, applies the state transition atomically, and appends one provenance
entry. Evidence flags never change state (version stays put); every state
change bumps the version by exactly 1. The provenance log is append-only:
rollback appends a compensating entry instead of truncating history, and
`replay` rebuilds any version from the initial snapshot plus the log.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from .claims import (
    Claim,
    ClaimStatus,
    ClaimType,
    DependencyGraph,
    PROTECTED_STATUSES,
    claims_from_dicts,
    claims_to_dicts,
)
from .graph import GraphState


class Actor(str, Enum):
    CONSTRUCTOR = "constructor"
    LOCAL_GROUNDING = "local_grounding"
    TEMPORAL_CONSISTENCY = "temporal_consistency"
    GLOBAL_AUDIT = "global_audit"
    ARBITRATION = "arbitration"
    HUMAN = "human"


class Action(str, Enum):
    INIT = "init"
    FLAG = "flag"
    ACCEPT = "accept"
    REWRITE = "rewrite"
    ESCALATE = "escalate"
    HUMAN_ANSWER = "human_answer"
    OVERRIDE = "override"
    LOCK = "lock"
    ROLLBACK = "rollback"


VERIFIER_ACTORS = frozenset(
    {Actor.LOCAL_GROUNDING, Actor.TEMPORAL_CONSISTENCY, Actor.GLOBAL_AUDIT}
)

# The authority contract: which actions each actor may ever apply.
AUTHORITY: dict[Actor, frozenset[Action]] = {
    Actor.CONSTRUCTOR: frozenset({Action.INIT}),
    Actor.LOCAL_GROUNDING: frozenset({Action.FLAG}),
    Actor.TEMPORAL_CONSISTENCY: frozenset({Action.FLAG}),
    Actor.GLOBAL_AUDIT: frozenset({Action.FLAG}),
    Actor.ARBITRATION: frozenset({Action.FLAG, Action.ACCEPT, Action.REWRITE, Action.ESCALATE}),
    Actor.HUMAN: frozenset(Action),
}


class MemoryError_(ValueError):
    """Base class for memory contract violations."""


class AuthorityError(MemoryError_):
    """An actor attempted an action outside its contract; state unchanged."""


class ReplayError(MemoryError_):
    """The provenance log cannot be replayed (gap, unknown actor, bad entry)."""


def authorize(actor: Actor, action: Action) -> bool:
    return action in AUTHORITY[actor]


@dataclass
class Edit:
    """One requested write. Mutation fields are optional; which ones an
    action consumes is defined by the transition function below."""

    action: Action
    claim_id: str | None = None
    value: str | None = None
    status: ClaimStatus | None = None
    belief: float | None = None
    payload: dict = field(default_factory=dict)

    def mutates(self) -> bool:
        return self.value is not None or self.status is not None or self.belief is not None


@dataclass
class ProvenanceEntry:
    seq: int
    timestamp: str
    actor: str
    action: str
    payload: dict
    prior_version: int
    new_version: int

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "actor": self.actor,
            "action": self.action,
            "payload": self.payload,
            "prior_version": self.prior_version,
            "new_version": self.new_version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProvenanceEntry":
        return cls(d["seq"], d["timestamp"], d["actor"], d["action"],
                   d["payload"], d["prior_version"], d["new_version"])


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class SemanticMemory:
    """The four-tuple (graph, claims, dependencies, provenance) plus version."""

    def __init__(self, graph: GraphState, claims: dict[str, Claim], deps: DependencyGraph):
        self.graph = graph
        self.claims = claims
        self.deps = deps
        self.version = 0
        self.log: list[ProvenanceEntry] = []
        self._initial_snapshot: dict = {}

    # -- construction ------------------------------------------------------

    @classmethod
    def init_memory(cls, graph: GraphState, claims: dict[str, Claim],
                    deps: DependencyGraph) -> "SemanticMemory":
        graph.validate()
        for cid, claim in claims.items():
            if graph.element(claim.target.kind, claim.target.ref_id) is None:
                raise MemoryError_(f"claim {cid} targets missing {claim.target.kind} "
                                   f"{claim.target.ref_id}")
        for a, b in deps.edges:
            for end in (a, b):
                if end not in claims:
                    raise MemoryError_(f"dependency edge references unknown claim {end}")
        mem = cls(graph.copy(), copy.deepcopy(claims), deps.copy())
        mem.graph.version = 0
        mem._initial_snapshot = mem.snapshot_dict()
        mem._append(Actor.CONSTRUCTOR, Action.INIT,
                    {"entities": len(graph.entities), "relations": len(graph.relations),
                     "attributes": len(graph.attributes), "claims": len(claims)},
                    bump=False)
        return mem

    # -- provenance plumbing -------------------------------------------------

    def _append(self, actor: Actor, action: Action, payload: dict, bump: bool) -> ProvenanceEntry:
        prior = self.version
        if bump:
            self.version += 1
            self.graph.version = self.version
        entry = ProvenanceEntry(
            seq=len(self.log) + 1,
            timestamp=_now(),
            actor=actor.value,
            action=action.value,
            payload=payload,
            prior_version=prior,
            new_version=self.version,
        )
        self.log.append(entry)
        return entry

    def _log_violation(self, actor: Actor, edit: Edit, reason: str) -> None:
        # Meta entry recording a rejected write; appended by the memory itself.
        self._append(actor, Action.FLAG,
                     {"kind": "authority_violation", "attempted_action": edit.action.value,
                      "claim_id": edit.claim_id, "reason": reason},
                     bump=False)

    # -- the write path ------------------------------------------------------

    def apply_edit(self, edit: Edit, actor: Actor) -> int:
        """Authorize, apply atomically, append provenance; returns new version."""
        if not authorize(actor, edit.action):
            self._log_violation(actor, edit, f"{actor.value} may not {edit.action.value}")
            raise AuthorityError(f"{actor.value} may not {edit.action.value}")
        if edit.action is Action.INIT:
            self._log_violation(actor, edit, "memory already initialized")
            raise MemoryError_("init is only valid at construction time")

        claim = None
        if edit.claim_id is not None:
            claim = self.claims.get(edit.claim_id)
            if claim is None and edit.action is not Action.ROLLBACK:
                self._log_violation(actor, edit, f"unknown claim {edit.claim_id}")
                raise MemoryError_(f"unknown claim {edit.claim_id}")

        if claim is not None and actor is not Actor.HUMAN:
            if claim.status is ClaimStatus.LOCKED:
                self._log_violation(actor, edit, f"claim {edit.claim_id} is locked")
                raise AuthorityError(f"claim {edit.claim_id} is locked")
            if claim.status in PROTECTED_STATUSES and edit.action is not Action.FLAG:
                self._log_violation(actor, edit, f"claim {edit.claim_id} is human-resolved")
                raise AuthorityError(f"claim {edit.claim_id} is human-resolved")

        # Verifiers hold flag-only authority over *evidence*: any mutation
        # payload from a verifier is a contract violation.
        if actor in VERIFIER_ACTORS and edit.mutates():
            self._log_violation(actor, edit, "verifier flags may not mutate state")
            raise AuthorityError("verifier flags may not mutate state")

        if edit.action is Action.REWRITE and edit.value is None:
            self._log_violation(actor, edit, "rewrite requires a value")
            raise MemoryError_("rewrite requires a value")

        payload = self._build_payload(edit, actor)
        bump = not (edit.action is Action.FLAG and actor in VERIFIER_ACTORS
                    and not edit.mutates())
        entry = self._append(actor, edit.action, payload, bump=bump)
        try:
            _apply_entry(self.graph, self.claims, self.deps, entry,
                         self._state_lookup)
        except Exception:
            # Transition failed after validation: unwind the appended entry.
            self.log.pop()
            if bump:
                self.version -= 1
                self.graph.version = self.version
            raise
        return self.version

    def _build_payload(self, edit: Edit, actor: Actor) -> dict:
        payload = dict(edit.payload)
        payload["claim_id"] = edit.claim_id
        if edit.value is not None:
            payload["value"] = edit.value
        if edit.status is not None:
            payload["status"] = edit.status.value
        if edit.belief is not None:
            payload["belief"] = edit.belief
        return payload

    # -- convenience writes ----------------------------------------------------

    def lock_claim(self, claim_id: str, actor: Actor = Actor.HUMAN) -> int:
        return self.apply_edit(Edit(Action.LOCK, claim_id=claim_id), actor)

    def rollback(self, target_version: int, actor: Actor = Actor.HUMAN) -> int:
        if not 0 <= target_version <= self.version:
            raise MemoryError_(f"cannot roll back to future version {target_version}")
        return self.apply_edit(
            Edit(Action.ROLLBACK, payload={"target_version": target_version}), actor)

    # -- reads --------------------------------------------------------------

    def dependency_closure(self, edited: set[str]) -> set[str]:
        """Γ(Q): the edited claims plus their one-step dependency neighbors."""
        for cid in edited:
            if cid not in self.claims:
                raise MemoryError_(f"unknown claim {cid}")
        closure = set(edited)
        for cid in edited:
            closure |= self.deps.neighbors(cid)
        return {c for c in closure if c in self.claims}

    def snapshot_dict(self) -> dict:
        d = self.graph.to_dict()
        return {
            "version": self.version,
            "frames": d["frames"],
            "entities": d["entities"],
            "relations": d["relations"],
            "attributes": d["attributes"],
            "claims": claims_to_dicts(self.claims),
            "dependencies": self.deps.to_list(),
        }

    def state_at(self, version: int) -> dict:
        """Historical snapshot at `version`, rebuilt from the log."""
        if not 0 <= version <= self.version:
            raise MemoryError_(f"no version {version} (current {self.version})")
        prefix = [e for e in self.log if e.new_version <= version]
        return replay(self._initial_snapshot, prefix).snapshot_dict()

    @property
    def initial_snapshot(self) -> dict:
        return copy.deepcopy(self._initial_snapshot)

    def structural_equal(self, other: "SemanticMemory") -> bool:
        return self.snapshot_dict() == other.snapshot_dict()

    def _state_lookup(self, version: int) -> dict:
        return self.state_at(version)

    # -- persistence -----------------------------------------------------------

    def write_snapshot(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.snapshot_dict(), fh, indent=2, sort_keys=True)

    def write_provenance(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.log:
                fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")


def snapshot_to_state(snapshot: dict) -> tuple[GraphState, dict[str, Claim], DependencyGraph]:
    graph = GraphState.from_dict(snapshot)
    graph.version = snapshot.get("version", 0)
    claims = claims_from_dicts(snapshot.get("claims", []))
    deps = DependencyGraph.from_list(snapshot.get("dependencies", []))
    return graph, claims, deps


def load_provenance(path) -> list[ProvenanceEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                entries.append(ProvenanceEntry.from_dict(json.loads(line)))
    return entries


# -- the shared transition function -------------------------------------------
#
# Both the live write path and replay funnel through _apply_entry, so a
# replayed log reproduces the live state by construction.

def _set_claim_value(graph: GraphState, claim: Claim, value: str) -> None:
    el = graph.element(claim.target.kind, claim.target.ref_id)
    if el is None:
        raise MemoryError_(f"claim {claim.claim_id} target is gone")
    if claim.claim_type is ClaimType.LABEL:
        el.canonical_label = value
    elif claim.claim_type is ClaimType.ATTR:
        el.attribute_value = value
    elif claim.claim_type is ClaimType.REL:
        el.predicate = value
    else:
        raise MemoryError_(f"exist claim {claim.claim_id} has no rewritable value")
    claim.asserted_value = value


def _retire_claims(graph: GraphState, claims: dict[str, Claim],
                   deps: DependencyGraph, claim_ids) -> None:
    for cid in claim_ids:
        claims.pop(cid, None)
        deps.remove_claim(cid)


def _apply_entry(graph: GraphState, claims: dict[str, Claim], deps: DependencyGraph,
                 entry: ProvenanceEntry, state_lookup) -> None:
    action = Action(entry.action)
    payload = entry.payload
    cid = payload.get("claim_id")
    claim = claims.get(cid) if cid else None

    if action in (Action.INIT, Action.FLAG) and "status" not in payload \
            and "belief" not in payload and "value" not in payload:
        return  # evidence / violation / init records: no state change

    if action is Action.FLAG:
        # Arbitration assessment: belief and optional contradicted mark.
        if claim is None:
            raise MemoryError_(f"flag assessment on unknown claim {cid}")
        if "belief" in payload:
            claim.belief = payload["belief"]
        if "status" in payload:
            claim.status = ClaimStatus(payload["status"])
        return

    if action is Action.ACCEPT:
        claim.status = ClaimStatus.SUPPORTED
        if "belief" in payload:
            claim.belief = payload["belief"]
        return

    if action is Action.REWRITE:
        _set_claim_value(graph, claim, payload["value"])
        claim.status = ClaimStatus.REVISED
        if "belief" in payload:
            claim.belief = payload["belief"]
        return

    if action is Action.ESCALATE:
        claim.status = ClaimStatus.ESCALATED
        if "belief" in payload:
            claim.belief = payload["belief"]
        return

    if action is Action.LOCK:
        claim.status = ClaimStatus.LOCKED
        return

    if action is Action.OVERRIDE:
        if payload.get("value") is not None:
            _set_claim_value(graph, claim, payload["value"])
        claim.status = ClaimStatus.HUMAN_RESOLVED
        return

    if action is Action.HUMAN_ANSWER:
        effect = payload.get("effect", {})
        kind = effect.get("kind")
        if kind == "confirm":
            claim.status = ClaimStatus.HUMAN_RESOLVED
        elif kind == "select":
            _set_claim_value(graph, claim, effect["value"])
            claim.status = ClaimStatus.HUMAN_RESOLVED
        elif kind == "reject":
            if claim.claim_type is ClaimType.EXIST:
                graph.remove_entity(claim.target.ref_id)
                _retire_claims(graph, claims, deps, effect.get("retired_claims", []))
                claim.status = ClaimStatus.HUMAN_RESOLVED
            elif claim.claim_type is ClaimType.ATTR:
                graph.attributes.pop(claim.target.ref_id, None)
                claim.status = ClaimStatus.HUMAN_RESOLVED
            elif claim.claim_type is ClaimType.REL:
                graph.relations.pop(claim.target.ref_id, None)
                claim.status = ClaimStatus.HUMAN_RESOLVED
            else:  # label: mandatory value retained, stays in the automated pool
                claim.status = ClaimStatus.CONTRADICTED
        else:
            raise MemoryError_(f"unknown human answer effect {kind!r}")
        return

    if action is Action.ROLLBACK:
        target = payload["target_version"]
        snap = state_lookup(target)
        new_graph, new_claims, new_deps = snapshot_to_state(snap)
        graph.frames = new_graph.frames
        graph.entities = new_graph.entities
        graph.relations = new_graph.relations
        graph.attributes = new_graph.attributes
        claims.clear()
        claims.update(new_claims)
        deps.edges = new_deps.edges
        deps._out = new_deps._out
        deps._in = new_deps._in
        return

    raise MemoryError_(f"unhandled action {action}")


def replay(initial_snapshot: dict, entries: list[ProvenanceEntry]) -> SemanticMemory:
    """Rebuild a memory from its initial snapshot and a gapless log prefix."""
    graph, claims, deps = snapshot_to_state(initial_snapshot)
    mem = SemanticMemory(graph, claims, deps)
    mem.version = initial_snapshot.get("version", 0)
    mem.graph.version = mem.version
    mem._initial_snapshot = copy.deepcopy(initial_snapshot)

    snapshots: dict[int, dict] = {mem.version: mem.snapshot_dict()}
    valid_actors = {a.value for a in Actor}
    expected_seq = None
    for entry in entries:
        if expected_seq is not None and entry.seq != expected_seq:
            raise ReplayError(f"provenance gap at seq {entry.seq} (expected {expected_seq})")
        expected_seq = entry.seq + 1
        if entry.actor not in valid_actors:
            raise ReplayError(f"unknown actor {entry.actor!r} at seq {entry.seq}")
        if entry.prior_version != mem.version:
            raise ReplayError(f"version mismatch at seq {entry.seq}: "
                              f"entry prior={entry.prior_version}, state={mem.version}")
        _apply_entry(mem.graph, mem.claims, mem.deps, entry, snapshots.__getitem__)
        mem.version = entry.new_version
        mem.graph.version = mem.version
        mem.log.append(entry)
        if entry.new_version not in snapshots:
            snapshots[entry.new_version] = mem.snapshot_dict()
    return mem
