"""Orchestration: wires memory, agents, fusion, and arbitration into one
engine the CLI, service, and experiment harness all drive."""

from __future__ import annotations

from dataclasses import dataclass, field

from .agents import ProbeBudget, render_claim_text
from .arbitration import (
    AnswerMismatch,
    ArbitrationItem,
    ReverifyResult,
    UtilityWeights,
    apply_human_decision,
    build_queue,
    schedule_reverify,
)
from .claims import Claim, ClaimStatus, ClaimType
from .fusion import (
    DEFAULT_ROLE_WEIGHTS,
    FusionConfig,
    Outcome,
    RoundReport,
    refinement_loop,
)
from .graph import GraphState
from .memory import SemanticMemory
from .metrics import MetricReport, RunTrace, compute_metrics
from .synth import Ontology


@dataclass
class EngineConfig:
    fusion: FusionConfig = field(default_factory=FusionConfig)
    utility: UtilityWeights = field(default_factory=UtilityWeights)
    budget: ProbeBudget = field(default_factory=ProbeBudget)
    weights: dict = field(default_factory=lambda: {r: dict(v) for r, v in DEFAULT_ROLE_WEIGHTS.items()})


class Engine:
    """Single-writer supervisor loop over one semantic memory."""

    def __init__(self, memory: SemanticMemory, agents, ontology: Ontology,
                 config: EngineConfig | None = None):
        self.memory = memory
        self.agents = agents
        self.ontology = ontology
        self.config = config or EngineConfig()
        self.trace = RunTrace(keyframes=len(memory.graph.frames))
        self.queue: list[ArbitrationItem] = []
        self.round_reports: list[RoundReport] = []
        self._binary_rejected: set[str] = set()

    # -- shared lookups -------------------------------------------------------

    def ontology_lookup(self, claim: Claim) -> list[str]:
        return self.ontology.values_for(claim, self.memory.graph)

    def open_items(self) -> list[ArbitrationItem]:
        return [i for i in self.queue if i.status == "open"]

    def find_item(self, item_id: str) -> ArbitrationItem | None:
        for item in self.queue:
            if item.item_id == item_id:
                return item
        return None

    # -- verification ----------------------------------------------------------

    def run_refinement(self) -> list[RoundReport]:
        """Run the bounded loop, then gate surviving escalation candidates
        into the arbitration queue."""
        reports = refinement_loop(self.memory, self.agents, self.config.fusion,
                                  self.config.weights, self.config.budget,
                                  self.ontology_lookup, trace=self.trace)
        self.round_reports.extend(reports)
        if reports:
            self._gate_candidates(reports[-1].records)
        return reports

    def _gate_candidates(self, records: dict) -> None:
        self._expire_stale_items()
        open_claims = {i.claim_id for i in self.open_items()}
        candidates = {}
        for cid, rec in records.items():
            claim = self.memory.claims.get(cid)
            if claim is None or rec.outcome is not Outcome.ESCALATE:
                continue
            if claim.status not in (ClaimStatus.PENDING, ClaimStatus.CONTRADICTED):
                continue
            # Never re-ask an identical binary question the human already
            # rejected; a scored candidate is new information and may requeue.
            if cid in self._binary_rejected and not rec.candidates:
                continue
            candidates[cid] = rec
        items = build_queue(candidates, self.memory, self.config.utility)
        from .memory import Action, Actor, Edit

        for item in items:
            item.claim_text = render_claim_text(self.memory.claims[item.claim_id],
                                                self.memory.graph)
            if item.claim_id in open_claims:
                # Utility is recomputed whenever scores change: refresh in place.
                existing = next(i for i in self.open_items()
                                if i.claim_id == item.claim_id)
                existing.utility = item.utility
                existing.components = item.components
                existing.query = item.query
                continue
            self.memory.apply_edit(
                Edit(Action.ESCALATE, claim_id=item.claim_id,
                     belief=self.memory.claims[item.claim_id].belief or 0.5,
                     payload={"item_id": item.item_id, "utility": item.utility,
                              "components": item.components, "query": item.query}),
                Actor.ARBITRATION)
            self.queue.append(item)
        self.queue.sort(key=lambda i: (-i.utility, i.claim_id))
        self.trace.record_queue([i for i in items if i.claim_id not in open_claims])

    def _expire_stale_items(self) -> None:
        for item in self.open_items():
            claim = self.memory.claims.get(item.claim_id)
            if claim is None or claim.status not in (ClaimStatus.ESCALATED,):
                item.status = "expired"

    # -- arbitration -------------------------------------------------------------

    def answer(self, item_id: str, answer: dict) -> ReverifyResult:
        """Apply a human answer, then re-verify the dependency closure."""
        item = self.find_item(item_id)
        if item is None:
            raise AnswerMismatch(f"unknown queue item {item_id}")
        plan = apply_human_decision(self.memory, item, answer, self.config.budget)
        if answer.get("type") == "binary" and answer.get("value") == "reject":
            self._binary_rejected.add(item.claim_id)
        self.trace.record_answer(item, answer)
        round_no = self.trace.next_round_no()
        result = schedule_reverify(self.memory, plan, self.agents, self.config.fusion,
                                   self.config.weights, self.config.budget,
                                   self.ontology_lookup, round_no=round_no,
                                   trace=self.trace)
        if result.records:
            self._gate_candidates(result.records)
        else:
            self._expire_stale_items()
        return result

    def oracle_answer_all(self, truth: GraphState, max_steps: int = 1000) -> int:
        """Drain the queue with ground-truth decisions (simulated supervisor)."""
        steps = 0
        while steps < max_steps:
            open_items = self.open_items()
            if not open_items:
                break
            item = open_items[0]
            claim = self.memory.claims.get(item.claim_id)
            if claim is None or claim.status is not ClaimStatus.ESCALATED:
                item.status = "expired"
                continue
            self.answer(item.item_id, oracle_decision(item, claim, truth))
            steps += 1
        return steps

    # -- reads ---------------------------------------------------------------------

    def claim_detail(self, claim_id: str) -> dict:
        claim = self.memory.claims.get(claim_id)
        if claim is None:
            raise KeyError(claim_id)
        neighbors = sorted(self.memory.deps.neighbors(claim_id))
        history = [e.to_dict() for e in self.memory.log
                   if e.payload.get("claim_id") == claim_id]
        return {
            "claim": claim.to_dict(),
            "claim_text": render_claim_text(claim, self.memory.graph),
            "evidence": self.trace.evidence_by_claim.get(claim_id, []),
            "belief": claim.belief,
            "dependency_neighbors": neighbors,
            "provenance": history[-20:],
        }

    def metrics_report(self) -> MetricReport:
        return compute_metrics(self.trace, self.memory)


def oracle_decision(item: ArbitrationItem, claim: Claim, truth: GraphState) -> dict:
    """What a ground-truth supervisor answers for one queue item."""
    true_value = _true_value(claim, truth)
    if item.query["type"] == "candidate_select":
        options = item.query.get("options", [])
        if true_value is not None and true_value in options:
            return {"type": "candidate_select", "value": true_value}
        if claim.asserted_value in options:
            return {"type": "candidate_select", "value": claim.asserted_value}
        return {"type": "candidate_select", "value": options[0]}
    correct = true_value is not None and true_value == claim.asserted_value
    if claim.claim_type is ClaimType.EXIST:
        correct = claim.target.ref_id in truth.entities
    return {"type": "binary", "value": "confirm" if correct else "reject"}


def _true_value(claim: Claim, truth: GraphState) -> str | None:
    if claim.claim_type is ClaimType.EXIST:
        return None
    if claim.claim_type is ClaimType.LABEL:
        ent = truth.entities.get(claim.target.ref_id)
        return ent.canonical_label if ent else None
    if claim.claim_type is ClaimType.ATTR:
        attr = truth.attributes.get(claim.target.ref_id)
        return attr.attribute_value if attr else None
    rel = truth.relations.get(claim.target.ref_id)
    return rel.predicate if rel else None
