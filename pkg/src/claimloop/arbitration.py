"""Human arbitration: utility-ranked escalation queue, structured answers,
and dependency-closure re-verification with call accounting."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .agents import ProbeBudget, probe_call_cost, run_round
from .claims import Claim, ClaimStatus, ClaimType
from .fusion import (
    DirectionalScores,
    FusionConfig,
    FusionRecord,
    Outcome,
    record_evidence_flags,
    fuse_and_decide,
)
from .memory import Action, Actor, Edit, MemoryError_, SemanticMemory

_item_counter = itertools.count(1)


@dataclass
class UtilityWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    # Calibrated on the synthetic dev harness: the three components sum to
    # ~[0, 4], and a lower gate saturates under realistic abstention mass.
    theta_u: float = 1.0
    impact_norm: bool = True
    gate_direction: str = "ge"  # "ge": escalate when u >= theta_u; "lt": literal inverse

    def validate(self) -> None:
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("utility weights must be nonnegative")
        if self.alpha + self.beta + self.gamma <= 0:
            raise ValueError("at least one utility weight must be positive")
        if self.gate_direction not in ("ge", "lt"):
            raise ValueError("gate_direction must be 'ge' or 'lt'")


def utility(scores: DirectionalScores, out_degree: int, max_out_degree: int,
            w: UtilityWeights) -> tuple[float, dict]:
    """u = alpha*abstention + beta*min(support, contradiction) + gamma*impact."""
    unc = scores.s_zero
    conflict = min(scores.s_plus, scores.s_minus)
    if w.impact_norm:
        impact = out_degree / max_out_degree if max_out_degree > 0 else 0.0
    else:
        impact = float(out_degree)
    u = w.alpha * unc + w.beta * conflict + w.gamma * impact
    return u, {"unc": unc, "conflict": conflict, "impact": impact}


def passes_gate(u: float, w: UtilityWeights) -> bool:
    return u >= w.theta_u if w.gate_direction == "ge" else u < w.theta_u


@dataclass
class ArbitrationItem:
    item_id: str
    claim_id: str
    utility: float
    components: dict
    query: dict  # {"type": "binary"} | {"type": "candidate_select", "options": [...]}
    status: str = "open"  # open | answered | expired
    claim_text: str = ""

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "claim_id": self.claim_id,
            "utility": self.utility,
            "components": dict(self.components),
            "query": dict(self.query),
            "status": self.status,
            "claim_text": self.claim_text,
        }


def build_queue(candidates: dict[str, FusionRecord], memory: SemanticMemory,
                w: UtilityWeights) -> list[ArbitrationItem]:
    """Gate escalation candidates on utility and rank them for the human.

    Query type is candidate selection when scored candidates exist, binary
    confirm/reject otherwise. Ties break on claim_id for reproducibility.
    """
    w.validate()
    max_out = memory.deps.max_out_degree()
    admitted: list[ArbitrationItem] = []
    for cid in sorted(candidates):
        rec = candidates[cid]
        claim = memory.claims.get(cid)
        if claim is None or claim.status in (ClaimStatus.LOCKED, ClaimStatus.HUMAN_RESOLVED):
            continue
        u, components = utility(rec.scores, memory.deps.out_degree(cid), max_out, w)
        if not passes_gate(u, w):
            continue
        if rec.candidates:
            options = sorted(rec.candidates, key=lambda o: (-rec.candidates[o], o))
            if claim.asserted_value not in options:
                options.append(claim.asserted_value)
            query = {"type": "candidate_select", "options": options}
        else:
            query = {"type": "binary"}
        admitted.append(ArbitrationItem(
            item_id=f"q{next(_item_counter)}", claim_id=cid, utility=u,
            components=components, query=query))
    admitted.sort(key=lambda item: (-item.utility, item.claim_id))
    return admitted


@dataclass
class ReverifyPlan:
    edited: set[str]
    closure: set[str]
    probe_plan: dict[str, list[str]]
    calls_planned: int
    calls_full_baseline: int

    def to_dict(self) -> dict:
        return {
            "edited": sorted(self.edited),
            "closure": sorted(self.closure),
            "probe_plan": {c: list(r) for c, r in sorted(self.probe_plan.items())},
            "calls_planned": self.calls_planned,
            "calls_full_baseline": self.calls_full_baseline,
        }


def _probe_plan_for(memory: SemanticMemory, claim_ids, budget: ProbeBudget):
    """In-scope roles and call cost for re-probing the given claims."""
    from .agents import ROLE_ORDER, claim_in_scope

    plan: dict[str, list[str]] = {}
    calls = 0
    for cid in sorted(claim_ids):
        claim = memory.claims.get(cid)
        if claim is None or claim.status is ClaimStatus.LOCKED:
            continue
        roles = [r.value for r in ROLE_ORDER if claim_in_scope(r, claim)]
        plan[cid] = roles
        calls += sum(probe_call_cost(Actor(r), claim, memory.graph, budget) for r in roles)
    return plan, calls


def full_baseline_calls(memory: SemanticMemory, budget: ProbeBudget) -> int:
    """Cost of naively re-probing every live, unlocked claim."""
    _, calls = _probe_plan_for(memory, list(memory.claims), budget)
    return calls


def make_reverify_plan(memory: SemanticMemory, edited: set[str],
                       budget: ProbeBudget) -> ReverifyPlan:
    closure = memory.dependency_closure(edited) if edited else set()
    plan, calls = _probe_plan_for(memory, closure, budget)
    return ReverifyPlan(edited=set(edited), closure=closure, probe_plan=plan,
                        calls_planned=calls,
                        calls_full_baseline=full_baseline_calls(memory, budget))


class AnswerMismatch(ValueError):
    """Answer shape does not match the item's query type; item stays open."""


def apply_human_decision(memory: SemanticMemory, item: ArbitrationItem,
                         answer: dict, budget: ProbeBudget) -> ReverifyPlan:
    """Apply one structured human answer as a single authority-checked edit.

    Returns the re-verification plan over the edit set (empty on confirm).
    """
    if item.status != "open":
        raise AnswerMismatch(f"item {item.item_id} is {item.status}")
    claim = memory.claims.get(item.claim_id)
    if claim is None:
        item.status = "expired"
        raise MemoryError_(f"claim {item.claim_id} no longer exists")

    qtype = item.query["type"]
    atype = answer.get("type")
    value = answer.get("value")
    if atype != qtype:
        raise AnswerMismatch(f"query is {qtype}, answer is {atype}")
    if qtype == "binary":
        if value not in ("confirm", "reject"):
            raise AnswerMismatch(f"binary answer must be confirm/reject, got {value!r}")
    else:
        if value not in item.query.get("options", []):
            raise AnswerMismatch(f"{value!r} is not among the offered candidates")

    if qtype == "binary" and value == "confirm":
        memory.apply_edit(Edit(Action.HUMAN_ANSWER, claim_id=claim.claim_id,
                               payload={"item_id": item.item_id,
                                        "effect": {"kind": "confirm"}}),
                          Actor.HUMAN)
        item.status = "answered"
        return make_reverify_plan(memory, set(), budget)

    if qtype == "binary":  # reject
        edited = {claim.claim_id}
        effect: dict = {"kind": "reject"}
        if claim.claim_type is ClaimType.EXIST:
            eid = claim.target.ref_id
            retired = [c.claim_id for c in memory.claims.values()
                       if c.claim_id != claim.claim_id
                       and eid in c.entity_scope(memory.graph)]
            effect["retired_claims"] = sorted(retired)
            edited |= set(retired)
        closure_pre = memory.dependency_closure(edited)
        memory.apply_edit(Edit(Action.HUMAN_ANSWER, claim_id=claim.claim_id,
                               payload={"item_id": item.item_id, "effect": effect}),
                          Actor.HUMAN)
        item.status = "answered"
        survivors = {c for c in closure_pre if c in memory.claims}
        plan, calls = _probe_plan_for(memory, survivors, budget)
        return ReverifyPlan(edited=edited, closure=survivors, probe_plan=plan,
                            calls_planned=calls,
                            calls_full_baseline=full_baseline_calls(memory, budget))

    # candidate_select: rewrite to the chosen value
    memory.apply_edit(Edit(Action.HUMAN_ANSWER, claim_id=claim.claim_id,
                           payload={"item_id": item.item_id,
                                    "effect": {"kind": "select", "value": value},
                                    "prior_value": claim.asserted_value}),
                      Actor.HUMAN)
    item.status = "answered"
    return make_reverify_plan(memory, {claim.claim_id}, budget)


@dataclass
class ReverifyResult:
    plan: ReverifyPlan
    records: dict[str, FusionRecord] = field(default_factory=dict)
    calls_actual: int = 0
    calls_full: int = 0
    invalid_count: int = 0
    probed_claims: list[str] = field(default_factory=list)
    eligible_claims: int = 0  # live unlocked claims at schedule time


def schedule_reverify(memory: SemanticMemory, plan: ReverifyPlan, agents,
                      config: FusionConfig, weights, budget: ProbeBudget,
                      ontology_lookup, round_no: int = 0,
                      trace=None) -> ReverifyResult:
    """Re-probe exactly the dependency closure (minus locked claims), re-fuse,
    and re-classify. Human-resolved claims are probed but never re-classified.
    """
    result = ReverifyResult(plan=plan, calls_full=plan.calls_full_baseline,
                            eligible_claims=sum(
                                1 for c in memory.claims.values()
                                if c.status is not ClaimStatus.LOCKED))
    if not plan.closure:
        if trace is not None:
            trace.record_reverify(result, probe_result=None, round_no=round_no)
        return result
    probe_result = run_round(agents, memory, sorted(plan.closure), budget, round_no,
                             skip_statuses=frozenset({ClaimStatus.LOCKED}))
    record_evidence_flags(memory, probe_result)
    records = fuse_and_decide(memory, probe_result, config, weights,
                              ontology_lookup, round_no)
    result.records = records
    result.calls_actual = probe_result.calls
    result.invalid_count = len(probe_result.invalid)
    result.probed_claims = probe_result.probed_claims
    if trace is not None:
        trace.record_reverify(result, probe_result=probe_result, round_no=round_no)
    return result
