"""Role-aware evidence fusion, belief update, constrained correction, and the
bounded refinement loop that drives automated decisions."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .agents import EvidenceTuple, ProbeBudget, RoundProbeResult, default_probe_targets, run_round
from .claims import Claim, ClaimStatus, ClaimType
from .memory import Action, Actor, Edit, SemanticMemory

# Calibrated role-reliability weights over (exist, label, attr, rel).
# Caption-level audit gets zero weight on label identity.
DEFAULT_ROLE_WEIGHTS: dict[str, dict[str, float]] = {
    Actor.LOCAL_GROUNDING.value: {"exist": 1.00, "label": 1.00, "attr": 0.90, "rel": 1.00},
    Actor.TEMPORAL_CONSISTENCY.value: {"exist": 0.80, "label": 0.80, "attr": 0.70, "rel": 0.80},
    Actor.GLOBAL_AUDIT.value: {"exist": 0.70, "label": 0.00, "attr": 0.60, "rel": 0.70},
}


def uniform_role_weights(value: float = 1.0) -> dict[str, dict[str, float]]:
    return {role: {ct: value for ct in ("exist", "label", "attr", "rel")}
            for role in DEFAULT_ROLE_WEIGHTS}


def validate_weights(weights: dict[str, dict[str, float]]) -> None:
    for role, row in weights.items():
        for ct, w in row.items():
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"weight {role}/{ct}={w} outside [0,1]")


def role_weight(weights: dict[str, dict[str, float]], role: str, claim_type: ClaimType) -> float:
    return weights[role][claim_type.value]


@dataclass
class DirectionalScores:
    s_plus: float = 0.0
    s_minus: float = 0.0
    s_zero: float = 0.0

    def to_dict(self) -> dict:
        return {"s_plus": self.s_plus, "s_minus": self.s_minus, "s_zero": self.s_zero}


@dataclass
class FusionConfig:
    epsilon: float = 0.01
    revision_threshold: float = 0.6
    accept_belief: float = 0.8
    reject_belief: float = 0.2
    rounds_max: int = 2

    def validate(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if not 0 < self.reject_belief < self.accept_belief < 1:
            raise ValueError("need 0 < reject_belief < accept_belief < 1")
        if not 0 < self.revision_threshold <= 1:
            raise ValueError("revision_threshold must be in (0, 1]")
        if self.rounds_max < 1:
            raise ValueError("rounds_max must be >= 1")


def aggregate(evidence: list[EvidenceTuple], claim_type: ClaimType,
              weights: dict[str, dict[str, float]]) -> DirectionalScores:
    """Weighted directional masses: support, contradiction, abstention."""
    scores = DirectionalScores()
    for ev in evidence:
        w = role_weight(weights, ev.role, claim_type) * ev.confidence
        if ev.verdict == 1:
            scores.s_plus += w
        elif ev.verdict == -1:
            scores.s_minus += w
        else:
            scores.s_zero += w
    return scores


def belief(scores: DirectionalScores, epsilon: float) -> float:
    """Smoothed support ratio; abstention widens the deferral region only."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    return (epsilon + scores.s_plus) / (epsilon * 2 + scores.s_plus + scores.s_minus)


def score_candidates(evidence: list[EvidenceTuple], claim: Claim,
                     ontology: list[str],
                     weights: dict[str, dict[str, float]]) -> dict[str, float]:
    """Weighted vote mass per proposed ontology-valid replacement value."""
    valid = set(ontology)
    q: dict[str, float] = {}
    for ev in evidence:
        if ev.candidate is None or ev.candidate not in valid:
            continue
        w = role_weight(weights, ev.role, claim.claim_type) * ev.confidence
        if w == 0.0:
            continue  # zero-mass proposals must not register as candidates
        q[ev.candidate] = q.get(ev.candidate, 0.0) + w
    return q


def select_correction(q: dict[str, float], current_value: str, current_support: float,
                      threshold: float) -> str | None:
    """Pick argmax candidate; accept only if it strictly beats both the
    revision threshold and the current value's score. Ties break
    lexicographically; returns None to keep the current value."""
    if not q:
        return None
    best = min((o for o in q), key=lambda o: (-q[o], o))
    current_score = q.get(current_value, 0.0) + current_support
    if q[best] > threshold and q[best] > current_score and best != current_value:
        return best
    return None


class Outcome(str, Enum):
    ACCEPT = "accept"
    REWRITE = "rewrite"
    ESCALATE = "escalate_candidate"


def classify_outcome(p: float, correction: str | None, config: FusionConfig) -> Outcome:
    if p >= config.accept_belief:
        return Outcome.ACCEPT
    if p <= config.reject_belief and correction is not None:
        return Outcome.REWRITE
    return Outcome.ESCALATE


@dataclass
class FusionRecord:
    claim_id: str
    claim_type: str
    scores: DirectionalScores
    belief: float
    outcome: Outcome
    correction: str | None
    candidates: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "claim_type": self.claim_type,
            **self.scores.to_dict(),
            "belief": self.belief,
            "outcome": self.outcome.value,
            "correction": self.correction,
            "candidates": dict(sorted(self.candidates.items())),
        }


@dataclass
class RoundReport:
    round_no: int
    records: dict[str, FusionRecord]
    calls: int
    invalid_count: int
    changed_claims: list[str]
    probed_claims: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "round": self.round_no,
            "calls": self.calls,
            "invalid_count": self.invalid_count,
            "changed_claims": list(self.changed_claims),
            "probed_claims": list(self.probed_claims),
            "claims": {cid: r.to_dict() for cid, r in sorted(self.records.items())},
        }


def record_evidence_flags(memory: SemanticMemory, probe_result: RoundProbeResult) -> None:
    """Append every real probe outcome to provenance as a verifier flag."""
    for tuples in probe_result.evidence.values():
        for ev in tuples:
            if ev.probed:
                memory.apply_edit(
                    Edit(Action.FLAG, claim_id=ev.claim_id,
                         payload={"kind": "evidence", "evidence": ev.to_dict()}),
                    Actor(ev.role))
    for inv in probe_result.invalid:
        memory.apply_edit(
            Edit(Action.FLAG, claim_id=inv.claim_id,
                 payload={"kind": "invalid_probe", "probe": inv.to_dict()}),
            Actor(inv.role))


def fuse_and_decide(memory: SemanticMemory, probe_result: RoundProbeResult,
                    config: FusionConfig, weights: dict[str, dict[str, float]],
                    ontology_lookup, round_no: int,
                    writable: bool = True) -> dict[str, FusionRecord]:
    """Aggregate evidence per claim, classify, and write arbitration decisions.

    Escalation candidates are not status-escalated here: the utility gate in
    the arbitration module decides admission after the loop finishes.
    """
    records: dict[str, FusionRecord] = {}
    for cid in probe_result.probed_claims:
        claim = memory.claims.get(cid)
        if claim is None:
            continue
        evidence = probe_result.evidence.get(cid, [])
        scores = aggregate(evidence, claim.claim_type, weights)
        p = belief(scores, config.epsilon)
        q = score_candidates(evidence, claim, ontology_lookup(claim), weights)
        correction = None
        if p <= config.reject_belief:
            correction = select_correction(q, claim.asserted_value, scores.s_plus,
                                           config.revision_threshold)
        outcome = classify_outcome(p, correction, config)
        records[cid] = FusionRecord(cid, claim.claim_type.value, scores, p, outcome,
                                    correction, q)
        if not writable or claim.status in (ClaimStatus.LOCKED, ClaimStatus.HUMAN_RESOLVED):
            continue
        if outcome is Outcome.ACCEPT:
            memory.apply_edit(Edit(Action.ACCEPT, claim_id=cid, belief=p),
                              Actor.ARBITRATION)
        elif outcome is Outcome.REWRITE:
            memory.apply_edit(Edit(Action.REWRITE, claim_id=cid, value=correction,
                                   belief=p, payload={"prior_value": claim.asserted_value}),
                              Actor.ARBITRATION)
        else:
            new_status = (ClaimStatus.CONTRADICTED if p <= config.reject_belief
                          else claim.status)
            memory.apply_edit(Edit(Action.FLAG, claim_id=cid, belief=p,
                                   status=new_status,
                                   payload={"kind": "assessment"}),
                              Actor.ARBITRATION)
    return records


def refinement_loop(memory: SemanticMemory, agents, config: FusionConfig,
                    weights: dict[str, dict[str, float]], budget: ProbeBudget,
                    ontology_lookup, trace=None) -> list[RoundReport]:
    """Run up to rounds_max probe/fuse/decide rounds over unresolved claims,
    stopping early once a round leaves every claim's status unchanged."""
    config.validate()
    validate_weights(weights)
    budget.validate()
    reports: list[RoundReport] = []
    for round_no in range(1, config.rounds_max + 1):
        targets = default_probe_targets(memory)
        if not targets:
            break
        statuses_before = {cid: memory.claims[cid].status for cid in memory.claims}
        probe_result = run_round(agents, memory, targets, budget, round_no)
        record_evidence_flags(memory, probe_result)
        records = fuse_and_decide(memory, probe_result, config, weights,
                                  ontology_lookup, round_no)
        changed = [cid for cid, before in statuses_before.items()
                   if cid in memory.claims and memory.claims[cid].status != before]
        report = RoundReport(round_no, records, probe_result.calls,
                             len(probe_result.invalid), changed,
                             probed_claims=probe_result.probed_claims)
        reports.append(report)
        if trace is not None:
            trace.record_round(report, probe_result)
        if not changed:
            break
    return reports
