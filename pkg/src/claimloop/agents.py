"""Role-scoped verification agents.

Three roles share one contract: given an immutable memory snapshot and a
claim, return an evidence tuple (verdict, confidence, optional correction
candidate) or an invalid-probe marker. The simulated agents answer from a
ground-truth graph and corrupt their answers per configured rates; the
external adapter speaks the same contract over HTTP to a real backend.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field

from .claims import Claim, ClaimStatus, ClaimType, PROBEABLE_STATUSES
from .graph import GraphState
from .memory import Actor, SemanticMemory

logger = logging.getLogger(__name__)

ROLE_ORDER = (Actor.LOCAL_GROUNDING, Actor.TEMPORAL_CONSISTENCY, Actor.GLOBAL_AUDIT)


@dataclass
class EvidenceTuple:
    role: str
    verdict: int  # -1 contradict, 0 abstain, +1 support
    confidence: float
    claim_id: str
    round: int
    candidate: str | None = None
    probed: bool = True  # False for synthetic out-of-scope abstentions

    def to_dict(self) -> dict:
        return {
            "role": self.role,
            "verdict": self.verdict,
            "confidence": self.confidence,
            "claim_id": self.claim_id,
            "round": self.round,
            "candidate": self.candidate,
            "probed": self.probed,
        }


@dataclass
class InvalidProbe:
    claim_id: str
    role: str
    raw_payload: str

    def to_dict(self) -> dict:
        return {"claim_id": self.claim_id, "role": self.role, "raw_payload": self.raw_payload}


@dataclass
class ProbeBudget:
    single_turn_max: int = 5
    multi_turn_max: int = 2
    rounds_max: int = 2
    keyframes: int = 5

    def validate(self) -> None:
        for name in ("single_turn_max", "multi_turn_max", "rounds_max", "keyframes"):
            if getattr(self, name) < 1 and name != "multi_turn_max":
                raise ValueError(f"{name} must be >= 1")
        if self.multi_turn_max < 0:
            raise ValueError("multi_turn_max must be >= 0")


@dataclass
class OracleConfig:
    ground_truth: GraphState
    flip_rate: float = 0.0
    abstain_rate: float = 0.0
    invalid_rate: float = 0.0
    clutter_abstain_scale: float = 0.0  # extra abstention per co-occurring entity
    rng_seed: int = 0
    role_rates: dict[str, dict[str, float]] = field(default_factory=dict)

    def rates_for(self, role: str) -> tuple[float, float, float]:
        over = self.role_rates.get(role, {})
        flip = over.get("flip_rate", self.flip_rate)
        abstain = over.get("abstain_rate", self.abstain_rate)
        invalid = over.get("invalid_rate", self.invalid_rate)
        for r in (flip, abstain, invalid):
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"rate {r} outside [0,1]")
        if flip + abstain + invalid > 1.0 + 1e-12:
            raise ValueError("per-probe corruption rates sum above 1")
        return flip, abstain, invalid


def claim_in_scope(role: Actor, claim: Claim) -> bool:
    """Which claims each role can assess at all."""
    start, end = claim.temporal_extent
    if role is Actor.LOCAL_GROUNDING:
        if claim.claim_type is ClaimType.REL:
            return start == end  # frame-local relations only
        return True
    if role is Actor.TEMPORAL_CONSISTENCY:
        if claim.claim_type is ClaimType.REL:
            return True
        return claim.claim_type is ClaimType.ATTR and end > start  # persistent attrs
    if role is Actor.GLOBAL_AUDIT:
        return claim.claim_type is not ClaimType.LABEL
    raise ValueError(f"{role} is not a verifier role")


def probe_call_cost(role: Actor, claim: Claim, graph: GraphState, budget: ProbeBudget) -> int:
    """Model calls one probe consumes. Temporal probes follow up once per
    extra keyframe in the claim's extent, capped at the multi-turn budget."""
    if role is not Actor.TEMPORAL_CONSISTENCY:
        return 1
    el = graph.element(claim.target.kind, claim.target.ref_id)
    n_frames = len(el.frame_ids) if el is not None else 1
    return 1 + min(budget.multi_turn_max, max(0, n_frames - 1))


def out_of_scope_abstention(role: Actor, claim: Claim, round_no: int) -> EvidenceTuple:
    return EvidenceTuple(role=role.value, verdict=0, confidence=0.0,
                         claim_id=claim.claim_id, round=round_no, probed=False)


class OracleAgent:
    """Simulated verifier: answers from ground truth, then corrupts the answer."""

    def __init__(self, role: Actor, config: OracleConfig):
        if role not in ROLE_ORDER:
            raise ValueError(f"{role} is not a verifier role")
        self.role = role
        self.config = config

    def probe(self, snapshot: SemanticMemory, claim: Claim, round_no: int):
        if not claim_in_scope(self.role, claim):
            return out_of_scope_abstention(self.role, claim, round_no)
        verdict, candidate = self._honest_answer(snapshot.graph, claim)
        rng = random.Random(f"{self.config.rng_seed}|{round_no}|{self.role.value}|{claim.claim_id}")
        flip, abstain, invalid = self.config.rates_for(self.role.value)
        abstain = min(0.95, abstain * (1.0 + self.config.clutter_abstain_scale
                                       * self._clutter(snapshot.graph, claim)))
        u = rng.random()
        if u < invalid:
            return InvalidProbe(claim.claim_id, self.role.value,
                                raw_payload="<<unparseable response>>")
        if u < invalid + flip:
            return EvidenceTuple(self.role.value, -verdict, rng.uniform(0.4, 0.9),
                                 claim.claim_id, round_no, candidate=candidate)
        if u < invalid + flip + abstain:
            return EvidenceTuple(self.role.value, 0, rng.uniform(0.4, 0.9),
                                 claim.claim_id, round_no)
        return EvidenceTuple(self.role.value, verdict, 1.0, claim.claim_id, round_no,
                             candidate=candidate)

    def _clutter(self, graph: GraphState, claim: Claim) -> int:
        # Scene complexity seen by the backbone: distractor entities in the
        # keyframe bundle under verification.
        return max(0, len(graph.entities) - 1)

    def _honest_answer(self, graph: GraphState, claim: Claim) -> tuple[int, str | None]:
        """Compare the claim against ground truth (shared element-id space).
        Wrong values carry the true value as correction candidate."""
        truth = self.config.ground_truth
        if claim.claim_type is ClaimType.EXIST:
            return (1, None) if claim.target.ref_id in truth.entities else (-1, None)
        if claim.claim_type is ClaimType.LABEL:
            ent = truth.entities.get(claim.target.ref_id)
            if ent is None:
                return -1, None
            if ent.canonical_label == claim.asserted_value:
                return 1, None
            return -1, ent.canonical_label
        if claim.claim_type is ClaimType.ATTR:
            attr = truth.attributes.get(claim.target.ref_id)
            if attr is None:
                return -1, None
            if attr.attribute_value == claim.asserted_value:
                return 1, None
            return -1, attr.attribute_value
        rel = truth.relations.get(claim.target.ref_id)
        if rel is None:
            return -1, None
        if rel.predicate == claim.asserted_value:
            return 1, None
        return -1, rel.predicate


def render_claim_text(claim: Claim, graph: GraphState) -> str:
    el = graph.element(claim.target.kind, claim.target.ref_id)
    span = f"frames {claim.temporal_extent[0]}-{claim.temporal_extent[1]}"
    if claim.claim_type is ClaimType.EXIST:
        label = el.canonical_label if el else "?"
        return f"entity {claim.target.ref_id} ({label}) is present in {span}"
    if claim.claim_type is ClaimType.LABEL:
        return f"entity {claim.target.ref_id} has label '{claim.asserted_value}' in {span}"
    if claim.claim_type is ClaimType.ATTR:
        key = el.attribute_key if el else "?"
        owner = el.entity_id if el else "?"
        return f"entity {owner} has {key}='{claim.asserted_value}' in {span}"
    subj = el.subject if el else "?"
    obj = el.object if el else "?"
    return f"{subj} {claim.asserted_value} {obj} in {span}"


class ExternalAgent:
    """Adapter to a remote evidence backend speaking the wire protocol."""

    def __init__(self, role: Actor, endpoint: str, ontology_lookup,
                 timeout: float = 10.0, retries: int = 1, session=None):
        self.role = role
        self.endpoint = endpoint
        self.ontology_lookup = ontology_lookup  # claim -> list of candidate values
        self.timeout = timeout
        self.retries = retries
        self._session = session

    def probe(self, snapshot: SemanticMemory, claim: Claim, round_no: int):
        if not claim_in_scope(self.role, claim):
            return out_of_scope_abstention(self.role, claim, round_no)
        request = external_adapter_request(claim, snapshot, self.role, self.ontology_lookup(claim))
        body = self._post(request)
        if body is None:
            return InvalidProbe(claim.claim_id, self.role.value, raw_payload="<<transport failure>>")
        return external_adapter_parse(body, claim.claim_id, self.role.value, round_no)

    def _post(self, request: dict):
        import requests

        session = self._session or requests
        for _ in range(self.retries + 1):
            try:
                resp = session.post(self.endpoint, json=request, timeout=self.timeout)
                return resp.text
            except Exception as exc:  # noqa: BLE001 - any transport failure retries once
                logger.warning("adapter transport failure for %s: %s", request["claim_id"], exc)
        return None


def external_adapter_request(claim: Claim, snapshot: SemanticMemory, role: Actor,
                             ontology: list[str]) -> dict:
    return {
        "role": role.value,
        "claim_id": claim.claim_id,
        "claim_type": claim.claim_type.value,
        "claim_text": render_claim_text(claim, snapshot.graph),
        "asserted_value": claim.asserted_value,
        "frame_ids": list(range(claim.temporal_extent[0], claim.temporal_extent[1] + 1)),
        "ontology": list(ontology),
    }


def external_adapter_parse(raw: str, claim_id: str, role: str, round_no: int):
    """Parse a backend response into an evidence tuple; anything that does not
    conform yields an InvalidProbe, never an exception."""
    try:
        body = json.loads(raw)
    except (json.JSONDecodeError, TypeError):
        return InvalidProbe(claim_id, role, raw_payload=str(raw)[:500])
    if not isinstance(body, dict) or "verdict" not in body:
        return InvalidProbe(claim_id, role, raw_payload=str(raw)[:500])
    try:
        verdict = int(body["verdict"])
        confidence = float(body.get("confidence", 0.0))
    except (TypeError, ValueError):
        return InvalidProbe(claim_id, role, raw_payload=str(raw)[:500])
    if verdict not in (-1, 0, 1):
        return InvalidProbe(claim_id, role, raw_payload=str(raw)[:500])
    clamped = min(1.0, max(0.0, confidence))
    if clamped != confidence:
        logger.warning("adapter confidence %s for %s clamped to %s", confidence, claim_id, clamped)
    candidate = body.get("candidate")
    return EvidenceTuple(role, verdict, clamped, claim_id, round_no,
                         candidate=str(candidate) if candidate is not None else None)


@dataclass
class RoundProbeResult:
    evidence: dict[str, list[EvidenceTuple]]
    invalid: list[InvalidProbe]
    calls: int
    probed_claims: list[str]


def default_probe_targets(memory: SemanticMemory) -> list[str]:
    return sorted(cid for cid, c in memory.claims.items()
                  if c.status in PROBEABLE_STATUSES)


def run_round(agents, memory: SemanticMemory, claim_ids: list[str],
              budget: ProbeBudget, round_no: int,
              skip_statuses: frozenset = frozenset({ClaimStatus.LOCKED})) -> RoundProbeResult:
    """Probe each listed claim with every in-scope agent at most once.

    Out-of-scope pairs contribute a synthetic zero-confidence abstention so
    every claim sees a uniform role universe; only real probes count as calls.
    """
    evidence: dict[str, list[EvidenceTuple]] = {}
    invalid: list[InvalidProbe] = []
    calls = 0
    probed: list[str] = []
    for cid in sorted(claim_ids):
        claim = memory.claims.get(cid)
        if claim is None or claim.status in skip_statuses:
            continue
        probed.append(cid)
        evidence[cid] = []
        for agent in agents:
            if claim_in_scope(agent.role, claim):
                calls += probe_call_cost(agent.role, claim, memory.graph, budget)
                result = agent.probe(memory, claim, round_no)
                if isinstance(result, InvalidProbe):
                    invalid.append(result)
                else:
                    evidence[cid].append(result)
            else:
                evidence[cid].append(out_of_scope_abstention(agent.role, claim, round_no))
    return RoundProbeResult(evidence=evidence, invalid=invalid, calls=calls,
                            probed_claims=probed)


def make_oracle_agents(config: OracleConfig) -> list[OracleAgent]:
    return [OracleAgent(role, config) for role in ROLE_ORDER]
