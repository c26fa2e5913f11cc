"""Utility ranking, queue gating, human decisions, closure re-verification."""

import pytest

from claimloop.agents import OracleConfig, ProbeBudget, make_oracle_agents
from claimloop.arbitration import (
    AnswerMismatch,
    UtilityWeights,
    apply_human_decision,
    build_queue,
    make_reverify_plan,
    passes_gate,
    schedule_reverify,
    utility,
)
from claimloop.claims import ClaimStatus
from claimloop.engine import Engine, EngineConfig, oracle_decision
from claimloop.fusion import DirectionalScores, FusionConfig, FusionRecord, Outcome
from claimloop.synth import Ontology

from conftest import chain_memory, make_graph, make_memory


def record_for(cid, s_plus=0.0, s_minus=0.0, s_zero=0.0, candidates=None, ctype="label"):
    scores = DirectionalScores(s_plus, s_minus, s_zero)
    return FusionRecord(cid, ctype, scores, 0.5, Outcome.ESCALATE, None,
                        candidates or {})


# -- utility -------------------------------------------------------------------

def test_utility_all_zero():
    u, comp = utility(DirectionalScores(), 0, 5, UtilityWeights())
    assert u == 0.0
    assert comp == {"unc": 0.0, "conflict": 0.0, "impact": 0.0}


def test_utility_fixture():
    u, comp = utility(DirectionalScores(0.8, 0.8, 0.5), out_degree=4, max_out_degree=4,
                      w=UtilityWeights(alpha=1, beta=1, gamma=1))
    assert u == pytest.approx(2.3, abs=1e-12)
    assert comp["conflict"] == pytest.approx(0.8)
    assert comp["impact"] == 1.0


def test_utility_one_sided_rejection_no_conflict():
    u, comp = utility(DirectionalScores(0.0, 1.2, 0.0), 0, 1, UtilityWeights())
    assert comp["conflict"] == 0.0


def test_utility_raw_impact_option():
    u, comp = utility(DirectionalScores(), out_degree=3, max_out_degree=9,
                      w=UtilityWeights(impact_norm=False))
    assert comp["impact"] == 3.0


# -- queue --------------------------------------------------------------------

def test_queue_gate_and_sort():
    mem = chain_memory(3)
    cids = sorted(mem.claims)
    candidates = {
        cids[0]: record_for(cids[0], s_plus=0.8, s_minus=0.8, s_zero=0.5),  # u high
        cids[2]: record_for(cids[2], s_zero=0.1),  # chain tail: no impact, u low
    }
    queue = build_queue(candidates, mem, UtilityWeights(theta_u=0.5))
    assert [i.claim_id for i in queue] == [cids[0]]
    us = [i.utility for i in queue]
    assert us == sorted(us, reverse=True)


def test_queue_gate_literal_direction():
    mem = chain_memory(3)
    cids = sorted(mem.claims)
    candidates = {cids[2]: record_for(cids[2], s_zero=0.1)}
    w = UtilityWeights(theta_u=0.5, gate_direction="lt")
    queue = build_queue(candidates, mem, w)
    assert [i.claim_id for i in queue] == [cids[2]]  # low u admitted under "lt"
    assert passes_gate(0.9, w) is False


def test_queue_empty_candidates():
    mem = chain_memory(2)
    assert build_queue({}, mem, UtilityWeights()) == []


def test_queue_tie_break_by_claim_id():
    mem = chain_memory(4)
    cids = sorted(mem.claims)
    candidates = {c: record_for(c, s_zero=0.9) for c in (cids[2], cids[0])}
    queue = build_queue(candidates, mem, UtilityWeights(gamma=0.0, theta_u=0.5))
    assert [i.claim_id for i in queue] == [cids[0], cids[2]]


def test_queue_query_types():
    mem = make_memory()
    candidates = {
        "label:e0": record_for("label:e0", s_zero=2.0, candidates={"cat": 1.3}),
        "exist:e0": record_for("exist:e0", s_zero=2.0, ctype="exist"),
    }
    queue = build_queue(candidates, mem, UtilityWeights())
    by_claim = {i.claim_id: i for i in queue}
    assert by_claim["label:e0"].query["type"] == "candidate_select"
    assert "cat" in by_claim["label:e0"].query["options"]
    assert "dog" in by_claim["label:e0"].query["options"]  # current value offered
    assert by_claim["exist:e0"].query["type"] == "binary"


# -- human decisions ---------------------------------------------------------------

def escalate(mem, cid, candidates=None):
    """Put a claim into the escalated state and build its queue item."""
    rec = record_for(cid, s_zero=2.0, candidates=candidates,
                     ctype=mem.claims[cid].claim_type.value)
    queue = build_queue({cid: rec}, mem, UtilityWeights())
    from claimloop.memory import Action, Actor, Edit

    mem.apply_edit(Edit(Action.ESCALATE, claim_id=cid, belief=0.5), Actor.ARBITRATION)
    return queue[0]


def test_candidate_select_rewrites_label():
    mem = make_memory()
    item = escalate(mem, "label:e0", candidates={"cat": 1.5})
    plan = apply_human_decision(mem, item, {"type": "candidate_select", "value": "cat"},
                               ProbeBudget())
    assert mem.graph.entities["e0"].canonical_label == "cat"
    assert mem.claims["label:e0"].status is ClaimStatus.HUMAN_RESOLVED
    assert plan.edited == {"label:e0"}
    assert "label:e0" in plan.closure
    assert item.status == "answered"
    assert mem.log[-1].action == "human_answer"


def test_binary_confirm_no_edit_empty_plan():
    mem = make_memory()
    item = escalate(mem, "exist:e0")
    version_before = mem.version
    plan = apply_human_decision(mem, item, {"type": "binary", "value": "confirm"},
                               ProbeBudget())
    assert mem.claims["exist:e0"].status is ClaimStatus.HUMAN_RESOLVED
    assert plan.edited == set() and plan.closure == set()
    assert plan.calls_planned == 0
    assert mem.version == version_before + 1  # exactly one human entry


def test_exist_reject_cascade():
    mem = make_memory()  # e0 has label + attr + rel dependents
    dependents = {"label:e0", "attr:a0", "rel:r0"}
    item = escalate(mem, "exist:e0")
    closure_before = mem.dependency_closure({"exist:e0"} | dependents)
    plan = apply_human_decision(mem, item, {"type": "binary", "value": "reject"},
                               ProbeBudget())
    assert "e0" not in mem.graph.entities
    assert "r0" not in mem.graph.relations and "a0" not in mem.graph.attributes
    for cid in dependents:
        assert cid not in mem.claims  # retired
    assert mem.claims["exist:e0"].status is ClaimStatus.HUMAN_RESOLVED  # tombstone
    assert plan.edited == {"exist:e0"} | dependents
    # closure over the retired set's neighbors, restricted to survivors
    assert plan.closure == {c for c in closure_before if c in mem.claims}


def test_attr_reject_removes_assertion():
    mem = make_memory()
    item = escalate(mem, "attr:a0")
    apply_human_decision(mem, item, {"type": "binary", "value": "reject"}, ProbeBudget())
    assert "a0" not in mem.graph.attributes
    assert mem.claims["attr:a0"].status is ClaimStatus.HUMAN_RESOLVED


def test_label_reject_retains_value_marks_contradicted():
    mem = make_memory()
    item = escalate(mem, "label:e0")
    apply_human_decision(mem, item, {"type": "binary", "value": "reject"}, ProbeBudget())
    assert mem.claims["label:e0"].status is ClaimStatus.CONTRADICTED
    assert mem.graph.entities["e0"].canonical_label == "dog"


def test_answer_query_mismatch_rejected():
    mem = make_memory()
    item = escalate(mem, "exist:e0")
    before = mem.snapshot_dict()
    with pytest.raises(AnswerMismatch):
        apply_human_decision(mem, item, {"type": "candidate_select", "value": "cat"},
                             ProbeBudget())
    assert item.status == "open"
    assert mem.snapshot_dict() == before
    with pytest.raises(AnswerMismatch):
        apply_human_decision(mem, item, {"type": "binary", "value": "maybe"}, ProbeBudget())


# -- re-verification ------------------------------------------------------------------

def noiseless_env(corrupted, truth):
    mem = make_memory(corrupted)
    agents = make_oracle_agents(OracleConfig(ground_truth=truth))
    ontology = Ontology()
    lookup = lambda c: ontology.values_for(c, mem.graph)
    return mem, agents, lookup


def test_chain_closure_accounting():
    mem = chain_memory(100)
    cids = sorted(mem.claims)
    mid = cids[50]
    item = escalate(mem, mid, candidates={"cat": 1.5})
    plan = apply_human_decision(mem, item, {"type": "candidate_select", "value": "cat"},
                               ProbeBudget())
    assert plan.calls_full_baseline == 100  # label claims: local only, 1 call each
    assert plan.calls_planned <= 5
    truth = mem.graph.copy()
    agents = make_oracle_agents(OracleConfig(ground_truth=truth))
    ontology = Ontology()
    result = schedule_reverify(mem, plan, agents, FusionConfig(),
                               __import__("claimloop.fusion", fromlist=["DEFAULT_ROLE_WEIGHTS"]).DEFAULT_ROLE_WEIGHTS,
                               ProbeBudget(), lambda c: ontology.values_for(c, mem.graph))
    assert result.calls_actual <= 5
    assert result.calls_full == 100
    assert set(result.probed_claims) == plan.closure


def test_reverify_probes_exactly_closure_minus_locked():
    mem = chain_memory(10)
    cids = sorted(mem.claims)
    mem.lock_claim(cids[4])
    item = escalate(mem, cids[5], candidates={"cat": 1.5})
    plan = apply_human_decision(mem, item, {"type": "candidate_select", "value": "cat"},
                               ProbeBudget())
    assert cids[4] in plan.closure or cids[4] not in plan.closure  # lock handling below
    truth = mem.graph.copy()
    agents = make_oracle_agents(OracleConfig(ground_truth=truth))
    ontology = Ontology()
    from claimloop.fusion import DEFAULT_ROLE_WEIGHTS

    result = schedule_reverify(mem, plan, agents, FusionConfig(), DEFAULT_ROLE_WEIGHTS,
                               ProbeBudget(), lambda c: ontology.values_for(c, mem.graph))
    locked = {cid for cid in plan.closure if mem.claims[cid].status is ClaimStatus.LOCKED}
    assert set(result.probed_claims) == plan.closure - locked
    assert cids[4] not in result.probed_claims


def test_empty_edit_set_zero_calls():
    mem = make_memory()
    plan = make_reverify_plan(mem, set(), ProbeBudget())
    agents = make_oracle_agents(OracleConfig(ground_truth=make_graph()))
    ontology = Ontology()
    from claimloop.fusion import DEFAULT_ROLE_WEIGHTS

    result = schedule_reverify(mem, plan, agents, FusionConfig(), DEFAULT_ROLE_WEIGHTS,
                               ProbeBudget(), lambda c: ontology.values_for(c, mem.graph))
    assert result.calls_actual == 0


def test_human_resolved_probed_but_never_reclassified():
    mem = chain_memory(5)
    cids = sorted(mem.claims)
    item = escalate(mem, cids[2], candidates={"cat": 1.5})
    plan = apply_human_decision(mem, item, {"type": "candidate_select", "value": "cat"},
                               ProbeBudget())
    truth = mem.graph.copy()  # truth now agrees with the human edit
    agents = make_oracle_agents(OracleConfig(ground_truth=truth))
    ontology = Ontology()
    from claimloop.fusion import DEFAULT_ROLE_WEIGHTS

    result = schedule_reverify(mem, plan, agents, FusionConfig(), DEFAULT_ROLE_WEIGHTS,
                               ProbeBudget(), lambda c: ontology.values_for(c, mem.graph))
    assert cids[2] in result.probed_claims  # closure includes the edited claim
    assert mem.claims[cids[2]].status is ClaimStatus.HUMAN_RESOLVED  # untouched
    for cid in plan.closure - {cids[2]}:
        assert mem.claims[cid].status is ClaimStatus.SUPPORTED  # reclassified


def test_calls_actual_never_exceeds_baseline():
    mem = make_memory()
    item = escalate(mem, "label:e0", candidates={"cat": 1.5})
    plan = apply_human_decision(mem, item, {"type": "candidate_select", "value": "cat"},
                               ProbeBudget())
    assert plan.calls_planned <= plan.calls_full_baseline


# -- engine-level queue flow -----------------------------------------------------------

def test_engine_noisy_run_answers_drain_queue():
    from claimloop.synth import CorruptionSpec, GraphSize, synth_generate

    truth, corrupted, ontology = synth_generate(
        GraphSize(entities=5, relations=3, attributes=2),
        CorruptionSpec(label_swap_rate=0.5, spurious_entity_rate=0.3, rng_seed=11))
    from claimloop.constructor import decompose_claims, derive_dependencies
    from claimloop.memory import SemanticMemory

    claims = decompose_claims(corrupted)
    mem = SemanticMemory.init_memory(corrupted, claims, derive_dependencies(claims, corrupted))
    agents = make_oracle_agents(OracleConfig(ground_truth=truth, abstain_rate=0.5,
                                             flip_rate=0.2, rng_seed=5))
    engine = Engine(mem, agents, ontology)
    engine.run_refinement()
    engine.oracle_answer_all(truth)
    assert engine.open_items() == []
    for item in engine.queue:
        assert item.status in ("answered", "expired")
    # human supremacy: resolved claims stay resolved (label-rejects return to
    # the automated pool by design, so only non-label answers are terminal)
    for item in engine.queue:
        claim = engine.memory.claims.get(item.claim_id)
        if item.status == "answered" and claim is not None \
                and claim.claim_type.value != "label":
            assert claim.status is ClaimStatus.HUMAN_RESOLVED
