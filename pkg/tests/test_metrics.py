"""Behavior metrics, structural scores, GED-vs-brute-force, synth generator."""

import itertools
import math
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from claimloop.claims import ClaimStatus
from claimloop.graph import EntityNode, GraphState, RelationEdge
from claimloop.metrics import (
    MetricReport,
    RunTrace,
    compute_metrics,
    density_regime,
    entity_accuracy,
    graph_edit_distance,
)
from claimloop.synth import CorruptionSpec, GraphSize, Ontology, corrupt, generate_truth, synth_generate

from conftest import make_graph, make_memory


# -- density regimes (thresholds from the experiment design) --------------------------

@pytest.mark.parametrize("count,regime", [
    (0, "low"), (9, "low"), (10, "medium"), (19, "medium"), (20, "high"), (100, "high"),
])
def test_density_regime(count, regime):
    assert density_regime(count) == regime


# -- counting metrics -------------------------------------------------------------

def trace_with(evidence_by_claim, probe_count, invalid_count, keyframes=5,
               queries=(), last_round=None):
    trace = RunTrace(keyframes=keyframes)
    trace.evidence_by_claim = evidence_by_claim
    trace.probed_claims = set(evidence_by_claim)
    trace.probe_count = probe_count
    trace.invalid_count = invalid_count
    trace.last_probe_round = last_round or {c: 1 for c in evidence_by_claim}
    trace.queries_issued = [{"item_id": f"q{i}", "claim_id": c, "utility": 1.0}
                            for i, c in enumerate(queries)]
    return trace


def tup(role, verdict, probed=True, rnd=1):
    return {"role": role, "verdict": verdict, "confidence": 1.0, "claim_id": "x",
            "round": rnd, "candidate": None, "probed": probed}


def test_inv_probe_counting():
    mem = make_memory()
    trace = trace_with({"label:e0": [tup("local_grounding", 1)]}, probe_count=10,
                       invalid_count=2)
    report = compute_metrics(trace, mem)
    assert report.inv_probe == pytest.approx(0.2)


def test_claim_agr_all_agree():
    mem = make_memory()
    evidence = {
        "exist:e0": [tup("local_grounding", 1), tup("global_audit", 1)],
        "exist:e1": [tup("local_grounding", -1), tup("global_audit", -1)],
        "label:e0": [tup("local_grounding", 1)],  # one opinion: excluded
    }
    report = compute_metrics(trace_with(evidence, 5, 0), mem)
    assert report.claim_agr == 1.0


def test_claim_agr_uses_last_round():
    mem = make_memory()
    evidence = {"exist:e0": [tup("local_grounding", 1, rnd=1), tup("global_audit", -1, rnd=1),
                             tup("local_grounding", 1, rnd=2), tup("global_audit", 1, rnd=2)]}
    trace = trace_with(evidence, 4, 0, last_round={"exist:e0": 2})
    assert compute_metrics(trace, mem).claim_agr == 1.0


def test_uncert_counts_all_abstain_only():
    mem = make_memory()
    evidence = {
        "exist:e0": [tup("local_grounding", 0), tup("global_audit", 0, probed=False)],
        "exist:e1": [tup("local_grounding", 0), tup("global_audit", 1)],
    }
    report = compute_metrics(trace_with(evidence, 3, 0), mem)
    assert report.uncert == pytest.approx(0.5)


def test_resolve_no_disputes_degenerate():
    mem = make_memory()
    evidence = {"exist:e0": [tup("local_grounding", 1)]}
    report = compute_metrics(trace_with(evidence, 1, 0), mem)
    assert report.resolve == 1.0
    assert report.resolve_degenerate


def test_resolve_disputed_resolution():
    mem = make_memory()
    mem.claims["label:e0"].status = ClaimStatus.REVISED
    mem.claims["label:e1"].status = ClaimStatus.ESCALATED
    evidence = {
        "label:e0": [tup("local_grounding", -1)],  # disputed, revised, never queued
        "label:e1": [tup("local_grounding", -1)],  # disputed, escalated to a human
    }
    report = compute_metrics(trace_with(evidence, 2, 0, queries=["label:e1"]), mem)
    assert report.resolve == pytest.approx(0.5)


def test_human_qpf():
    mem = make_memory()
    evidence = {"label:e0": [tup("local_grounding", 0)]}
    report = compute_metrics(trace_with(evidence, 1, 0, keyframes=5,
                                        queries=["label:e0", "label:e1"]), mem)
    assert report.human_qpf == pytest.approx(0.4)


def test_empty_trace_degenerate():
    mem = make_memory()
    report = compute_metrics(RunTrace(keyframes=5), mem)
    assert report.degenerate
    assert report.resolve == 1.0


# -- entity accuracy --------------------------------------------------------------------

def test_entity_accuracy_identical():
    g = make_graph(n_entities=4)
    assert entity_accuracy(g, make_graph(n_entities=4)) == 1.0


def test_entity_accuracy_one_of_four_swapped():
    truth = make_graph(n_entities=4, relation=False, attribute=False)
    pred = make_graph(n_entities=4, relation=False, attribute=False)
    pred.entities["e2"].canonical_label = "zebra"
    assert entity_accuracy(pred, truth) == pytest.approx(0.75)


def test_entity_accuracy_empty_pred():
    truth = make_graph(n_entities=3, relation=False, attribute=False)
    assert entity_accuracy(GraphState(), truth) == 0.0


def test_entity_accuracy_empty_truth_flagged_one():
    assert entity_accuracy(make_graph(), GraphState()) == 1.0


# -- graph edit distance vs brute force ----------------------------------------------

def _pair_cost(a: Counter, b: Counter) -> int:
    na, nb = sum(a.values()), sum(b.values())
    return max(na, nb) - sum((a & b).values())


def ged_brute_force(pred: GraphState, truth: GraphState) -> float:
    """Independent oracle: enumerate every injective partial node mapping."""
    p_nodes = sorted(pred.entities)
    t_nodes = sorted(truth.entities)
    p_edges: dict = {}
    for r in pred.relations.values():
        p_edges.setdefault((r.subject, r.object), Counter())[r.predicate] += 1
    t_edges: dict = {}
    for r in truth.relations.values():
        t_edges.setdefault((r.subject, r.object), Counter())[r.predicate] += 1
    denom = (len(p_nodes) + len(t_nodes)
             + sum(sum(c.values()) for c in p_edges.values())
             + sum(sum(c.values()) for c in t_edges.values()))
    if denom == 0:
        return 0.0

    best = math.inf

    def full_cost(mapping: dict) -> int:
        cost = 0
        for u in p_nodes:
            v = mapping[u]
            if v is None:
                cost += 1
            elif pred.entities[u].canonical_label != truth.entities[v].canonical_label:
                cost += 1
        used = {v for v in mapping.values() if v is not None}
        cost += len(t_nodes) - len(used)
        handled = set()
        for (u, w), preds in p_edges.items():
            v, x = mapping[u], mapping[w]
            if v is None or x is None:
                cost += sum(preds.values())
            else:
                cost += _pair_cost(preds, t_edges.get((v, x), Counter()))
                handled.add((v, x))
        for key, preds in t_edges.items():
            if key not in handled:
                cost += sum(preds.values())
        return cost

    def recurse(i: int, mapping: dict, used: set):
        nonlocal best
        if i == len(p_nodes):
            best = min(best, full_cost(mapping))
            return
        u = p_nodes[i]
        for v in [None] + [t for t in t_nodes if t not in used]:
            mapping[u] = v
            if v is not None:
                used.add(v)
            recurse(i + 1, mapping, used)
            if v is not None:
                used.discard(v)
        del mapping[u]

    recurse(0, {}, set())
    return best / denom


def test_ged_identical_zero():
    g = make_graph(n_entities=3)
    assert graph_edit_distance(g, make_graph(n_entities=3)) == 0.0


def test_ged_single_label_substitution():
    truth = make_graph(n_entities=3, relation=True, attribute=False)
    pred = make_graph(n_entities=3, relation=True, attribute=False)
    pred.entities["e1"].canonical_label = "zebra"
    got = graph_edit_distance(pred, truth)
    # one substitution over (3 nodes + 1 edge) * 2 total teardown/rebuild cost
    assert got == pytest.approx(1 / 8)
    assert got == pytest.approx(ged_brute_force(pred, truth))


def test_ged_empty_pred_full_truth():
    truth = make_graph(n_entities=2, relation=True, attribute=False)
    assert graph_edit_distance(GraphState(), truth) == 1.0
    assert graph_edit_distance(truth, GraphState()) == 1.0


def test_ged_over_max_nodes_errors():
    g = make_graph(n_entities=13 if False else 4)
    with pytest.raises(ValueError, match="sampled"):
        graph_edit_distance(g, make_graph(), max_nodes=3)


def random_labeled_graph(rng, max_nodes=6):
    n = rng.randrange(0, max_nodes + 1)
    g = GraphState(frames=[0])
    labels = ["a", "b", "c"]
    for i in range(n):
        eid = f"e{i}"
        g.entities[eid] = EntityNode(eid, rng.choice(labels), {0: (0.1, 0.1, 0.3, 0.3)}, {0})
    ids = sorted(g.entities)
    if len(ids) >= 2:
        for k in range(rng.randrange(0, 2 * len(ids))):
            u, v = rng.sample(ids, 2)
            rid = f"r{k}"
            g.relations[rid] = RelationEdge(rid, u, rng.choice(["on", "under", "near"]), v, {0})
    return g


def test_ged_matches_brute_force_on_random_pairs():
    import random

    rng = random.Random(42)
    pairs = 0
    while pairs < 60:  # acceptance suite runs the full >= 200-pair sweep
        pred = random_labeled_graph(rng)
        truth = random_labeled_graph(rng)
        expected = ged_brute_force(pred, truth)
        assert graph_edit_distance(pred, truth) == pytest.approx(expected, abs=1e-12)
        pairs += 1


def test_ged_zero_iff_isomorphic_unit_cost():
    """GED 0 exactly when some node bijection aligns labels and edges freely."""
    import random

    rng = random.Random(7)
    for _ in range(40):
        pred = random_labeled_graph(rng, max_nodes=4)
        truth = random_labeled_graph(rng, max_nodes=4)
        got = graph_edit_distance(pred, truth)
        assert (got == 0.0) == (ged_brute_force(pred, truth) == 0.0)
        assert graph_edit_distance(pred, pred) == 0.0


# -- synthetic generator -----------------------------------------------------------

def test_zero_rates_identity():
    truth, corrupted, _ = synth_generate(GraphSize(), CorruptionSpec(rng_seed=3))
    assert truth.canonical_json() == corrupted.canonical_json()


def test_label_swap_rate_one_changes_every_label_in_ontology():
    size = GraphSize(entities=6, relations=2, attributes=2)
    truth, corrupted, ontology = synth_generate(
        size, CorruptionSpec(label_swap_rate=1.0, rng_seed=9))
    for eid, ent in truth.entities.items():
        assert corrupted.entities[eid].canonical_label != ent.canonical_label
        assert corrupted.entities[eid].canonical_label in ontology.labels


def test_seed_determinism_of_generator():
    spec = CorruptionSpec(label_swap_rate=0.4, predicate_swap_rate=0.4,
                          spurious_entity_rate=0.2, missing_entity_rate=0.2, rng_seed=21)
    a = synth_generate(GraphSize(entities=7, relations=3, attributes=3), spec)
    b = synth_generate(GraphSize(entities=7, relations=3, attributes=3), spec)
    assert a[0].canonical_json() == b[0].canonical_json()
    assert a[1].canonical_json() == b[1].canonical_json()


def test_missing_entity_removes_incident_structure():
    size = GraphSize(entities=4, relations=3, attributes=2)
    truth, corrupted, _ = synth_generate(size, CorruptionSpec(missing_entity_rate=1.0,
                                                              rng_seed=5))
    assert not corrupted.entities
    assert not corrupted.relations and not corrupted.attributes


def test_corruption_rate_binomial_bounds():
    """Over many seeds, corrupted-label counts stay inside a 99% binomial band."""
    rate = 0.3
    n_entities = 6
    seeds = 50
    total = 0
    for seed in range(seeds):
        truth, ontology = generate_truth(GraphSize(entities=n_entities), seed)
        corrupted = corrupt(truth, CorruptionSpec(label_swap_rate=rate, rng_seed=seed),
                            ontology)
        total += sum(1 for eid in truth.entities
                     if corrupted.entities[eid].canonical_label
                     != truth.entities[eid].canonical_label)
    n = seeds * n_entities
    mean = n * rate
    spread = 2.576 * math.sqrt(n * rate * (1 - rate))
    assert mean - spread <= total <= mean + spread


def test_spurious_entities_fresh_ids():
    truth, corrupted, _ = synth_generate(GraphSize(entities=3),
                                         CorruptionSpec(spurious_entity_rate=1.0, rng_seed=2))
    added = set(corrupted.entities) - set(truth.entities)
    assert len(added) == 3
    assert all(eid.startswith("spur") for eid in added)
