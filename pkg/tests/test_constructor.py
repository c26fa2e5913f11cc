"""Keyframe budgeting, ingest correspondence, claim decomposition, dependency rules."""

import pytest
from hypothesis import given, settings, strategies as st

from claimloop.claims import ClaimType, extents_overlap
from claimloop.constructor import (
    SegmentDescriptor,
    decompose_claims,
    derive_dependencies,
    ingest_graph,
    select_keyframes,
)
from claimloop.graph import GraphState

from conftest import make_graph


# -- keyframe selection: oracle first --------------------------------------------

def keyframe_oracle(segments, budget):
    """Rule applied by hand: candidates, then uniform index subsampling
    keeping first and last."""
    cands = set()
    for s in segments:
        mid = (s.start + s.end) // 2
        cands.update({s.start, mid, s.end} if s.dynamic else {mid})
    cands = sorted(cands)
    if len(cands) <= budget:
        return cands
    if budget == 1:
        return [cands[0]]
    idx = sorted({round(i * (len(cands) - 1) / (budget - 1)) for i in range(budget)})
    return [cands[i] for i in idx]


def test_single_dynamic_segment():
    plan = select_keyframes([SegmentDescriptor(0, 10, True)], 5)
    assert plan.selected == [0, 5, 10]


def test_single_stable_segment_midpoint():
    plan = select_keyframes([SegmentDescriptor(4, 8, False)], 5)
    assert plan.selected == [6]


def test_subsampling_keeps_boundaries():
    segments = [SegmentDescriptor(0, 2, True), SegmentDescriptor(4, 8, True),
                SegmentDescriptor(10, 14, True)]
    # candidates: 0,1,2, 4,6,8, 10,12,14 -> 9 candidates
    plan = select_keyframes(segments, 3)
    assert len(plan.selected) == 3
    assert plan.selected[0] == 0 and plan.selected[-1] == 14
    assert plan.selected == keyframe_oracle(segments, 3)


def test_empty_segments_empty_plan():
    assert select_keyframes([], 5).selected == []


def test_overlapping_segments_rejected():
    with pytest.raises(ValueError):
        select_keyframes([SegmentDescriptor(0, 5, True), SegmentDescriptor(3, 8, False)], 5)


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 10), st.booleans()),
                max_size=6),
       st.integers(1, 8))
@settings(max_examples=80, deadline=None)
def test_keyframe_budget_property(raw, budget):
    segments = []
    cursor = 0
    for gap, length, dynamic in raw:
        start = cursor + gap
        segments.append(SegmentDescriptor(start, start + length, dynamic))
        cursor = start + length + 1
    plan = select_keyframes(segments, budget)
    assert len(plan.selected) <= budget
    assert plan.selected == sorted(set(plan.selected))
    assert plan.selected == keyframe_oracle(segments, budget)
    dyn = [s for s in segments if s.dynamic]
    if len(segments) == 1 and dyn and budget >= 3:
        s = dyn[0]
        assert plan.selected == sorted({s.start, (s.start + s.end) // 2, s.end})


# -- ingest -------------------------------------------------------------------

def area_overlap_oracle(a, b):
    """Brute-force IoU via rectangle areas."""
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)
    return inter / union if union else 0.0


def slices_with(label_a, box_a, label_b, box_b):
    return {
        0: {"entities": [{"entity_id": "x", "canonical_label": label_a,
                          "spatial_extent": box_a}]},
        1: {"entities": [{"entity_id": "y", "canonical_label": label_b,
                          "spatial_extent": box_b}]},
    }


def test_ingest_merges_high_iou_same_label():
    a, b = (0.1, 0.1, 0.5, 0.5), (0.1, 0.1, 0.5, 0.48)
    assert area_overlap_oracle(a, b) >= 0.9
    g = ingest_graph(slices_with("dog", a, "dog", b), iou_threshold=0.5)
    assert len(g.entities) == 1
    ent = next(iter(g.entities.values()))
    assert ent.frame_ids == {0, 1}


def test_ingest_splits_low_iou():
    a, b = (0.1, 0.1, 0.3, 0.3), (0.5, 0.5, 0.9, 0.9)
    assert area_overlap_oracle(a, b) < 0.5
    g = ingest_graph(slices_with("dog", a, "dog", b), iou_threshold=0.5)
    assert len(g.entities) == 2


def test_ingest_splits_different_labels():
    a = (0.1, 0.1, 0.5, 0.5)
    g = ingest_graph(slices_with("dog", a, "cat", a), iou_threshold=0.5)
    assert len(g.entities) == 2


def test_ingest_drops_malformed_region(caplog):
    slices = {0: {"entities": [
        {"entity_id": "x", "canonical_label": "dog", "spatial_extent": (0.5, 0.5, 0.5, 0.9)},
        {"entity_id": "y", "canonical_label": "cat", "spatial_extent": (0.1, 0.1, 0.4, 0.4)},
    ]}}
    g = ingest_graph(slices)
    assert len(g.entities) == 1
    assert next(iter(g.entities.values())).canonical_label == "cat"


def test_ingest_relations_rewritten_to_canonical_ids():
    box = (0.1, 0.1, 0.5, 0.5)
    far = (0.6, 0.6, 0.9, 0.9)
    slices = {
        0: {"entities": [{"entity_id": "i1", "canonical_label": "dog", "spatial_extent": box},
                         {"entity_id": "i2", "canonical_label": "cat", "spatial_extent": far}],
            "relations": [{"subject": "i1", "predicate": "next_to", "object": "i2"}],
            "attributes": [{"entity_id": "i1", "attribute_key": "color", "attribute_value": "red"}]},
        1: {"entities": [{"entity_id": "j1", "canonical_label": "dog", "spatial_extent": box}],
            "attributes": [{"entity_id": "j1", "attribute_key": "color", "attribute_value": "red"}]},
    }
    g = ingest_graph(slices, 0.5)
    assert len(g.entities) == 2
    rel = next(iter(g.relations.values()))
    assert g.entities[rel.subject].canonical_label == "dog"
    assert g.entities[rel.object].canonical_label == "cat"
    attr = next(iter(g.attributes.values()))
    assert attr.frame_ids == {0, 1}  # merged across the tracked entity


def test_ingest_idempotent_isomorphic():
    box = (0.1, 0.1, 0.5, 0.5)
    slices = {
        0: {"entities": [{"entity_id": "i1", "canonical_label": "dog", "spatial_extent": box}]},
        1: {"entities": [{"entity_id": "k9", "canonical_label": "dog", "spatial_extent": box}]},
    }
    g1 = ingest_graph(slices, 0.5)
    g2 = ingest_graph(slices, 0.5)
    assert g1.canonical_json() == g2.canonical_json()


# -- decomposition ---------------------------------------------------------------

def test_decompose_counts():
    g = make_graph(n_entities=1, relation=False, attribute=True)
    claims = decompose_claims(g)
    by_type = {t: sum(1 for c in claims.values() if c.claim_type is t) for t in ClaimType}
    assert by_type[ClaimType.EXIST] == 1
    assert by_type[ClaimType.LABEL] == 1
    assert by_type[ClaimType.ATTR] == 1
    assert len(claims) == 3


def test_decompose_empty_graph():
    assert decompose_claims(GraphState()) == {}


def test_decompose_three_entities_two_relations():
    g = make_graph(n_entities=3, relation=False, attribute=False)
    from claimloop.graph import RelationEdge

    g.relations["r0"] = RelationEdge("r0", "e0", "on", "e1", {0})
    g.relations["r1"] = RelationEdge("r1", "e1", "under", "e2", {1})
    claims = decompose_claims(g)
    assert len(claims) == 3 + 3 + 2


@given(st.integers(0, 5), st.booleans(), st.booleans())
@settings(max_examples=30, deadline=None)
def test_claim_count_identity(n_entities, rel, attr):
    g = make_graph(n_entities=max(n_entities, 0), relation=rel, attribute=attr and n_entities > 0)
    claims = decompose_claims(g)
    assert len(claims) == 2 * len(g.entities) + len(g.attributes) + len(g.relations)


# -- dependency derivation ----------------------------------------------------------

def dependency_oracle(claims, graph):
    """Brute-force re-derivation of rules (a), (b), (c)."""
    edges = set()
    items = list(claims.values())
    for c in items:
        for d in items:
            if c.claim_id == d.claim_id:
                continue
            sc, sd = c.entity_scope(graph), d.entity_scope(graph)
            shares = bool(sc & sd)
            if (c.claim_type in (ClaimType.EXIST, ClaimType.LABEL)
                    and d.claim_type in (ClaimType.ATTR, ClaimType.REL) and shares):
                edges.add((c.claim_id, d.claim_id))
            if c.claim_type is ClaimType.REL and d.claim_type is ClaimType.REL and shares:
                edges.add((c.claim_id, d.claim_id))
            if shares and extents_overlap(c.temporal_extent, d.temporal_extent):
                edges.add((c.claim_id, d.claim_id))
    return edges


def test_exist_constrains_relation():
    g = make_graph(n_entities=2, relation=True, attribute=False)
    claims = decompose_claims(g)
    deps = derive_dependencies(claims, g)
    assert ("exist:e0", "rel:r0") in deps.edges


def test_rel_claims_sharing_endpoint_mutual():
    g = make_graph(n_entities=3, relation=False, attribute=False)
    from claimloop.graph import RelationEdge

    g.relations["r0"] = RelationEdge("r0", "e0", "on", "e2", {0})
    g.relations["r1"] = RelationEdge("r1", "e1", "under", "e2", {1})
    claims = decompose_claims(g)
    deps = derive_dependencies(claims, g)
    assert ("rel:r0", "rel:r1") in deps.edges
    assert ("rel:r1", "rel:r0") in deps.edges


def test_disjoint_claims_no_edge():
    g = make_graph(n_entities=2, relation=False, attribute=False)
    claims = decompose_claims(g)
    deps = derive_dependencies(claims, g)
    assert ("label:e0", "label:e1") not in deps.edges
    assert ("exist:e0", "exist:e1") not in deps.edges


def test_dependency_rules_match_brute_force():
    g = make_graph(n_entities=3, relation=True, attribute=True)
    claims = decompose_claims(g)
    deps = derive_dependencies(claims, g)
    assert deps.edges == dependency_oracle(claims, g)
    assert all(a != b for a, b in deps.edges)


def test_dependency_rules_match_brute_force_on_synthetic():
    from claimloop.synth import GraphSize, generate_truth

    for seed in range(5):
        g, _ = generate_truth(GraphSize(entities=5, relations=3, attributes=3), seed)
        claims = decompose_claims(g)
        deps = derive_dependencies(claims, g)
        assert deps.edges == dependency_oracle(claims, g)
