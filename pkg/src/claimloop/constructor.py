"""Memory construction: keyframe budgeting, cross-frame entity correspondence,
claim decomposition, and dependency-edge derivation."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .claims import Claim, ClaimType, DependencyGraph, ElementRef, EXIST_VALUE, extents_overlap
from .graph import AttributeAssertion, EntityNode, GraphError, GraphState, RelationEdge, box_iou, validate_box
from .memory import SemanticMemory

logger = logging.getLogger(__name__)

DEFAULT_IOU_THRESHOLD = 0.5


@dataclass
class SegmentDescriptor:
    start: int
    end: int
    dynamic: bool

    def validate(self) -> None:
        if self.start > self.end:
            raise ValueError(f"segment [{self.start}, {self.end}] has start > end")


@dataclass
class KeyframePlan:
    selected: list[int]
    budget: int


def validate_segments(segments: list[SegmentDescriptor]) -> None:
    for seg in segments:
        seg.validate()
    for prev, cur in zip(segments, segments[1:]):
        if cur.start <= prev.end:
            raise ValueError(f"segments [{prev.start},{prev.end}] and "
                             f"[{cur.start},{cur.end}] overlap or are unordered")


def select_keyframes(segments: list[SegmentDescriptor], budget: int) -> KeyframePlan:
    """Dynamic segments contribute start/midpoint/end, stable ones the midpoint;
    over-budget candidate sets are uniformly subsampled keeping both ends."""
    if budget < 1:
        raise ValueError("keyframe budget must be >= 1")
    validate_segments(segments)
    candidates: list[int] = []
    for seg in segments:
        mid = (seg.start + seg.end) // 2
        if seg.dynamic:
            candidates.extend((seg.start, mid, seg.end))
        else:
            candidates.append(mid)
    candidates = sorted(set(candidates))
    if len(candidates) > budget:
        n = len(candidates)
        if budget == 1:
            picks = [candidates[0]]
        else:
            idx = sorted({round(i * (n - 1) / (budget - 1)) for i in range(budget)})
            picks = [candidates[i] for i in idx]
        candidates = picks
    return KeyframePlan(selected=candidates, budget=budget)


def ingest_graph(frame_slices: dict[int, dict], iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> GraphState:
    """Merge per-frame instances into video-level entities.

    `frame_slices` maps frame_id -> {"entities": [...], "relations": [...],
    "attributes": [...]} using the snapshot schema, with ids local to the
    frame. Instances in different frames merge into one entity iff labels are
    equal and box IoU >= iou_threshold. Malformed instances are dropped and
    logged, never fatal.
    """
    # Collect valid instances: (frame, local_id, label, box)
    instances: list[tuple[int, str, str, tuple]] = []
    for fid in sorted(frame_slices):
        for inst in frame_slices[fid].get("entities", []):
            try:
                box = validate_box(inst["spatial_extent"]
                                   if not isinstance(inst["spatial_extent"], dict)
                                   else inst["spatial_extent"][str(fid)])
                label = inst["canonical_label"]
                if not label:
                    raise GraphError("empty label")
            except (GraphError, KeyError, TypeError) as exc:
                logger.warning("frame %s: dropping malformed instance %r (%s)",
                               fid, inst.get("entity_id"), exc)
                continue
            instances.append((fid, inst["entity_id"], label, box))

    # Union-find over instances; merge on equal label + IoU above threshold.
    parent = list(range(len(instances)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    for i in range(len(instances)):
        for j in range(i + 1, len(instances)):
            fi, _, li, bi = instances[i]
            fj, _, lj, bj = instances[j]
            if fi != fj and li == lj and box_iou(bi, bj) >= iou_threshold:
                union(i, j)

    graph = GraphState(frames=sorted(frame_slices))
    group_to_entity: dict[int, str] = {}
    local_to_entity: dict[tuple[int, str], str] = {}
    for i, (fid, local_id, label, box) in enumerate(instances):
        root = find(i)
        if root not in group_to_entity:
            eid = f"e{len(group_to_entity)}"
            group_to_entity[root] = eid
            graph.entities[eid] = EntityNode(eid, label, {}, set())
        eid = group_to_entity[root]
        ent = graph.entities[eid]
        ent.frame_ids.add(fid)
        ent.spatial_extent[fid] = box
        local_to_entity[(fid, local_id)] = eid

    # Relations and attributes rewritten onto canonical entity ids; identical
    # (subject, predicate, object) / (entity, key, value) merge their frames.
    rel_index: dict[tuple[str, str, str], str] = {}
    attr_index: dict[tuple[str, str], str] = {}
    for fid in sorted(frame_slices):
        for rel in frame_slices[fid].get("relations", []):
            subj = local_to_entity.get((fid, rel["subject"]))
            obj = local_to_entity.get((fid, rel["object"]))
            if subj is None or obj is None or subj == obj or not rel.get("predicate"):
                logger.warning("frame %s: dropping relation %r", fid, rel)
                continue
            key = (subj, rel["predicate"], obj)
            if key not in rel_index:
                rid = f"r{len(rel_index)}"
                rel_index[key] = rid
                graph.relations[rid] = RelationEdge(rid, subj, rel["predicate"], obj, set())
            graph.relations[rel_index[key]].frame_ids.add(fid)
        for attr in frame_slices[fid].get("attributes", []):
            eid = local_to_entity.get((fid, attr["entity_id"]))
            if eid is None or not attr.get("attribute_key"):
                logger.warning("frame %s: dropping attribute %r", fid, attr)
                continue
            key = (eid, attr["attribute_key"])
            if key in attr_index:
                existing = graph.attributes[attr_index[key]]
                if existing.attribute_value != attr["attribute_value"]:
                    logger.warning("frame %s: conflicting value for %s.%s, keeping %r",
                                   fid, eid, attr["attribute_key"], existing.attribute_value)
                    continue
            else:
                aid = f"a{len(attr_index)}"
                attr_index[key] = aid
                graph.attributes[aid] = AttributeAssertion(
                    aid, eid, attr["attribute_key"], attr["attribute_value"], set())
            graph.attributes[attr_index[key]].frame_ids.add(fid)

    graph.validate()
    return graph


def _extent(frame_ids: set[int]) -> tuple[int, int]:
    return (min(frame_ids), max(frame_ids))


def decompose_claims(graph: GraphState) -> dict[str, Claim]:
    """One exist + one label claim per entity, one claim per attribute
    assertion and per relation edge; a disjoint, total partition."""
    claims: dict[str, Claim] = {}

    def add(claim: Claim) -> None:
        claims[claim.claim_id] = claim

    for eid, ent in sorted(graph.entities.items()):
        ext = _extent(ent.frame_ids)
        add(Claim(f"exist:{eid}", ClaimType.EXIST, ElementRef("entity", eid),
                  EXIST_VALUE, ext))
        add(Claim(f"label:{eid}", ClaimType.LABEL, ElementRef("entity", eid),
                  ent.canonical_label, ext))
    for aid, attr in sorted(graph.attributes.items()):
        add(Claim(f"attr:{aid}", ClaimType.ATTR, ElementRef("attribute", aid),
                  attr.attribute_value, _extent(attr.frame_ids)))
    for rid, rel in sorted(graph.relations.items()):
        add(Claim(f"rel:{rid}", ClaimType.REL, ElementRef("relation", rid),
                  rel.predicate, _extent(rel.frame_ids)))
    return claims


def derive_dependencies(claims: dict[str, Claim], graph: GraphState) -> DependencyGraph:
    """Edges where revising one claim structurally constrains another:

    (a) identity: exist/label claims on entity e constrain every attr/rel
        claim touching e;
    (b) endpoints: rel claims sharing a subject or object constrain each
        other (mutual);
    (c) temporal: same-entity claims with intersecting extents constrain
        each other (mutual).
    """
    deps = DependencyGraph()
    ordered = sorted(claims.values(), key=lambda c: c.claim_id)
    scopes = {c.claim_id: c.entity_scope(graph) for c in ordered}

    for c in ordered:
        for d in ordered:
            if c.claim_id == d.claim_id:
                continue
            # (a) identity claims constrain dependent structure on the entity
            if c.claim_type in (ClaimType.EXIST, ClaimType.LABEL) \
                    and d.claim_type in (ClaimType.ATTR, ClaimType.REL) \
                    and scopes[c.claim_id] & scopes[d.claim_id]:
                deps.add_edge(c.claim_id, d.claim_id)
            # (b) relation claims sharing an endpoint
            if c.claim_type is ClaimType.REL and d.claim_type is ClaimType.REL \
                    and scopes[c.claim_id] & scopes[d.claim_id]:
                deps.add_edge(c.claim_id, d.claim_id)
            # (c) same-entity claims with overlapping temporal extents
            if scopes[c.claim_id] & scopes[d.claim_id] \
                    and extents_overlap(c.temporal_extent, d.temporal_extent):
                deps.add_edge(c.claim_id, d.claim_id)
    return deps


def build_memory(frame_slices: dict[int, dict],
                 segments: list[SegmentDescriptor] | None = None,
                 budget: int = 5,
                 iou_threshold: float = DEFAULT_IOU_THRESHOLD) -> SemanticMemory:
    """Full construction path: keyframe plan -> ingest -> claims -> deps -> memory."""
    if segments is not None:
        plan = select_keyframes(segments, budget)
        frame_slices = {f: s for f, s in frame_slices.items() if f in set(plan.selected)}
    graph = ingest_graph(frame_slices, iou_threshold)
    claims = decompose_claims(graph)
    deps = derive_dependencies(claims, graph)
    return SemanticMemory.init_memory(graph, claims, deps)
