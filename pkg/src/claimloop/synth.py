"""Synthetic ground-truth/corrupted scene-graph pairs for the desk-scale
harness, with seed-deterministic error injection."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .graph import AttributeAssertion, EntityNode, GraphState, RelationEdge

LABEL_POOL = ["person", "dog", "cat", "car", "bicycle", "table", "chair",
              "cup", "ball", "tree", "door", "box"]
PREDICATE_POOL = ["on", "under", "next_to", "holding", "behind",
                  "in_front_of", "riding", "touching"]
ATTRIBUTE_POOL = {
    "color": ["red", "blue", "green", "black", "white", "yellow"],
    "state": ["open", "closed", "moving", "still"],
    "size": ["small", "large"],
}


@dataclass
class Ontology:
    labels: list[str] = field(default_factory=lambda: list(LABEL_POOL))
    predicates: list[str] = field(default_factory=lambda: list(PREDICATE_POOL))
    attribute_values: dict[str, list[str]] = field(
        default_factory=lambda: {k: list(v) for k, v in ATTRIBUTE_POOL.items()})

    def values_for(self, claim, graph=None) -> list[str]:
        """Ontology-valid replacement candidates for a claim's value."""
        from .claims import ClaimType

        if claim.claim_type is ClaimType.LABEL:
            return list(self.labels)
        if claim.claim_type is ClaimType.REL:
            return list(self.predicates)
        if claim.claim_type is ClaimType.ATTR:
            if graph is not None:
                attr = graph.attributes.get(claim.target.ref_id)
                if attr is not None and attr.attribute_key in self.attribute_values:
                    return list(self.attribute_values[attr.attribute_key])
            out: list[str] = []
            for vals in self.attribute_values.values():
                out.extend(vals)
            return out
        return []  # existence claims have no replacement candidates

    def to_dict(self) -> dict:
        return {"labels": self.labels, "predicates": self.predicates,
                "attribute_values": self.attribute_values}

    @classmethod
    def from_dict(cls, d: dict) -> "Ontology":
        return cls(list(d.get("labels", [])), list(d.get("predicates", [])),
                   {k: list(v) for k, v in d.get("attribute_values", {}).items()})


@dataclass
class GraphSize:
    entities: int = 4
    relations: int = 2
    attributes: int = 2
    frames: int = 5


@dataclass
class CorruptionSpec:
    label_swap_rate: float = 0.0
    predicate_swap_rate: float = 0.0
    attr_flip_rate: float = 0.0
    spurious_entity_rate: float = 0.0
    missing_entity_rate: float = 0.0
    rng_seed: int = 0

    def validate(self) -> None:
        for name in ("label_swap_rate", "predicate_swap_rate", "attr_flip_rate",
                     "spurious_entity_rate", "missing_entity_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name}={rate} outside [0,1]")


def _random_box(rng: random.Random):
    x1 = rng.uniform(0.0, 0.6)
    y1 = rng.uniform(0.0, 0.6)
    return (x1, y1, x1 + rng.uniform(0.2, 0.39), y1 + rng.uniform(0.2, 0.39))


def _span(rng: random.Random, frames: int) -> list[int]:
    start = rng.randrange(frames)
    end = rng.randrange(start, frames)
    return list(range(start, end + 1))


def generate_truth(size: GraphSize, seed: int, ontology: Ontology | None = None) -> tuple[GraphState, Ontology]:
    """Sample a valid ground-truth graph of the requested size."""
    ontology = ontology or Ontology()
    rng = random.Random(f"{seed}|truth")
    graph = GraphState(frames=list(range(size.frames)))
    for i in range(size.entities):
        eid = f"e{i}"
        span = _span(rng, size.frames)
        graph.entities[eid] = EntityNode(
            entity_id=eid,
            canonical_label=rng.choice(ontology.labels),
            spatial_extent={f: _random_box(rng) for f in span},
            frame_ids=set(span),
        )
    ids = sorted(graph.entities)
    made = set()
    attempts = 0
    while len(graph.relations) < size.relations and attempts < 200:
        attempts += 1
        subj, obj = rng.sample(ids, 2)
        shared = sorted(graph.entities[subj].frame_ids & graph.entities[obj].frame_ids)
        if not shared or (subj, obj) in made:
            continue
        made.add((subj, obj))
        rid = f"r{len(graph.relations)}"
        graph.relations[rid] = RelationEdge(rid, subj, rng.choice(ontology.predicates),
                                            obj, set(shared))
    for i in range(size.attributes):
        eid = ids[i % len(ids)]
        key = list(ontology.attribute_values)[i % len(ontology.attribute_values)]
        frames = sorted(graph.entities[eid].frame_ids)
        sub = frames[: max(1, rng.randrange(1, len(frames) + 1))]
        aid = f"a{i}"
        graph.attributes[aid] = AttributeAssertion(
            aid, eid, key, rng.choice(ontology.attribute_values[key]), set(sub))
    graph.validate()
    return graph, ontology


def corrupt(truth: GraphState, spec: CorruptionSpec, ontology: Ontology) -> GraphState:
    """Independently inject each configured error type into a copy of truth."""
    spec.validate()
    rng = random.Random(f"{spec.rng_seed}|corrupt")
    g = truth.copy()

    def swap(value: str, pool: list[str]) -> str:
        alternatives = [v for v in pool if v != value]
        return rng.choice(alternatives) if alternatives else value

    for ent in sorted(g.entities.values(), key=lambda e: e.entity_id):
        if rng.random() < spec.label_swap_rate:
            ent.canonical_label = swap(ent.canonical_label, ontology.labels)
    for rel in sorted(g.relations.values(), key=lambda r: r.relation_id):
        if rng.random() < spec.predicate_swap_rate:
            rel.predicate = swap(rel.predicate, ontology.predicates)
    for attr in sorted(g.attributes.values(), key=lambda a: a.attribute_id):
        if rng.random() < spec.attr_flip_rate:
            attr.attribute_value = swap(attr.attribute_value,
                                        ontology.attribute_values.get(attr.attribute_key, []))

    truth_ids = sorted(truth.entities)
    spurious = 0
    for eid in truth_ids:
        if rng.random() < spec.spurious_entity_rate:
            sid = f"spur{spurious}"
            spurious += 1
            span = _span(rng, len(g.frames) or 1)
            g.entities[sid] = EntityNode(
                sid, rng.choice(ontology.labels),
                {f: _random_box(rng) for f in span}, set(span))
    for eid in truth_ids:
        if rng.random() < spec.missing_entity_rate and eid in g.entities:
            g.remove_entity(eid)

    g.validate()
    return g


def synth_generate(size: GraphSize, spec: CorruptionSpec) -> tuple[GraphState, GraphState, Ontology]:
    """Ground-truth graph, corrupted twin, and the closed ontology they use."""
    truth, ontology = generate_truth(size, spec.rng_seed)
    corrupted = corrupt(truth, spec, ontology)
    return truth, corrupted, ontology
