"""Scene-graph state: entities, relations, attributes, keyed by keyframe.

The graph is stored as flat element tables (entity/relation/attribute, each
carrying the set of keyframes it appears in) plus a frame index. Per-frame
slices are derived views, so identity, relations, and attributes can be
revised independently without touching the others.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field


class GraphError(ValueError):
    """Raised when a graph element violates a structural invariant."""


Box = tuple[float, float, float, float]  # (x1, y1, x2, y2), normalized


def validate_box(box) -> Box:
    if len(box) != 4:
        raise GraphError(f"bounding region must have 4 coordinates, got {box!r}")
    x1, y1, x2, y2 = (float(v) for v in box)
    if not all(0.0 <= v <= 1.0 for v in (x1, y1, x2, y2)):
        raise GraphError(f"bounding region {box!r} outside [0,1]")
    if x2 <= x1 or y2 <= y1:
        raise GraphError(f"bounding region {box!r} has non-positive area")
    return (x1, y1, x2, y2)


def box_iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two normalized boxes."""
    ix1, iy1 = max(a[0], b[0]), max(a[1], b[1])
    ix2, iy2 = min(a[2], b[2]), min(a[3], b[3])
    if ix2 <= ix1 or iy2 <= iy1:
        return 0.0
    inter = (ix2 - ix1) * (iy2 - iy1)
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


@dataclass
class EntityNode:
    entity_id: str
    canonical_label: str
    spatial_extent: dict[int, Box]  # frame_id -> box
    frame_ids: set[int]

    def validate(self, frame_index: set[int]) -> None:
        if not self.canonical_label:
            raise GraphError(f"entity {self.entity_id}: empty label")
        missing = self.frame_ids - frame_index
        if missing:
            raise GraphError(f"entity {self.entity_id}: frames {sorted(missing)} not in frame index")
        for fid, box in self.spatial_extent.items():
            if fid not in self.frame_ids:
                raise GraphError(f"entity {self.entity_id}: extent for frame {fid} outside frame_ids")
            validate_box(box)

    def to_dict(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "canonical_label": self.canonical_label,
            "spatial_extent": {str(f): list(b) for f, b in sorted(self.spatial_extent.items())},
            "frame_ids": sorted(self.frame_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EntityNode":
        return cls(
            entity_id=d["entity_id"],
            canonical_label=d["canonical_label"],
            spatial_extent={int(f): validate_box(b) for f, b in d.get("spatial_extent", {}).items()},
            frame_ids=set(int(f) for f in d["frame_ids"]),
        )


@dataclass
class RelationEdge:
    relation_id: str
    subject: str
    predicate: str
    object: str
    frame_ids: set[int]

    def validate(self, entity_ids: set[str]) -> None:
        if self.subject == self.object:
            raise GraphError(f"relation {self.relation_id}: subject equals object ({self.subject})")
        if not self.predicate:
            raise GraphError(f"relation {self.relation_id}: empty predicate")
        for end in (self.subject, self.object):
            if end not in entity_ids:
                raise GraphError(f"relation {self.relation_id}: endpoint {end} not in graph")

    def to_dict(self) -> dict:
        return {
            "relation_id": self.relation_id,
            "subject": self.subject,
            "predicate": self.predicate,
            "object": self.object,
            "frame_ids": sorted(self.frame_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RelationEdge":
        return cls(d["relation_id"], d["subject"], d["predicate"], d["object"],
                   set(int(f) for f in d["frame_ids"]))


@dataclass
class AttributeAssertion:
    attribute_id: str
    entity_id: str
    attribute_key: str
    attribute_value: str
    frame_ids: set[int]

    def validate(self, entity_ids: set[str]) -> None:
        if not self.attribute_key:
            raise GraphError(f"attribute {self.attribute_id}: empty key")
        if self.entity_id not in entity_ids:
            raise GraphError(f"attribute {self.attribute_id}: entity {self.entity_id} not in graph")

    def to_dict(self) -> dict:
        return {
            "attribute_id": self.attribute_id,
            "entity_id": self.entity_id,
            "attribute_key": self.attribute_key,
            "attribute_value": self.attribute_value,
            "frame_ids": sorted(self.frame_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeAssertion":
        return cls(d["attribute_id"], d["entity_id"], d["attribute_key"],
                   d["attribute_value"], set(int(f) for f in d["frame_ids"]))


@dataclass
class GraphState:
    """Video-level graph: union of frame slices over a fixed frame index."""

    frames: list[int] = field(default_factory=list)
    entities: dict[str, EntityNode] = field(default_factory=dict)
    relations: dict[str, RelationEdge] = field(default_factory=dict)
    attributes: dict[str, AttributeAssertion] = field(default_factory=dict)
    version: int = 0

    def validate(self) -> None:
        frame_index = set(self.frames)
        ids = set(self.entities)
        for eid, ent in self.entities.items():
            if eid != ent.entity_id:
                raise GraphError(f"entity table key {eid} != entity_id {ent.entity_id}")
            ent.validate(frame_index)
        for rel in self.relations.values():
            rel.validate(ids)
            if not rel.frame_ids <= frame_index:
                raise GraphError(f"relation {rel.relation_id}: frames outside index")
        for attr in self.attributes.values():
            attr.validate(ids)
            if not attr.frame_ids <= frame_index:
                raise GraphError(f"attribute {attr.attribute_id}: frames outside index")

    def frame_slice(self, frame_id: int):
        """Per-frame view: (entities, relations, attributes) present in the frame."""
        ents = [e for e in self.entities.values() if frame_id in e.frame_ids]
        rels = [r for r in self.relations.values() if frame_id in r.frame_ids]
        attrs = [a for a in self.attributes.values() if frame_id in a.frame_ids]
        return ents, rels, attrs

    def entities_in_frame(self, frame_id: int) -> int:
        return sum(1 for e in self.entities.values() if frame_id in e.frame_ids)

    def remove_entity(self, entity_id: str) -> tuple[list[str], list[str]]:
        """Delete an entity and everything referencing it.

        Returns (removed_relation_ids, removed_attribute_ids)."""
        if entity_id not in self.entities:
            raise GraphError(f"unknown entity {entity_id}")
        dead_rels = [r.relation_id for r in self.relations.values()
                     if entity_id in (r.subject, r.object)]
        dead_attrs = [a.attribute_id for a in self.attributes.values()
                      if a.entity_id == entity_id]
        for rid in dead_rels:
            del self.relations[rid]
        for aid in dead_attrs:
            del self.attributes[aid]
        del self.entities[entity_id]
        return dead_rels, dead_attrs

    def element(self, kind: str, ref_id: str):
        table = {"entity": self.entities, "relation": self.relations,
                 "attribute": self.attributes}[kind]
        return table.get(ref_id)

    def copy(self) -> "GraphState":
        return copy.deepcopy(self)

    def to_dict(self) -> dict:
        return {
            "frames": sorted(self.frames),
            "entities": [e.to_dict() for _, e in sorted(self.entities.items())],
            "relations": [r.to_dict() for _, r in sorted(self.relations.items())],
            "attributes": [a.to_dict() for _, a in sorted(self.attributes.items())],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GraphState":
        g = cls(frames=[int(f) for f in d.get("frames", [])])
        for ed in d.get("entities", []):
            ent = EntityNode.from_dict(ed)
            g.entities[ent.entity_id] = ent
        for rd in d.get("relations", []):
            rel = RelationEdge.from_dict(rd)
            g.relations[rel.relation_id] = rel
        for ad in d.get("attributes", []):
            attr = AttributeAssertion.from_dict(ad)
            g.attributes[attr.attribute_id] = attr
        return g

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)
