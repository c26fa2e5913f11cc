"""Typed atomic claims over graph elements, and the claim dependency graph."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .graph import GraphState


class ClaimType(str, Enum):
    EXIST = "exist"
    LABEL = "label"
    ATTR = "attr"
    REL = "rel"


class ClaimStatus(str, Enum):
    PENDING = "pending"
    SUPPORTED = "supported"
    CONTRADICTED = "contradicted"
    REVISED = "revised"
    ESCALATED = "escalated"
    HUMAN_RESOLVED = "human_resolved"
    LOCKED = "locked"


# Statuses the automated refinement rounds may still probe.
PROBEABLE_STATUSES = frozenset({ClaimStatus.PENDING, ClaimStatus.CONTRADICTED})
# Statuses automated writes may never touch again.
PROTECTED_STATUSES = frozenset({ClaimStatus.HUMAN_RESOLVED, ClaimStatus.LOCKED})

EXIST_VALUE = "present"  # asserted_value carried by existence claims


@dataclass
class ElementRef:
    kind: str  # entity | relation | attribute
    ref_id: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "ref_id": self.ref_id}

    @classmethod
    def from_dict(cls, d: dict) -> "ElementRef":
        return cls(d["kind"], d["ref_id"])


@dataclass
class Claim:
    claim_id: str
    claim_type: ClaimType
    target: ElementRef
    asserted_value: str
    temporal_extent: tuple[int, int]  # inclusive frame-id interval
    status: ClaimStatus = ClaimStatus.PENDING
    belief: float | None = None

    def entity_scope(self, graph: GraphState) -> set[str]:
        """Entities this claim constrains (rel claims touch both endpoints)."""
        if self.claim_type is ClaimType.REL:
            rel = graph.relations.get(self.target.ref_id)
            return {rel.subject, rel.object} if rel else set()
        if self.claim_type is ClaimType.ATTR:
            attr = graph.attributes.get(self.target.ref_id)
            return {attr.entity_id} if attr else set()
        return {self.target.ref_id}

    def to_dict(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "claim_type": self.claim_type.value,
            "target": self.target.to_dict(),
            "asserted_value": self.asserted_value,
            "temporal_extent": list(self.temporal_extent),
            "status": self.status.value,
            "belief": self.belief,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Claim":
        return cls(
            claim_id=d["claim_id"],
            claim_type=ClaimType(d["claim_type"]),
            target=ElementRef.from_dict(d["target"]),
            asserted_value=d["asserted_value"],
            temporal_extent=(int(d["temporal_extent"][0]), int(d["temporal_extent"][1])),
            status=ClaimStatus(d["status"]),
            belief=d.get("belief"),
        )


def extents_overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


class DependencyGraph:
    """Directed edges c -> c' meaning a revision to c structurally constrains c'."""

    def __init__(self, edges=()):
        self.edges: set[tuple[str, str]] = set()
        self._out: dict[str, set[str]] = {}
        self._in: dict[str, set[str]] = {}
        for a, b in edges:
            self.add_edge(a, b)

    def add_edge(self, src: str, dst: str) -> None:
        if src == dst:
            raise ValueError(f"self-dependency on claim {src}")
        if (src, dst) in self.edges:
            return
        self.edges.add((src, dst))
        self._out.setdefault(src, set()).add(dst)
        self._in.setdefault(dst, set()).add(src)

    def neighbors(self, claim_id: str) -> set[str]:
        """One-step adjacency in either direction (dependents and supporters)."""
        return self._out.get(claim_id, set()) | self._in.get(claim_id, set())

    def out_degree(self, claim_id: str) -> int:
        return len(self._out.get(claim_id, set()))

    def max_out_degree(self) -> int:
        return max((len(v) for v in self._out.values()), default=0)

    def remove_claim(self, claim_id: str) -> None:
        dead = [(a, b) for (a, b) in self.edges if claim_id in (a, b)]
        for a, b in dead:
            self.edges.discard((a, b))
            self._out.get(a, set()).discard(b)
            self._in.get(b, set()).discard(a)

    def copy(self) -> "DependencyGraph":
        return DependencyGraph(self.edges)

    def to_list(self) -> list[list[str]]:
        return [list(e) for e in sorted(self.edges)]

    @classmethod
    def from_list(cls, pairs) -> "DependencyGraph":
        return cls((a, b) for a, b in pairs)


def claims_to_dicts(claims: dict[str, Claim]) -> list[dict]:
    return [claims[cid].to_dict() for cid in sorted(claims)]


def claims_from_dicts(items) -> dict[str, Claim]:
    out = {}
    for d in items:
        c = Claim.from_dict(d)
        out[c.claim_id] = c
    return out
