import pytest

from claimloop.claims import Claim, ClaimType, DependencyGraph, ElementRef
from claimloop.constructor import decompose_claims, derive_dependencies
from claimloop.graph import AttributeAssertion, EntityNode, GraphState, RelationEdge
from claimloop.memory import SemanticMemory


def make_graph(n_entities=2, relation=True, attribute=True) -> GraphState:
    g = GraphState(frames=[0, 1, 2])
    for i in range(n_entities):
        eid = f"e{i}"
        g.entities[eid] = EntityNode(
            entity_id=eid,
            canonical_label=["dog", "cat", "person", "car"][i % 4],
            spatial_extent={0: (0.1 * (i + 1), 0.1, 0.1 * (i + 1) + 0.2, 0.4),
                            1: (0.1 * (i + 1), 0.1, 0.1 * (i + 1) + 0.2, 0.4)},
            frame_ids={0, 1},
        )
    if relation and n_entities >= 2:
        g.relations["r0"] = RelationEdge("r0", "e0", "next_to", "e1", {0, 1})
    if attribute:
        g.attributes["a0"] = AttributeAssertion("a0", "e0", "color", "red", {0})
    return g


@pytest.fixture
def graph():
    return make_graph()


def make_memory(g: GraphState | None = None) -> SemanticMemory:
    g = g or make_graph()
    claims = decompose_claims(g)
    deps = derive_dependencies(claims, g)
    return SemanticMemory.init_memory(g, claims, deps)


@pytest.fixture
def memory():
    return make_memory()


def chain_memory(n: int) -> SemanticMemory:
    """n label claims on n entities wired into an explicit dependency chain."""
    g = GraphState(frames=[0])
    claims: dict[str, Claim] = {}
    deps = DependencyGraph()
    for i in range(n):
        eid = f"e{i}"
        g.entities[eid] = EntityNode(eid, "dog", {0: (0.1, 0.1, 0.3, 0.3)}, {0})
        cid = f"label:{eid}"
        claims[cid] = Claim(cid, ClaimType.LABEL, ElementRef("entity", eid), "dog", (0, 0))
    ordered = sorted(claims)
    for a, b in zip(ordered, ordered[1:]):
        deps.add_edge(a, b)
    return SemanticMemory.init_memory(g, claims, deps)
