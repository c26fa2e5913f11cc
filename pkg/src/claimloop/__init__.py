"""Claim-level supervisory verification over video scene graphs.

Library surface: versioned semantic memory with authority contracts and
replayable provenance, role-scoped verification agents, role-aware evidence
fusion, a utility-ranked human arbitration queue with dependency-closure
re-verification, and a synthetic metrics harness.
"""

from .agents import EvidenceTuple, InvalidProbe, OracleConfig, ProbeBudget, make_oracle_agents
from .arbitration import ArbitrationItem, ReverifyPlan, UtilityWeights, utility
from .claims import Claim, ClaimStatus, ClaimType, DependencyGraph
from .constructor import (
    SegmentDescriptor,
    build_memory,
    decompose_claims,
    derive_dependencies,
    ingest_graph,
    select_keyframes,
)
from .engine import Engine, EngineConfig, oracle_decision
from .fusion import (
    DEFAULT_ROLE_WEIGHTS,
    DirectionalScores,
    FusionConfig,
    aggregate,
    belief,
    classify_outcome,
    refinement_loop,
    score_candidates,
    select_correction,
)
from .graph import AttributeAssertion, EntityNode, GraphState, RelationEdge
from .memory import (
    AUTHORITY,
    Action,
    Actor,
    AuthorityError,
    Edit,
    ProvenanceEntry,
    SemanticMemory,
    replay,
)
from .metrics import MetricReport, RunTrace, compute_metrics, density_regime, entity_accuracy, graph_edit_distance
from .synth import CorruptionSpec, GraphSize, Ontology, synth_generate

__all__ = [name for name in dir() if not name.startswith("_")]
