"""Verification-behavior metrics, structural quality scores, and the run
trace they are computed from."""

from __future__ import annotations

import heapq
from collections import Counter
from dataclasses import dataclass, field

from .graph import GraphState
from .claims import ClaimStatus
from .memory import SemanticMemory


class RunTrace:
    """Accumulates probe, evidence, queue, and re-verification records for one run."""

    def __init__(self, keyframes: int):
        self.keyframes = keyframes
        self.rounds: list[dict] = []
        self.evidence_by_claim: dict[str, list[dict]] = {}
        self.probed_claims: set[str] = set()
        self.last_probe_round: dict[str, int] = {}
        self.probe_count = 0
        self.invalid_count = 0
        self.total_calls = 0
        self.queries_issued: list[dict] = []
        self.answers: list[dict] = []
        self.reverify_events: list[dict] = []
        self._round_seq = 0

    def next_round_no(self) -> int:
        self._round_seq += 1
        return self._round_seq

    def record_round(self, report, probe_result) -> None:
        self._round_seq = max(self._round_seq, report.round_no)
        self.rounds.append({
            "round": report.round_no,
            "calls": report.calls,
            "invalid": report.invalid_count,
            "probed": list(probe_result.probed_claims),
        })
        self.total_calls += report.calls
        self._absorb(probe_result, report.round_no)

    def record_reverify(self, result, probe_result=None, round_no: int = 0) -> None:
        self.reverify_events.append({
            "edited": sorted(result.plan.edited),
            "closure": sorted(result.plan.closure),
            "calls_actual": result.calls_actual,
            "calls_full": result.calls_full,
            "probed": list(result.probed_claims),
            "eligible_claims": result.eligible_claims,
        })
        self.total_calls += result.calls_actual
        if probe_result is not None:
            self._absorb(probe_result, round_no)

    def _absorb(self, probe_result, round_no: int) -> None:
        self.invalid_count += len(probe_result.invalid)
        self.probe_count += len(probe_result.invalid)
        for cid, tuples in probe_result.evidence.items():
            self.probed_claims.add(cid)
            self.last_probe_round[cid] = max(self.last_probe_round.get(cid, 0), round_no)
            bucket = self.evidence_by_claim.setdefault(cid, [])
            for ev in tuples:
                bucket.append(ev.to_dict())
                if ev.probed:
                    self.probe_count += 1

    def record_queue(self, items) -> None:
        for item in items:
            self.queries_issued.append({"item_id": item.item_id, "claim_id": item.claim_id,
                                        "utility": item.utility})

    def record_answer(self, item, answer: dict) -> None:
        self.answers.append({"item_id": item.item_id, "claim_id": item.claim_id,
                             "answer": dict(answer)})

    def queried_claims(self) -> set[str]:
        return {q["claim_id"] for q in self.queries_issued}

    def to_dict(self) -> dict:
        return {
            "keyframes": self.keyframes,
            "rounds": self.rounds,
            "probe_count": self.probe_count,
            "invalid_count": self.invalid_count,
            "total_calls": self.total_calls,
            "queries_issued": self.queries_issued,
            "answers": self.answers,
            "reverify_events": self.reverify_events,
            "evidence_by_claim": {c: list(v) for c, v in sorted(self.evidence_by_claim.items())},
            "last_probe_round": dict(sorted(self.last_probe_round.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunTrace":
        trace = cls(d.get("keyframes", 0))
        trace.rounds = d.get("rounds", [])
        trace.probe_count = d.get("probe_count", 0)
        trace.invalid_count = d.get("invalid_count", 0)
        trace.total_calls = d.get("total_calls", 0)
        trace.queries_issued = d.get("queries_issued", [])
        trace.answers = d.get("answers", [])
        trace.reverify_events = d.get("reverify_events", [])
        trace.evidence_by_claim = d.get("evidence_by_claim", {})
        trace.last_probe_round = {c: int(r) for c, r in d.get("last_probe_round", {}).items()}
        trace.probed_claims = set(trace.evidence_by_claim)
        trace._round_seq = max([r["round"] for r in trace.rounds], default=0)
        return trace


@dataclass
class MetricReport:
    inv_probe: float = 0.0
    uncert: float = 0.0
    claim_agr: float = 0.0
    resolve: float = 0.0
    human_qpf: float = 0.0
    entity_acc: float = 0.0
    ged_norm: float | None = 0.0
    density: str = "low"
    calls_actual: int = 0
    calls_full: int = 0
    reduction_ratio: float | None = None
    degenerate: bool = False
    resolve_degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "inv_probe": self.inv_probe,
            "uncert": self.uncert,
            "claim_agr": self.claim_agr,
            "resolve": self.resolve,
            "human_qpf": self.human_qpf,
            "entity_acc": self.entity_acc,
            "ged_norm": self.ged_norm,
            "density": self.density,
            "calls_actual": self.calls_actual,
            "calls_full": self.calls_full,
            "reduction_ratio": self.reduction_ratio,
            "degenerate": self.degenerate,
            "resolve_degenerate": self.resolve_degenerate,
        }


def density_regime(claim_count: int) -> str:
    if claim_count < 0:
        raise ValueError("claim count must be nonnegative")
    if claim_count < 10:
        return "low"
    if claim_count < 20:
        return "medium"
    return "high"


def compute_metrics(trace: RunTrace, memory: SemanticMemory) -> MetricReport:
    """Behavior metrics over a finished run trace.

    inv_probe: unparseable probes / all probes issued.
    uncert: probed claims whose every recorded verdict is abstention.
    claim_agr: agreement among non-abstaining roles, in the last round a
        claim was probed, over claims with at least two opinions.
    resolve: disputed claims settled without entering the human queue.
    human_qpf: arbitration queries issued per keyframe.
    """
    report = MetricReport()
    if trace.probe_count == 0:
        report.degenerate = True
        report.resolve = 1.0
        report.resolve_degenerate = True
        return report

    report.inv_probe = trace.invalid_count / trace.probe_count

    probed = sorted(trace.probed_claims)
    uncertain = 0
    for cid in probed:
        tuples = trace.evidence_by_claim.get(cid, [])
        if all(t["verdict"] == 0 for t in tuples):
            uncertain += 1
    report.uncert = uncertain / len(probed) if probed else 0.0

    with_opinions = 0
    agreeing = 0
    for cid in probed:
        last = trace.last_probe_round.get(cid, 0)
        verdicts = {}
        for t in trace.evidence_by_claim.get(cid, []):
            if t["round"] == last and t["probed"] and t["verdict"] != 0:
                verdicts[t["role"]] = t["verdict"]
        if len(verdicts) >= 2:
            with_opinions += 1
            if len(set(verdicts.values())) == 1:
                agreeing += 1
    report.claim_agr = agreeing / with_opinions if with_opinions else 0.0

    disputed = {cid for cid in probed
                if any(t["verdict"] == -1 and t["probed"]
                       for t in trace.evidence_by_claim.get(cid, []))}
    if disputed:
        queried = trace.queried_claims()
        resolved = 0
        for cid in disputed:
            claim = memory.claims.get(cid)
            if cid in queried or claim is None:
                continue
            if claim.status in (ClaimStatus.SUPPORTED, ClaimStatus.REVISED):
                resolved += 1
        report.resolve = resolved / len(disputed)
    else:
        report.resolve = 1.0
        report.resolve_degenerate = True

    report.human_qpf = (len(trace.queries_issued) / trace.keyframes
                        if trace.keyframes else 0.0)

    report.calls_actual = sum(e["calls_actual"] for e in trace.reverify_events)
    report.calls_full = sum(e["calls_full"] for e in trace.reverify_events)
    if report.calls_actual > 0:
        report.reduction_ratio = report.calls_full / report.calls_actual
    report.density = density_regime(len(memory.claims))
    return report


def entity_accuracy(pred: GraphState, truth: GraphState) -> float:
    """Fraction of truth entities whose predicted label matches exactly;
    a missing entity counts as a mismatch. Empty truth reports 1.0."""
    if not truth.entities:
        return 1.0
    hits = 0
    for eid, ent in truth.entities.items():
        pred_ent = pred.entities.get(eid)
        if pred_ent is not None and pred_ent.canonical_label == ent.canonical_label:
            hits += 1
    return hits / len(truth.entities)


# -- exact graph edit distance -------------------------------------------------

def _edge_table(graph: GraphState) -> dict[tuple[str, str], Counter]:
    table: dict[tuple[str, str], Counter] = {}
    for rel in graph.relations.values():
        table.setdefault((rel.subject, rel.object), Counter())[rel.predicate] += 1
    return table


def _pair_edge_cost(a: Counter | None, b: Counter | None) -> int:
    """Unit-cost alignment of two predicate multisets on one node pair:
    matched predicates are free, the rest substitute, the overhang is
    inserted or deleted."""
    na = sum(a.values()) if a else 0
    nb = sum(b.values()) if b else 0
    common = sum((a & b).values()) if a and b else 0
    return max(na, nb) - common


def graph_edit_distance(pred: GraphState, truth: GraphState,
                        max_nodes: int = 12) -> float:
    """Exact minimum-cost edit distance, normalized to [0, 1].

    Unit costs: node insert/delete/label-substitute, edge insert/delete/
    predicate-substitute. Normalization divides by the cost of deleting all
    of `pred` and inserting all of `truth`. Exact best-first search over node
    mappings; refuses graphs above `max_nodes` (sampled evaluation is out of
    scope here).
    """
    p_nodes = sorted(pred.entities)
    t_nodes = sorted(truth.entities)
    if len(p_nodes) > max_nodes or len(t_nodes) > max_nodes:
        raise ValueError(f"exact search limited to {max_nodes} nodes; "
                         "use sampled evaluation for larger graphs")
    p_edges = _edge_table(pred)
    t_edges = _edge_table(truth)
    denom = (len(p_nodes) + len(t_nodes)
             + sum(sum(c.values()) for c in p_edges.values())
             + sum(sum(c.values()) for c in t_edges.values()))
    if denom == 0:
        return 0.0

    p_labels = [pred.entities[n].canonical_label for n in p_nodes]
    t_labels = [truth.entities[n].canonical_label for n in t_nodes]
    p_index = {n: i for i, n in enumerate(p_nodes)}
    t_index = {n: j for j, n in enumerate(t_nodes)}
    # Edge mass incident to each node index, for the remaining-edge bound.
    p_edge_mass = [
        sum(sum(c.values()) for (u, w), c in p_edges.items()
            if max(p_index[u], p_index[w]) == i)
        for i in range(len(p_nodes))
    ]

    def heuristic(i: int, used: frozenset) -> int:
        # Admissible: remaining node ops (label-multiset matching) plus the
        # unavoidable remaining edge-mass imbalance. Node and edge costs are
        # disjoint, so the bounds add.
        rem_p = Counter(p_labels[i:])
        rem_t = Counter(t_labels[j] for j in range(len(t_nodes)) if j not in used)
        n_p, n_t = sum(rem_p.values()), sum(rem_t.values())
        common = sum((rem_p & rem_t).values())
        node_bound = max(n_p, n_t) - common
        rem_edges_p = sum(p_edge_mass[i:])
        rem_edges_t = sum(
            sum(c.values()) for (u, w), c in t_edges.items()
            if t_index[u] not in used or t_index[w] not in used)
        return node_bound + abs(rem_edges_p - rem_edges_t)

    def assign_cost(i: int, j: int | None, mapping: tuple) -> int:
        # Node cost plus edges between node i and already-processed nodes.
        cost = 1 if j is None else (0 if p_labels[i] == t_labels[j] else 1)
        u = p_nodes[i]
        for k in range(i):
            wk = mapping[k]
            w = p_nodes[k]
            for (pa, pb) in ((u, w), (w, u)):
                a = p_edges.get((pa, pb))
                if j is None or wk is None:
                    b = None
                else:
                    ta, tb = ((t_nodes[j], t_nodes[wk]) if (pa, pb) == (u, w)
                              else (t_nodes[wk], t_nodes[j]))
                    b = t_edges.get((ta, tb))
                if a or b:
                    cost += _pair_edge_cost(a, b)
        return cost

    def completion_cost(mapping: tuple) -> int:
        # All pred nodes processed: insert unmatched truth nodes and every
        # truth edge not already aligned to a mapped pair.
        used = {j for j in mapping if j is not None}
        cost = len(t_nodes) - len(used)
        mapped_pairs = set()
        for i, j in enumerate(mapping):
            for k, wk in enumerate(mapping):
                if j is not None and wk is not None and i != k:
                    mapped_pairs.add((t_nodes[j], t_nodes[wk]))
        for (ta, tb), preds in t_edges.items():
            if (ta, tb) not in mapped_pairs:
                cost += sum(preds.values())
        return cost

    # Best-first search over prefixes of the pred-node mapping. The heuristic
    # lower-bounds remaining node costs only, so completed totals are tracked
    # and the search drains until the frontier cannot beat the best total.
    import itertools as _it

    tiebreak = _it.count()
    heap: list[tuple] = [(heuristic(0, frozenset()), 0, 0, next(tiebreak), ())]
    best = None
    while heap:
        f, g, i, _, mapping = heapq.heappop(heap)
        if best is not None and f >= best:
            break
        if i == len(p_nodes):
            total = g + completion_cost(mapping)
            best = total if best is None else min(best, total)
            continue
        used = frozenset(j for j in mapping if j is not None)
        choices: list[int | None] = [None] + [j for j in range(len(t_nodes)) if j not in used]
        for j in choices:
            g2 = g + assign_cost(i, j, mapping)
            used2 = used | ({j} if j is not None else set())
            f2 = g2 + heuristic(i + 1, used2)
            if best is None or f2 < best:
                heapq.heappush(heap, (f2, g2, i + 1, next(tiebreak), mapping + (j,)))
    assert best is not None
    return best / denom
