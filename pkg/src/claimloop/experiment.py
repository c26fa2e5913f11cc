"""Scenario runner and experiment suites: seeded synthetic graphs, oracle
agents, oracle-simulated arbitration, and machine-readable results tables."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .agents import OracleConfig, ProbeBudget, make_oracle_agents
from .arbitration import UtilityWeights
from .constructor import decompose_claims, derive_dependencies
from .engine import Engine, EngineConfig
from .fusion import DEFAULT_ROLE_WEIGHTS, FusionConfig, uniform_role_weights
from .memory import SemanticMemory
from .metrics import MetricReport, compute_metrics, entity_accuracy, graph_edit_distance
from .synth import CorruptionSpec, GraphSize, synth_generate

# Claim count = 2*entities + attributes + relations, pinned per density
# regime; entity counts stay within the exact-GED search budget.
REGIME_SIZES = {
    "low": GraphSize(entities=3, relations=1, attributes=1),      # 8 claims
    "medium": GraphSize(entities=6, relations=2, attributes=2),   # 16 claims
    "high": GraphSize(entities=9, relations=6, attributes=4),     # 28 claims
}

# Role noise mirrors the reliability ordering the weight matrix compensates
# for: grounding is precise, temporal reasoning mid, caption-level audit
# noisiest. Rates are per probe; abstention also scales with scene clutter.
DEFAULT_NOISE = {
    "flip_rate": 0.10, "abstain_rate": 0.15, "invalid_rate": 0.05,
    "clutter_abstain_scale": 0.35,
    "role_rates": {
        "local_grounding": {"flip_rate": 0.04, "invalid_rate": 0.03},
        "temporal_consistency": {"flip_rate": 0.10},
        "global_audit": {"flip_rate": 0.22, "abstain_rate": 0.20, "invalid_rate": 0.08},
    },
}
DEFAULT_CORRUPTION = {"label_swap_rate": 0.3, "predicate_swap_rate": 0.3,
                      "attr_flip_rate": 0.3, "spurious_entity_rate": 0.15,
                      "missing_entity_rate": 0.1}
INONTOLOGY_CORRUPTION = {"label_swap_rate": 0.4, "predicate_swap_rate": 0.4,
                         "attr_flip_rate": 0.4, "spurious_entity_rate": 0.0,
                         "missing_entity_rate": 0.0}


@dataclass
class ScenarioSpec:
    name: str
    size: GraphSize
    corruption: dict
    noise: dict
    seed: int


@dataclass
class ScenarioResult:
    name: str
    seed: int
    report: MetricReport
    rounds_run: int
    answers: int
    claim_count: int

    def row(self) -> dict:
        r = self.report
        return {
            "scenario": self.name,
            "density": r.density,
            "inv_probe": round(r.inv_probe, 6),
            "uncert": round(r.uncert, 6),
            "claim_agr": round(r.claim_agr, 6),
            "resolve": round(r.resolve, 6),
            "human_qpf": round(r.human_qpf, 6),
            "entity_acc": round(r.entity_acc, 6),
            "ged_norm": round(r.ged_norm, 6) if r.ged_norm is not None else "",
            "calls_actual": r.calls_actual,
            "calls_full": r.calls_full,
            "reduction_ratio": (round(r.reduction_ratio, 6)
                                if r.reduction_ratio is not None else ""),
        }


RESULT_COLUMNS = ["scenario", "density", "inv_probe", "uncert", "claim_agr",
                  "resolve", "human_qpf", "entity_acc", "ged_norm",
                  "calls_actual", "calls_full", "reduction_ratio"]


def run_scenario(spec: ScenarioSpec, engine_config: EngineConfig | None = None,
                 weights_mode: str = "role_aware",
                 answer_queue: bool = True) -> ScenarioResult:
    """One seeded end-to-end run with oracle arbitration."""
    truth, corrupted, ontology = synth_generate(
        spec.size, CorruptionSpec(rng_seed=spec.seed, **spec.corruption))
    claims = decompose_claims(corrupted)
    deps = derive_dependencies(claims, corrupted)
    memory = SemanticMemory.init_memory(corrupted, claims, deps)
    agents = make_oracle_agents(OracleConfig(ground_truth=truth, rng_seed=spec.seed,
                                             **spec.noise))
    config = engine_config or EngineConfig()
    if weights_mode == "uniform":
        config.weights = uniform_role_weights()
    engine = Engine(memory, agents, ontology, config)
    reports = engine.run_refinement()
    answers = engine.oracle_answer_all(truth) if answer_queue else 0
    report = engine.metrics_report()
    report.entity_acc = entity_accuracy(memory.graph, truth)
    try:
        report.ged_norm = graph_edit_distance(memory.graph, truth, max_nodes=12)
    except ValueError:
        report.ged_norm = None  # oversized for exact search; left unsampled
    return ScenarioResult(name=spec.name, seed=spec.seed, report=report,
                          rounds_run=len(reports), answers=answers,
                          claim_count=len(memory.claims))


def default_suite_specs(base_seed: int = 0, noise: dict | None = None,
                        corruption: dict | None = None) -> list[ScenarioSpec]:
    """The default mixed suite: density-weighted toward medium/high, where
    localized closures pay off."""
    noise = noise or dict(DEFAULT_NOISE)
    corruption = corruption or dict(DEFAULT_CORRUPTION)
    specs = []
    mix = [("low", 2), ("medium", 4), ("high", 6)]
    for regime, count in mix:
        for k in range(count):
            seed = base_seed * 1000 + len(specs)
            specs.append(ScenarioSpec(name=f"{regime}-{k}", size=REGIME_SIZES[regime],
                                      corruption=corruption, noise=noise, seed=seed))
    return specs


def noiseless_suite_specs(n_seeds: int = 50, base_seed: int = 100) -> list[ScenarioSpec]:
    """In-ontology value corruption, zero oracle noise: the loop must close."""
    zero_noise = {"flip_rate": 0.0, "abstain_rate": 0.0, "invalid_rate": 0.0,
                  "clutter_abstain_scale": 0.0}
    sizes = ["low", "medium", "high"]
    return [ScenarioSpec(name=f"noiseless-{i}", size=REGIME_SIZES[sizes[i % 3]],
                         corruption=dict(INONTOLOGY_CORRUPTION), noise=zero_noise,
                         seed=base_seed + i)
            for i in range(n_seeds)]


def density_suite_specs(seeds_per_regime: int = 24, base_seed: int = 500,
                        noise: dict | None = None) -> list[ScenarioSpec]:
    """Fixed noise, value-only corruption so claim counts stay pinned to the
    regime boundaries (8, 16, 29 claims)."""
    noise = noise or dict(DEFAULT_NOISE)
    corruption = {"label_swap_rate": 0.3, "predicate_swap_rate": 0.3,
                  "attr_flip_rate": 0.3, "spurious_entity_rate": 0.0,
                  "missing_entity_rate": 0.0}
    specs = []
    for regime in ("low", "medium", "high"):
        for i in range(seeds_per_regime):
            specs.append(ScenarioSpec(name=f"density-{regime}-{i}",
                                      size=REGIME_SIZES[regime],
                                      corruption=corruption, noise=noise,
                                      seed=base_seed + i))
    return specs


@dataclass
class ExperimentConfig:
    suite: str = "default"  # default | noiseless | density | ablation | all
    base_seed: int = 0
    noiseless_seeds: int = 50
    density_seeds: int = 24
    ablation_seeds: int = 20
    noise: dict = field(default_factory=lambda: dict(DEFAULT_NOISE))
    corruption: dict = field(default_factory=lambda: dict(DEFAULT_CORRUPTION))
    fusion: FusionConfig = field(default_factory=FusionConfig)
    utility: UtilityWeights = field(default_factory=UtilityWeights)
    budget: ProbeBudget = field(default_factory=ProbeBudget)

    def engine_config(self, rounds_max: int | None = None,
                      weights_mode: str = "role_aware") -> EngineConfig:
        fusion = FusionConfig(**{**asdict(self.fusion),
                                 **({"rounds_max": rounds_max} if rounds_max else {})})
        weights = (uniform_role_weights() if weights_mode == "uniform"
                   else {r: dict(v) for r, v in DEFAULT_ROLE_WEIGHTS.items()})
        return EngineConfig(fusion=fusion,
                            utility=UtilityWeights(**asdict(self.utility)),
                            budget=ProbeBudget(**asdict(self.budget)),
                            weights=weights)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        cfg = cls()
        for key in ("suite", "base_seed", "noiseless_seeds", "density_seeds",
                    "ablation_seeds"):
            if key in d:
                setattr(cfg, key, d[key])
        cfg.noise.update(d.get("noise", {}))
        cfg.corruption.update(d.get("corruption", {}))
        if "fusion" in d:
            cfg.fusion = FusionConfig(**{**asdict(FusionConfig()), **d["fusion"]})
        if "utility" in d:
            cfg.utility = UtilityWeights(**{**asdict(UtilityWeights()), **d["utility"]})
        if "budget" in d:
            cfg.budget = ProbeBudget(**{**asdict(ProbeBudget()), **d["budget"]})
        return cfg


@dataclass
class ExperimentResult:
    suite: str
    rows: list[dict]
    aggregates: dict
    ablation: dict = field(default_factory=dict)
    density_trend: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"suite": self.suite, "rows": self.rows, "aggregates": self.aggregates,
                "ablation": self.ablation, "density_trend": self.density_trend}


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def summarize(results: list[ScenarioResult]) -> dict:
    reports = [r.report for r in results]
    agg: dict = {
        "scenarios": len(results),
        "mean_inv_probe": _mean([r.inv_probe for r in reports]),
        "mean_uncert": _mean([r.uncert for r in reports]),
        "mean_claim_agr": _mean([r.claim_agr for r in reports]),
        "mean_resolve": _mean([r.resolve for r in reports]),
        "mean_human_qpf": _mean([r.human_qpf for r in reports]),
        "mean_entity_acc": _mean([r.entity_acc for r in reports]),
        "mean_ged_norm": _mean([r.ged_norm for r in reports]),
        "mean_reduction_ratio": _mean([r.reduction_ratio for r in reports]),
        "calls_actual_total": sum(r.calls_actual for r in reports),
        "calls_full_total": sum(r.calls_full for r in reports),
    }
    by_regime: dict = {}
    for result in results:
        by_regime.setdefault(result.report.density, []).append(result.report)
    agg["by_density"] = {
        regime: {
            "scenarios": len(reps),
            "mean_human_qpf": _mean([r.human_qpf for r in reps]),
            "mean_uncert": _mean([r.uncert for r in reps]),
            "mean_resolve": _mean([r.resolve for r in reps]),
            "mean_inv_probe": _mean([r.inv_probe for r in reps]),
            "mean_claim_agr": _mean([r.claim_agr for r in reps]),
        }
        for regime, reps in sorted(by_regime.items())
    }
    return agg


def run_density_trend(config: ExperimentConfig) -> tuple[list[ScenarioResult], dict]:
    specs = density_suite_specs(config.density_seeds, noise=config.noise)
    results = [run_scenario(s, config.engine_config()) for s in specs]
    trend: dict = {}
    for regime in ("low", "medium", "high"):
        regime_results = [r for r in results if r.name.startswith(f"density-{regime}")]
        trend[regime] = {
            "mean_human_qpf": _mean([r.report.human_qpf for r in regime_results]),
            "mean_uncert": _mean([r.report.uncert for r in regime_results]),
            "claim_counts": sorted({r.claim_count for r in regime_results}),
        }
    return results, trend


def run_ablation(config: ExperimentConfig) -> dict:
    """Paired arms over identical seeds: uniform vs role-aware weights, and
    one round vs two."""
    noise = dict(config.noise)
    corruption = dict(config.corruption)
    specs = []
    for i in range(config.ablation_seeds):
        regime = ("medium", "high")[i % 2]
        specs.append(ScenarioSpec(name=f"ablation-{regime}-{i}",
                                  size=REGIME_SIZES[regime], corruption=corruption,
                                  noise=noise, seed=9000 + i))
    arms = {
        "role_aware": [run_scenario(s, config.engine_config()) for s in specs],
        "uniform": [run_scenario(s, config.engine_config(weights_mode="uniform"),
                                 weights_mode="uniform") for s in specs],
        "rounds1": [run_scenario(s, config.engine_config(rounds_max=1)) for s in specs],
        "rounds2": [run_scenario(s, config.engine_config(rounds_max=2)) for s in specs],
    }
    return {
        "arms": {name: summarize(results) for name, results in arms.items()},
        "human_qpf": {name: _mean([r.report.human_qpf for r in results])
                      for name, results in arms.items()},
        "resolve": {name: _mean([r.report.resolve for r in results])
                    for name, results in arms.items()},
    }


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    rows: list[dict] = []
    all_results: list[ScenarioResult] = []
    ablation: dict = {}
    density_trend: dict = {}

    if config.suite in ("default", "all"):
        results = [run_scenario(s, config.engine_config())
                   for s in default_suite_specs(config.base_seed, config.noise,
                                                config.corruption)]
        all_results.extend(results)
    if config.suite in ("noiseless", "all"):
        results = [run_scenario(s, config.engine_config())
                   for s in noiseless_suite_specs(config.noiseless_seeds)]
        all_results.extend(results)
    if config.suite in ("density", "all"):
        results, density_trend = run_density_trend(config)
        all_results.extend(results)
    if config.suite in ("ablation", "all"):
        ablation = run_ablation(config)
    if config.suite not in ("default", "noiseless", "density", "ablation", "all"):
        raise ValueError(f"unknown suite {config.suite!r}")

    rows = [r.row() for r in all_results]
    return ExperimentResult(suite=config.suite, rows=rows,
                            aggregates=summarize(all_results) if all_results else {},
                            ablation=ablation, density_trend=density_trend)


def write_results(result: ExperimentResult, out_dir) -> dict[str, Path]:
    """Emit results.csv, the JSON twin, and the report figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    csv_path = out / "results.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        writer.writerows(result.rows)
    paths["csv"] = csv_path

    json_path = out / "results.json"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
    paths["json"] = json_path

    from .report import render_figures

    paths.update(render_figures(result, out))
    return paths
