"""Batch and interactive command-line interface."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .arbitration import AnswerMismatch
from .config import ServiceConfig
from .constructor import SegmentDescriptor, build_memory
from .engine import oracle_decision
from .claims import ClaimStatus
from .graph import GraphState
from .memory import MemoryError_, ReplayError
from .store import DataStore
from .synth import Ontology


def load_config(path: str | None) -> ServiceConfig:
    if path:
        return ServiceConfig.from_file(path)
    return ServiceConfig()


def fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Claim-level verification loop over video scene graphs."""


@main.command()
@click.option("--slices", "slices_path", required=True, type=click.Path(exists=True),
              help="Frame-slice JSON: {frame_id: {entities, relations, attributes}}.")
@click.option("--segments", "segments_path", type=click.Path(exists=True),
              help="Segment descriptor JSON: [{start, end, dynamic}].")
@click.option("--truth", "truth_path", type=click.Path(exists=True),
              help="Ground-truth graph JSON for the oracle backend.")
@click.option("--ontology", "ontology_path", type=click.Path(exists=True),
              help="Closed label/predicate/attribute-value lists.")
@click.option("--data-dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def ingest(slices_path, segments_path, truth_path, ontology_path, data_dir, config_path):
    """Build a memory from segments + frame slices and persist it."""
    config = load_config(config_path)
    with open(slices_path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        slices = {int(k): v for k, v in raw.items()}
    except (TypeError, ValueError, AttributeError):
        fail("slice file must map frame ids to slice objects")
    segments = None
    if segments_path:
        with open(segments_path, encoding="utf-8") as fh:
            segments = [SegmentDescriptor(int(s["start"]), int(s["end"]), bool(s["dynamic"]))
                        for s in json.load(fh)]
    try:
        memory = build_memory(slices, segments, budget=config.budget.keyframes,
                              iou_threshold=config.iou_threshold)
    except (ValueError, MemoryError_) as exc:
        fail(str(exc))
    if ontology_path:
        with open(ontology_path, encoding="utf-8") as fh:
            ontology = Ontology.from_dict(json.load(fh))
    else:
        from .service import _ontology_from_graph

        ontology = _ontology_from_graph(memory.graph)
    truth = None
    if truth_path:
        with open(truth_path, encoding="utf-8") as fh:
            truth = GraphState.from_dict(json.load(fh))
    store = DataStore(data_dir)
    store.save_initial(memory, ontology, truth)
    click.echo(f"memory initialized: {len(memory.graph.entities)} entities, "
               f"{len(memory.claims)} claims, version {memory.version}")


def _engine(data_dir, config_path, require_agents=False):
    config = load_config(config_path)
    store = DataStore(data_dir)
    try:
        return store, config, store.build_engine(config, require_agents=require_agents)
    except FileNotFoundError as exc:
        fail(str(exc))


@main.command()
@click.option("--data-dir", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
def verify(data_dir, config_path):
    """Run the bounded refinement loop over unresolved claims."""
    store, config, engine = _engine(data_dir, config_path, require_agents=True)
    reports = engine.run_refinement()
    store.sync(engine)
    click.echo(f"converged in {len(reports)} rounds" if len(reports) < config.fusion.rounds_max
               else f"stopped after {len(reports)} rounds (budget)")
    for report in reports:
        outcomes = {}
        for rec in report.records.values():
            outcomes[rec.outcome.value] = outcomes.get(rec.outcome.value, 0) + 1
        click.echo(f"  round {report.round_no}: {len(report.probed_claims)} claims probed, "
                   f"{report.calls} calls, {report.invalid_count} invalid, {outcomes}")
    click.echo(f"queue: {len(engine.open_items())} open items")


@main.command()
@click.option("--data-dir", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
def queue(data_dir, config_path):
    """List open arbitration items, highest utility first."""
    _, _, engine = _engine(data_dir, config_path)
    items = engine.open_items()
    if not items:
        click.echo("queue empty")
        return
    for item in items:
        comp = item.components
        click.echo(f"{item.item_id}  u={item.utility:.3f} "
                   f"(unc={comp['unc']:.2f} conflict={comp['conflict']:.2f} "
                   f"impact={comp['impact']:.2f})  {item.claim_id}  "
                   f"[{item.query['type']}]  {item.claim_text}")
        if item.query["type"] == "candidate_select":
            click.echo(f"    options: {', '.join(item.query['options'])}")


@main.command()
@click.option("--data-dir", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--item", "item_id", help="Queue item id to answer.")
@click.option("--claim", "claim_id", help="Answer the open item for this claim.")
@click.option("--confirm", is_flag=True, help="Binary confirm.")
@click.option("--reject", is_flag=True, help="Binary reject.")
@click.option("--select", "selected", help="Candidate value to select.")
@click.option("--all", "answer_all", is_flag=True,
              help="Answer every open item with oracle decisions (needs truth.json).")
def answer(data_dir, config_path, item_id, claim_id, confirm, reject, selected, answer_all):
    """Submit one human decision, or drain the queue from ground truth."""
    store, config, engine = _engine(data_dir, config_path, require_agents=True)
    if answer_all:
        truth = store.load_truth()
        if truth is None:
            fail("--all requires truth.json in the data dir")
        answered = engine.oracle_answer_all(truth)
        store.sync(engine)
        click.echo(f"answered {answered} items from ground truth; "
                   f"{len(engine.open_items())} open")
        return
    item = None
    if item_id:
        item = engine.find_item(item_id)
    elif claim_id:
        item = next((i for i in engine.open_items() if i.claim_id == claim_id), None)
    else:
        fail("provide --item, --claim, or --all")
    if item is None:
        fail(f"no open queue item for {item_id or claim_id}")
    if selected is not None:
        body = {"type": "candidate_select", "value": selected}
    elif confirm or reject:
        body = {"type": "binary", "value": "confirm" if confirm else "reject"}
    else:
        fail("provide --confirm, --reject, or --select VALUE")
    try:
        result = engine.answer(item.item_id, body)
    except AnswerMismatch as exc:
        fail(f"answer does not match query: {exc}")
    except MemoryError_ as exc:
        fail(str(exc))
    store.sync(engine)
    click.echo(f"answered {item.item_id} ({item.claim_id}); re-verified "
               f"{len(result.plan.closure)} claims with {result.calls_actual} calls "
               f"(full baseline {result.calls_full}); "
               f"{len(engine.open_items())} items open")


@main.command()
@click.option("--config", "config_name", default="default",
              help="Built-in suite name (default|noiseless|density|ablation|all) "
                   "or a JSON experiment config path.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def simulate(config_name, out_dir):
    """Run seeded synthetic experiments; write CSV, JSON, and figures."""
    from .experiment import ExperimentConfig, run_experiment, write_results

    if Path(config_name).exists():
        with open(config_name, encoding="utf-8") as fh:
            config = ExperimentConfig.from_dict(json.load(fh))
    else:
        config = ExperimentConfig(suite=config_name)
    try:
        result = run_experiment(config)
    except ValueError as exc:
        fail(str(exc))
    paths = write_results(result, out_dir)
    agg = result.aggregates
    if agg:
        click.echo(f"{agg['scenarios']} scenarios | "
                   f"entity_acc={agg['mean_entity_acc']:.3f} "
                   f"resolve={agg['mean_resolve']:.3f} "
                   f"human_qpf={agg['mean_human_qpf']:.3f} "
                   f"reduction={agg['mean_reduction_ratio'] or float('nan'):.1f}x")
    for kind, path in paths.items():
        click.echo(f"  {kind}: {path}")


@main.command()
@click.option("--data-dir", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def metrics(data_dir, config_path, as_json):
    """Report verification-behavior metrics from the recorded trace."""
    store, _, engine = _engine(data_dir, config_path)
    report = engine.metrics_report()
    truth = store.load_truth()
    if truth is not None:
        from .metrics import entity_accuracy, graph_edit_distance

        report.entity_acc = entity_accuracy(engine.memory.graph, truth)
        try:
            report.ged_norm = graph_edit_distance(engine.memory.graph, truth)
        except ValueError:
            report.ged_norm = None
    if as_json:
        click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        return
    for key, value in report.to_dict().items():
        click.echo(f"{key}: {value}")


@main.command()
@click.option("--data-dir", required=True, type=click.Path(exists=True))
@click.option("--snapshot", "snapshot_out", type=click.Path(),
              help="Write the current memory snapshot JSON here.")
@click.option("--log", "log_out", type=click.Path(),
              help="Write the provenance JSONL here.")
def export(data_dir, snapshot_out, log_out):
    """Export the memory snapshot and/or provenance log."""
    store = DataStore(data_dir)
    try:
        memory = store.load_memory()
    except (FileNotFoundError, ReplayError) as exc:
        fail(str(exc))
    if not snapshot_out and not log_out:
        fail("provide --snapshot and/or --log")
    if snapshot_out:
        memory.write_snapshot(snapshot_out)
        click.echo(f"snapshot (version {memory.version}) -> {snapshot_out}")
    if log_out:
        memory.write_provenance(log_out)
        click.echo(f"provenance ({len(memory.log)} entries) -> {log_out}")


@main.command()
@click.option("--data-dir", required=True, type=click.Path(exists=True))
def replay(data_dir):
    """Audit: replay the log from the initial snapshot, check the head state."""
    store = DataStore(data_dir)
    try:
        result = store.audit_replay()
    except (FileNotFoundError, ReplayError) as exc:
        fail(f"replay failed: {exc}")
    click.echo(f"replayed {result['entries']} entries to version {result['version']}")
    if result["matches_head"] is None:
        click.echo("no recorded head state to compare against")
    elif result["matches_head"]:
        click.echo("replayed state matches the recorded head: OK")
    else:
        fail("replayed state does NOT match the recorded head", code=2)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--console", "console_dir", type=click.Path(),
              help="Static console bundle to serve under /console.")
def serve(config_path, console_dir):
    """Run the HTTP service (persists to the configured data dir)."""
    from .service import serve as run_service

    config = load_config(config_path)
    try:
        config.validate()
    except ValueError as exc:
        fail(str(exc))
    click.echo(f"serving on {config.listen}, data dir {config.resolved_data_dir()}")
    run_service(config, console_dir)


if __name__ == "__main__":
    main()
