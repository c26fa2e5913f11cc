"""Matplotlib report figures rendered next to the delimited results."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

REGIME_ORDER = ["low", "medium", "high"]
REDUCTION_REFERENCE = 4.8  # published closure call-reduction factor


def render_figures(result, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    paths: dict[str, Path] = {}

    by_density = (result.aggregates or {}).get("by_density", {})
    if by_density:
        paths["fig_density"] = _density_figure(by_density, out / "fig_density_trend.png")

    ratios = [row["reduction_ratio"] for row in result.rows
              if row.get("reduction_ratio") not in ("", None)]
    if ratios:
        paths["fig_reduction"] = _reduction_figure(ratios, out / "fig_reduction.png")

    if result.ablation:
        paths["fig_ablation"] = _ablation_figure(result.ablation, out / "fig_ablation.png")
    return paths


def _density_figure(by_density: dict, path: Path) -> Path:
    regimes = [r for r in REGIME_ORDER if r in by_density]
    qpf = [by_density[r]["mean_human_qpf"] or 0.0 for r in regimes]
    uncert = [by_density[r]["mean_uncert"] or 0.0 for r in regimes]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ax1.bar(regimes, qpf, color="#4878d0")
    ax1.set_ylabel("mean Human-Q/F")
    ax1.set_title("Arbitration queries per frame")
    ax2.bar(regimes, uncert, color="#ee854a")
    ax2.set_ylabel("mean Uncert.")
    ax2.set_title("Abstention rate")
    for ax in (ax1, ax2):
        ax.set_xlabel("claim density")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _reduction_figure(ratios: list[float], path: Path) -> Path:
    mean = sum(ratios) / len(ratios)
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.bar(range(len(ratios)), sorted(ratios), color="#6acc64")
    ax.axhline(mean, color="black", linestyle="--",
               label=f"suite mean {mean:.1f}x")
    ax.axhline(REDUCTION_REFERENCE, color="crimson", linestyle=":",
               label=f"reference {REDUCTION_REFERENCE}x")
    ax.set_xlabel("scenario (sorted)")
    ax.set_ylabel("calls_full / calls_actual")
    ax.set_title("Closure re-verification call reduction")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _ablation_figure(ablation: dict, path: Path) -> Path:
    qpf = ablation.get("human_qpf", {})
    resolve = ablation.get("resolve", {})
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    pairs1 = [("uniform", qpf.get("uniform")), ("role_aware", qpf.get("role_aware"))]
    ax1.bar([p[0] for p in pairs1], [p[1] or 0.0 for p in pairs1],
            color=["#d65f5f", "#4878d0"])
    ax1.set_ylabel("mean Human-Q/F")
    ax1.set_title("Role-aware weighting")
    pairs2 = [("rounds1", resolve.get("rounds1")), ("rounds2", resolve.get("rounds2"))]
    ax2.bar([p[0] for p in pairs2], [p[1] or 0.0 for p in pairs2],
            color=["#956cb4", "#6acc64"])
    ax2.set_ylabel("mean Resolve")
    ax2.set_title("Iterative refinement")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
