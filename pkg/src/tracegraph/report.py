"""Reports for detection runs: JSON, plain-text/CSV tables, and figures.

Every report lands in one directory: ``report.json`` (machine-readable),
``report.txt`` (aligned table), ``report.csv`` (delimited), and PNG figures
rendered with the Agg backend (invocation-count bars and per-phase timing
breakdowns).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .approach import ApproachDetection, ApproachOutput  # noqa: E402
from .groups import GroupDetection, f1_against_baseline  # noqa: E402

_PHASES = ("io_seconds", "traversal_seconds", "compute_seconds")


def _write_table(path: Path, headers: list[str], rows: list[list]) -> None:
    widths = [
        max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h))
        for i, h in enumerate(headers)
    ]
    lines = [
        "  ".join(str(h).ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_csv(path: Path, headers: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        writer.writerows(rows)


def _timing_figure(path: Path, labels: list[str], stats: list[dict]) -> None:
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(labels) + 2), 3.2))
    bottom = [0.0] * len(labels)
    for phase in _PHASES:
        values = [s.get(phase, 0.0) for s in stats]
        ax.bar(labels, values, bottom=bottom, label=phase.replace("_seconds", ""))
        bottom = [b + v for b, v in zip(bottom, values)]
    ax.set_ylabel("seconds")
    ax.set_title("time per phase")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def group_report(
    out_dir,
    candidate_name: str,
    candidate: GroupDetection,
    baseline_name: str | None = None,
    baseline: GroupDetection | None = None,
) -> dict:
    """Group-detection report: F1 vs baseline, K-means counts, timings."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = [(candidate_name, candidate)]
    if baseline is not None:
        runs.append((baseline_name or "baseline", baseline))
    summary: dict = {
        "runs": {
            name: {
                "stats": run.stats.to_obj(),
                "clusters": run.clusters.to_obj(),
            }
            for name, run in runs
        }
    }
    if baseline is not None:
        summary["f1"] = f1_against_baseline(candidate.clusters, baseline.clusters)
    (out_dir / "report.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    headers = ["run", "kmeans_invocations", "cluster_calls", "frames_seen", "elapsed_s"]
    rows = [
        [name, run.stats.kmeans_invocations, run.stats.cluster_calls,
         run.stats.frames_seen, f"{run.stats.elapsed_seconds:.4f}"]
        for name, run in runs
    ]
    if baseline is not None:
        rows.append(["f1", f"{summary['f1']:.6f}", "", "", ""])
    _write_table(out_dir / "report.txt", headers, rows)
    _write_csv(out_dir / "report.csv", headers, rows)

    labels = [name for name, _ in runs]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(labels) + 2), 3.2))
    ax.bar(labels, [run.stats.kmeans_invocations for _, run in runs], color="#4878d0")
    ax.set_ylabel("K-means+Elbow invocations")
    ax.set_title("clustering work per run")
    fig.tight_layout()
    fig.savefig(out_dir / "kmeans_invocations.png", dpi=120)
    plt.close(fig)
    _timing_figure(
        out_dir / "timings.png", labels, [run.stats.to_obj() for _, run in runs]
    )
    return summary


def approach_report(
    out_dir,
    output: ApproachOutput,
    per_graph: list[ApproachDetection],
    k: int,
) -> dict:
    """Approach report: per-pair instance counts plus a per-graph phase
    breakdown (I/O fetch, traversal, distance computation)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {
        "k": k,
        "instances": output.count_instances(),
        "pairs": [
            {"a": a, "b": b, "instances": len(output.pairs[(a, b)])}
            for a, b in sorted(output.pairs)
        ],
        "graphs": [d.stats.to_obj() for d in per_graph],
    }
    (out_dir / "report.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    headers = ["pair", "instances", "intervals"]
    rows = [
        [f"{a}-{b}", len(output.pairs[(a, b)]),
         " ".join(f"[{s},{e}]" for s, e in output.pairs[(a, b)])]
        for a, b in sorted(output.pairs)
    ]
    _write_table(out_dir / "report.txt", headers, rows)
    _write_csv(out_dir / "report.csv", headers, rows)
    labels = [f"graph {i + 1}" for i in range(len(per_graph))]
    _timing_figure(
        out_dir / "timing_breakdown.png", labels, [d.stats.to_obj() for d in per_graph]
    )
    return summary
