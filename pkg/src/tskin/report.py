"""Corpus evaluation reports: text table, delimited file and figures."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import ConfusionCounts, Metrics, prf  # noqa: E402


@dataclass
class ImageResult:
    name: str
    counts: ConfusionCounts
    metrics: Metrics
    elimination_rate: float | None = None
    window_tp: float | None = None


def _fmt(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.4f}"


def aggregate(results: list[ImageResult]) -> tuple[ConfusionCounts, Metrics]:
    total = ConfusionCounts()
    for r in results:
        total = total + r.counts
    return total, prf(total)


def render_table(results: list[ImageResult]) -> str:
    """Per-image rows plus an aggregate row, precision / recall / F layout."""
    header = f"{'Image':<28} {'Precision':>10} {'Recall':>10} {'F-score':>10} {'ER':>8}"
    lines = [header, "-" * len(header)]
    for r in results:
        m = r.metrics
        lines.append(f"{r.name:<28} {_fmt(m.precision):>10} {_fmt(m.recall):>10} "
                     f"{_fmt(m.f_score):>10} {_fmt(r.elimination_rate):>8}")
    total, agg = aggregate(results)
    ers = [r.elimination_rate for r in results if r.elimination_rate is not None]
    mean_er = sum(ers) / len(ers) if ers else None
    skipped = sum(1 for r in results if r.metrics.f_score is None)
    lines.append("-" * len(header))
    lines.append(f"{'ALL (merged counts)':<28} {_fmt(agg.precision):>10} "
                 f"{_fmt(agg.recall):>10} {_fmt(agg.f_score):>10} {_fmt(mean_er):>8}")
    lines.append(f"images: {len(results)}  undefined-F skipped: {skipped}  "
                 f"tp={total.tp} fp={total.fp} tn={total.tn} fn={total.fn} "
                 f"undecided={total.undecided_excluded}")
    return "\n".join(lines) + "\n"


def write_csv(results: list[ImageResult], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["image", "tp", "fp", "tn", "fn", "undecided",
                    "precision", "recall", "f_score", "elimination_rate",
                    "window_tp"])
        for r in results:
            c, m = r.counts, r.metrics
            w.writerow([r.name, c.tp, c.fp, c.tn, c.fn, c.undecided_excluded,
                        _fmt(m.precision), _fmt(m.recall), _fmt(m.f_score),
                        _fmt(r.elimination_rate), _fmt(r.window_tp)])


def write_figures(results: list[ImageResult], out_dir) -> list[str]:
    """Render the per-image F-score curve and the PR scatter as PNG files."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    scored = [(i, r.metrics.f_score) for i, r in enumerate(results)
              if r.metrics.f_score is not None]
    fig, ax = plt.subplots(figsize=(8, 3.2))
    if scored:
        xs, ys = zip(*scored)
        ax.plot(xs, ys, marker=".", lw=1)
    ax.set_xlabel("image index")
    ax.set_ylabel("F-score")
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    p = os.path.join(out_dir, "f_score_per_image.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    pr = [(r.metrics.precision, r.metrics.recall) for r in results
          if r.metrics.precision is not None and r.metrics.recall is not None]
    if pr:
        ax.scatter([p for p, _ in pr], [q for _, q in pr], s=12, alpha=0.6)
    ax.set_xlabel("precision")
    ax.set_ylabel("recall")
    ax.set_xlim(0, 1.02)
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    p = os.path.join(out_dir, "precision_recall.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)
    return paths


def write_report(results: list[ImageResult], report_path, figures: bool = True) -> None:
    """Text table at ``report_path`` plus CSV and figures alongside it."""
    report_path = str(report_path)
    with open(report_path, "w") as f:
        f.write(render_table(results))
    stem, _ = os.path.splitext(report_path)
    write_csv(results, stem + ".csv")
    if figures:
        write_figures(results, os.path.dirname(report_path) or ".")
