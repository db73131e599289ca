"""Matplotlib figures rendered to files alongside the delimited reports."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_META = {"Software": "ckdr"}  # keep PNG chunks free of timestamps


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight", metadata=_META)
    plt.close(fig)
    return path


def demo_figure(X, y, plain_scores, coupled_scores, path):
    """Raw demo geometry plus the two pipelines' one-dimensional scores."""
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2))
    pos, neg = y > 0, y < 0
    axes[0].scatter(X[pos, 0], X[pos, 1], c="tab:blue", label="+1")
    axes[0].scatter(X[neg, 0], X[neg, 1], c="tab:red", label="-1")
    axes[0].set_title("input")
    axes[0].legend(loc="center right", fontsize=8)
    for ax, scores, title in (
        (axes[1], plain_scores, "plain rank-1 score"),
        (axes[2], coupled_scores, "coupled score"),
    ):
        ax.scatter(scores[pos], np.zeros(pos.sum()), c="tab:blue", marker="o")
        ax.scatter(scores[neg], np.zeros(neg.sum()), c="tab:red", marker="x")
        ax.axvline(0.0, color="gray", lw=0.8, ls="--")
        ax.set_yticks([])
        ax.set_title(title)
    return _save(fig, path)


def trace_figure(trace, path):
    rounds = [r.round for r in trace.rounds]
    objs = [r.objective for r in trace.rounds]
    flips = [r.round for r in trace.rounds if r.xi_changed]
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.plot(rounds, objs, marker="o", ms=3)
    for x in flips:
        ax.axvline(x, color="tab:orange", lw=0.7, alpha=0.6)
    ax.set_xlabel("round")
    ax.set_ylabel("objective")
    ax.set_title("training objective (orange: selection flips)")
    return _save(fig, path)


def bounds_figure(report, estimate, path):
    """Bar chart of the bound terms next to the Monte-Carlo estimate."""
    labels = ["term1", "term2", "total"]
    vals = [report.term1, report.term2, report.total]
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    finite = [min(v, 10 * max(report.term1, 1e-9)) for v in vals]
    ax.bar(labels, finite, color="tab:blue", alpha=0.8)
    if estimate is not None:
        ax.axhline(estimate.estimate, color="tab:green", lw=1.2, label="MC estimate")
        ax.legend(fontsize=8)
    ax.set_ylabel("complexity")
    ax.set_title("upper-bound terms")
    return _save(fig, path)


def rademacher_figure(per_draw_values, estimate, path):
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.hist(per_draw_values, bins=40, color="tab:blue", alpha=0.8)
    ax.axvline(estimate, color="tab:green", lw=1.2, label="mean")
    ax.set_xlabel("per-draw supremum / m")
    ax.set_ylabel("count")
    ax.legend(fontsize=8)
    ax.set_title("Monte-Carlo Rademacher draws")
    return _save(fig, path)


def concentration_figure(reports, slope, path):
    ms = np.array([rep.m for rep in reports], dtype=float)
    diffs = np.array([rep.mean_diff for rep in reports])
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.loglog(ms, diffs, marker="o", label="mean projection diff")
    ref = diffs[0] * np.sqrt(ms[0] / ms)
    ax.loglog(ms, ref, ls="--", color="gray", label="m^(-1/2) reference")
    ax.set_xlabel("m")
    ax.set_ylabel("||P_S - P_U||")
    ax.set_title(f"concentration decay (fit slope {slope:.3f})")
    ax.legend(fontsize=8)
    return _save(fig, path)
