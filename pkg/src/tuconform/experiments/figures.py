"""Figure rendering for study outputs (PNG files alongside the CSV)."""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .metrics import RunMetrics

_COLORS = {"split": "tab:gray", "cs": "tab:green", "tuc": "tab:blue",
           "tupac": "tab:orange", "online-tuc": "tab:blue",
           "online-tupac": "tab:orange"}


def _color(method: str):
    return _COLORS.get(method, None)


def render_metrics(metrics: RunMetrics, outdir, stem: str) -> list[Path]:
    """Render the study's standard figures; returns the written paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if metrics.study == "gaussian":
        return _render_content(metrics, outdir / f"{stem}_content.png",
                               "true probability content")
    if metrics.study == "shift":
        return _render_content(metrics, outdir / f"{stem}_content.png",
                               "true probability content",
                               shift_at=metrics.config.get("shift_at"))
    if metrics.study == "regression":
        return _render_regression(metrics, outdir, stem)
    if metrics.study == "spam":
        return _render_spam(metrics, outdir, stem)
    return []


def _render_content(metrics: RunMetrics, path: Path, ylabel: str,
                    shift_at=None) -> list[Path]:
    fig, ax = plt.subplots(figsize=(8, 4.5))
    alpha_level = metrics.config.get("alpha", 0.1)
    for method in metrics.methods():
        ts, mean = metrics.series(method)
        ax.plot(ts, mean, label=method, color=_color(method), lw=1.5)
        reps = sorted({r.replication for r in metrics.rows if r.method == method})
        for rep in reps[:5]:
            ts_r, vals = metrics.series(method, rep=rep)
            ax.plot(ts_r, vals, color=_color(method), alpha=0.15, lw=0.6)
    ax.axhline(1.0 - alpha_level, color="black", ls="--", lw=0.8,
               label=f"target {1.0 - alpha_level:g}")
    if shift_at:
        ax.axvline(shift_at, color="red", ls=":", lw=0.8, label="shift")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]


def _render_regression(metrics: RunMetrics, outdir: Path, stem: str) -> list[Path]:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
    alpha_level = metrics.config.get("alpha", 0.1)
    for method in metrics.methods():
        ts, cov = metrics.series(method, column="value")
        _, width = metrics.series(method, column="width")
        ax1.plot(ts, cov, label=method, color=_color(method), lw=1.3)
        finite = np.isfinite(width)
        ax2.plot(ts[finite], width[finite], label=method, color=_color(method), lw=1.3)
    ax1.axhline(1.0 - alpha_level, color="black", ls="--", lw=0.8)
    ax1.set_xlabel("t")
    ax1.set_ylabel("held-out coverage")
    oracle = metrics.extras.get("oracle_width")
    if oracle:
        ax2.axhline(oracle, color="black", ls="--", lw=0.8, label="oracle")
    ax2.set_xlabel("t")
    ax2.set_ylabel("interval width")
    ax1.legend(fontsize=8)
    ax2.legend(fontsize=8)
    fig.tight_layout()
    path = outdir / f"{stem}_coverage_width.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]


def _render_spam(metrics: RunMetrics, outdir: Path, stem: str) -> list[Path]:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
    alpha_level = metrics.config.get("alpha", 0.1)
    for method in metrics.methods():
        ts, cov = metrics.series(method, column="value")
        _, noninf = metrics.series(method, column="noninformative")
        ax1.plot(ts, cov, label=method, color=_color(method), lw=1.3)
        ax2.plot(ts, noninf, label=method, color=_color(method), lw=1.3)
    ax1.axhline(1.0 - alpha_level, color="black", ls="--", lw=0.8)
    ax1.set_xlabel("calibration step t")
    ax1.set_ylabel("evaluated coverage")
    ax2.set_xlabel("calibration step t")
    ax2.set_ylabel("noninformative proportion")
    ax1.legend(fontsize=8)
    ax2.legend(fontsize=8)
    fig.tight_layout()
    path = outdir / f"{stem}_coverage_noninformative.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return [path]


def render_lemma_histogram(mins, bound: float, path) -> Path:
    """Histogram of per-replication minima against the target level."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(np.asarray(mins), bins=40, color="tab:blue", alpha=0.8)
    ax.axvline(bound, color="black", ls="--", lw=0.9, label=f"level {bound:g}")
    ax.set_xlabel("per-replication minimum content")
    ax.set_ylabel("replications")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
