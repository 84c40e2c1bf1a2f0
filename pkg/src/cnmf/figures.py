"""Matplotlib renderings written next to the delimited outputs.

Everything draws through the Agg backend so the CLI works headless. Figures
are a convenience view of the CSV/JSON results, never the primary record.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .core import CnmfModel

__all__ = ["loss_figure", "factors_figure", "bench_figures"]


def loss_figure(trace, path) -> None:
    """Relative error per iteration, log scale."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.semilogy(range(len(trace)), trace, marker="o", markersize=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative error")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def factors_figure(model: CnmfModel, path) -> None:
    """Heatmaps of the activations and each component's lag-by-row template."""
    k = model.n_components
    fig, axes = plt.subplots(
        1 + k, 1, figsize=(7, 2.2 * (1 + k)), constrained_layout=True, squeeze=False
    )
    axes = list(axes.ravel())
    axes[0].imshow(model.h, aspect="auto", interpolation="nearest", cmap="magma")
    axes[0].set_title("activations")
    axes[0].set_xlabel("column")
    axes[0].set_ylabel("component")
    for kk in range(k):
        ax = axes[1 + kk]
        ax.imshow(
            model.w[:, :, kk].T, aspect="auto", interpolation="nearest", cmap="magma"
        )
        ax.set_title(f"template {kk + 1} (rows x lags)")
        ax.set_xlabel("lag")
    fig.savefig(path, dpi=140)
    plt.close(fig)


def _median(values):
    finite = sorted(v for v in values if not math.isnan(v))
    if not finite:
        return math.nan
    mid = len(finite) // 2
    if len(finite) % 2:
        return finite[mid]
    return 0.5 * (finite[mid - 1] + finite[mid])


def bench_figures(rows, out_dir) -> list[Path]:
    """One figure per noise kind: median score and relative error over beta.

    ``rows`` are dicts with keys noise, beta, trial, alg, score, rel_mse.
    Returns the written paths.
    """
    out_dir = Path(out_dir)
    written = []
    kinds = sorted({r["noise"] for r in rows})
    for kind in kinds:
        sub = [r for r in rows if r["noise"] == kind]
        algs = sorted({r["alg"] for r in sub})
        betas = sorted({r["beta"] for r in sub})
        fig, (ax_score, ax_err) = plt.subplots(1, 2, figsize=(9, 3.4))
        for alg in algs:
            med_score = [
                _median(
                    [r["score"] for r in sub if r["alg"] == alg and r["beta"] == b]
                )
                for b in betas
            ]
            med_err = [
                _median(
                    [r["rel_mse"] for r in sub if r["alg"] == alg and r["beta"] == b]
                )
                for b in betas
            ]
            ax_score.semilogx(betas, med_score, marker="o", markersize=3, label=alg)
            ax_err.loglog(betas, med_err, marker="o", markersize=3, label=alg)
        ax_score.set_xlabel("noise level")
        ax_score.set_ylabel("median score")
        ax_score.set_ylim(-0.05, 1.05)
        ax_score.grid(True, alpha=0.3)
        ax_err.set_xlabel("noise level")
        ax_err.set_ylabel("median relative error")
        ax_err.grid(True, alpha=0.3)
        ax_score.legend(fontsize=8)
        fig.suptitle(f"{kind} noise")
        fig.tight_layout()
        path = out_dir / f"bench_{kind}.png"
        fig.savefig(path, dpi=140)
        plt.close(fig)
        written.append(path)
    return written
