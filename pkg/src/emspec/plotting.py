"""Figure rendering for experiment reports.

Every density table written by the runner can be rendered as a PNG with
the histogram as a filled step curve and the matching closed-form curve,
when one exists, drawn on top. Rendering is file-based only (Agg
backend); the CSV tables remain the primary output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_density", "render_portfolio", "render_moments"]

_HIST_STYLE = dict(color="#4878a8", alpha=0.55, step="mid")
_THEORY_STYLE = dict(color="#b02428", lw=1.6)


def render_density(path, bin_edges, density, theory=None, title="",
                   xlabel=r"$\lambda$", ylabel="density") -> None:
    """Histogram + optional theory curve to a PNG file."""
    edges = np.asarray(bin_edges, dtype=float)
    dens = np.asarray(density, dtype=float)
    mids = 0.5 * (edges[:-1] + edges[1:])
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.fill_between(mids, dens, **_HIST_STYLE, label="empirical")
    if theory is not None:
        theory = np.asarray(theory, dtype=float)
        ok = np.isfinite(theory)
        if ok.any():
            ax.plot(mids[ok], theory[ok], **_THEORY_STYLE, label="theory")
            ax.legend(frameon=False, fontsize=8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_portfolio(path, cells, homogeneous_ratio: float, title="") -> None:
    """Variance-ratio curves vs horizon for the portfolio sweep."""
    raw = sorted((c.horizon, c.mean_ratio) for c in cells if c.method == "sample-raw")
    best = sorted((c.horizon, c.mean_ratio) for c in cells if c.method == "power-map-best")
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    if raw:
        t, r = zip(*raw)
        ax.plot(t, r, "o-.", color="#303030", label="sample correlation")
    if best:
        t, r = zip(*best)
        ax.plot(t, r, "s-", color="#2060b0", label="power-mapped (best q)")
    ax.axhline(homogeneous_ratio, color="#b02428", ls="--", lw=1.2,
               label="homogeneous portfolio")
    ax.set_xlabel("horizon T")
    ax.set_ylabel(r"$\Omega^2 / \Omega_0^2$")
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(frameon=False, fontsize=8)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_moments(path, rows, title="") -> None:
    """Empirical vs theory bars for the moment report.

    ``rows`` are (quantity, empirical, stderr, theory) with theory
    possibly NaN; quantities with no finite entry are skipped.
    """
    keep = [r for r in rows
            if np.isfinite(r[1]) or (r[3] is not None and np.isfinite(r[3]))]
    if not keep:
        return
    labels = [r[0] for r in keep]
    emp = np.array([r[1] for r in keep], dtype=float)
    err = np.array([r[2] for r in keep], dtype=float)
    theo = np.array([np.nan if r[3] is None else r[3] for r in keep], dtype=float)
    x = np.arange(len(keep))
    fig, ax = plt.subplots(figsize=(max(4.5, 0.9 * len(keep)), 3.4))
    ax.bar(x - 0.18, emp, 0.36, yerr=err, color="#4878a8", label="empirical")
    ok = np.isfinite(theo)
    ax.bar(x[ok] + 0.18, theo[ok], 0.36, color="#b02428", label="theory")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.axhline(0.0, color="0.5", lw=0.8)
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
