"""Figure rendering for benchmark reports and releases.

Figures are a post-processing convenience written next to the delimited
output; the CSV stays the canonical record. Uses the Agg backend so
rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["plot_report", "plot_release", "plot_timing"]


def plot_report(rows, path, kind: str = "mean") -> str:
    """Log-log MSE against n, one line per (strategy, eps), saved to path.

    ``rows`` follow the bench CSV column order.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    series = {}
    for row in rows:
        scenario, strategy, n, eps = row[0], row[1], row[2], row[3]
        series.setdefault((scenario, strategy, eps), []).append((n, row[6]))
    for (scenario, strategy, eps), pts in sorted(series.items()):
        pts.sort()
        ns = [p[0] for p in pts]
        mses = [p[1] for p in pts]
        ax.loglog(ns, mses, marker="o",
                  label=f"{scenario} {strategy} eps={eps:g}")
    ax.set_xlabel("n")
    ax.set_ylabel("MSE" if kind == "mean" else "L2 risk")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_release(release, path, truth=None) -> str:
    """Private vs non-private summary; contour pair for surfaces."""
    grid = release.summary.grid
    if grid.dim == 1:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        t = grid.axis(0)
        ax.plot(t, release.non_private.values, "b-", label="non-private")
        ax.plot(t, release.summary.values, "r-", alpha=0.8, label="private")
        if truth is not None:
            ax.plot(t, truth.values, "k--", alpha=0.6, label="truth")
        ax.set_xlabel("t")
        ax.legend(fontsize=8)
    else:
        k = grid.points_per_axis
        fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0))
        for ax, f, title in zip(axes,
                                (release.non_private, release.summary),
                                ("non-private", "private")):
            im = ax.imshow(f.values.reshape(k, k), origin="lower",
                           extent=(*grid.bounds[1], *grid.bounds[0]),
                           aspect="auto")
            ax.set_title(title)
            fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_timing(rows, path) -> str:
    """Batch seconds against grid size for both noise processes."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ks = [r.k for r in rows]
    ax.plot(ks, [r.iclp_seconds for r in rows], "o-", label="Laplace process")
    ax.plot(ks, [r.gp_seconds for r in rows], "s-", label="Gaussian process")
    ax.plot(ks, [r.decompose_seconds for r in rows], "^--",
            label="decomposition")
    ax.set_xlabel("grid size K")
    ax.set_ylabel("seconds")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)
