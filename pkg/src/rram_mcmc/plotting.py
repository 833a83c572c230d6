"""Report figures written next to the CSV outputs.

Figures only ever read the arrays the CSV writers also emit, so every plot
can be regenerated from the data files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GREEN = "#2ca02c"
BLUE = "#1f77b4"
RED = "#d62728"

_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def figure(width: float = 3.4, ratio: float = 0.75, ncols: int = 1):
    golden = ratio
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(1, ncols, figsize=(width * ncols, width * golden))
    return fig, ax


def save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_STYLE):
        # fixed metadata keeps reruns byte-identical
        fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def c2c_distribution(samples, median, sd, unit, path):
    fig, ax = figure()
    ax.hist(samples, bins=40, density=True, color=GREEN, alpha=0.6)
    x = np.linspace(samples.min(), samples.max(), 200)
    ax.plot(x, np.exp(-0.5 * ((x - median) / sd) ** 2) / (sd * np.sqrt(2 * np.pi)), "k--", lw=1)
    ax.set_xlabel(f"HCS conductance ({unit})")
    ax.set_ylabel("probability density")
    return save(fig, path)


def power_law(sweep, fitted: dict, units, path):
    fig, ax = figure()
    i = sweep.i_set
    ax.loglog(i, sweep.empirical_median, "o", color=GREEN, ms=4, label="median")
    ax.loglog(i, fitted["d"] * i ** fitted["c"], "-", color=GREEN, lw=1)
    ax.loglog(i, sweep.empirical_sd, "s", color=BLUE, ms=4, label="SD")
    ax.loglog(i, fitted["a"] * i ** fitted["b"], "-", color=BLUE, lw=1)
    ax.set_xlabel(f"SET programming current ({units[0]})")
    ax.set_ylabel(f"conductance ({units[1]})")
    ax.legend(frameon=False)
    return save(fig, path)


def device_spread(medians, sds, unit, path):
    fig, ax = figure()
    ax.scatter(medians, sds, s=2, color=GREEN, alpha=0.4, lw=0)
    ax.set_xlabel(f"device median ({unit})")
    ax.set_ylabel(f"device SD ({unit})")
    return save(fig, path)


def accuracy_trace(metric, counters, burn_in, path, test_accuracy=None, label="accuracy"):
    fig, ax = figure(width=4.5, ratio=0.5)
    rows = np.arange(len(metric))
    ax.plot(rows, metric, color=GREEN, lw=0.8, label=label)
    ax.axvspan(0, burn_in, color=RED, alpha=0.1, lw=0)
    if test_accuracy is not None:
        ax.axhline(test_accuracy, color="k", ls="--", lw=0.8)
    ax.set_xlabel("array row")
    ax.set_ylabel(label, color=GREEN)
    ax2 = ax.twinx()
    ax2.plot(rows, counters, color=BLUE, lw=0.6)
    ax2.set_ylabel("row counter", color=BLUE)
    return save(fig, path)


def boxplot(groups: dict, ylabel, path):
    fig, ax = figure()
    ax.boxplot(list(groups.values()), whis=(0, 100))
    ax.set_xticks(range(1, len(groups) + 1), list(groups))
    ax.set_ylabel(ylabel)
    return save(fig, path)


def array_heatmap(weights, path):
    fig, ax = figure(width=3.0, ratio=1.4)
    lim = np.abs(weights).max() or 1.0
    im = ax.imshow(weights, aspect="auto", cmap="coolwarm", vmin=-lim, vmax=lim, interpolation="nearest")
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    fig.colorbar(im, ax=ax, label="differential conductance")
    return save(fig, path)


def posterior_walk(weights, counters, burn_in, path):
    fig, ax = figure(width=3.4, ratio=1.0)
    w = weights
    alpha = np.clip(counters / max(counters.max(), 1), 0.05, 1.0)
    ax.plot(w[:, 0], w[:, 1], color="0.6", lw=0.3, alpha=0.5)
    colors = np.zeros((len(w), 4))
    colors[:] = matplotlib.colors.to_rgba(GREEN)
    colors[:, 3] = alpha
    colors[:burn_in, :3] = matplotlib.colors.to_rgb("0.5")
    ax.scatter(w[:, 0], w[:, 1], s=4, c=colors, lw=0)
    ax.plot(w[0, 0], w[0, 1], "o", color=RED, ms=4)
    ax.set_xlabel("parameter 0")
    ax.set_ylabel("parameter 1")
    return save(fig, path)


def hyperplanes(points, labels, weights, path, count=15, seed=0):
    fig, ax = figure(width=3.4, ratio=1.0)
    ax.scatter(*points[labels == 1].T, marker="o", facecolors="none", edgecolors=RED, s=14)
    ax.scatter(*points[labels == 0].T, marker="s", facecolors="none", edgecolors=BLUE, s=14)
    lo, hi = points.min() - 1, points.max() + 1
    xs = np.linspace(lo, hi, 2)
    rows = np.random.default_rng(seed).choice(len(weights), size=min(count, len(weights)), replace=False)
    for g0, g1 in weights[rows]:
        if g1 != 0:
            ax.plot(xs, -g0 * xs / g1, color="0.4", lw=0.5)
    ax.set_xlim(lo, hi)
    ax.set_ylim(lo, hi)
    return save(fig, path)


def probability_contour(grid_pts, probs, steps, points, labels, path):
    fig, ax = figure(width=3.4, ratio=1.0)
    x = grid_pts[:, 0].reshape(steps, steps)
    y = grid_pts[:, 1].reshape(steps, steps)
    cs = ax.contourf(x, y, probs.reshape(steps, steps), levels=np.linspace(0, 1, 11), cmap="RdBu_r")
    ax.contour(x, y, probs.reshape(steps, steps), levels=[0.5], colors="k", linewidths=0.8)
    ax.scatter(*points[labels == 1].T, marker="o", facecolors="none", edgecolors="k", s=10)
    ax.scatter(*points[labels == 0].T, marker="s", facecolors="none", edgecolors="k", s=10)
    fig.colorbar(cs, ax=ax, label="P(t = 1)")
    return save(fig, path)
