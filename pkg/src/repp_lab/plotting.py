"""SVG figures for run artifacts.

Output is byte-stable: fixed hash salt for element ids, no date metadata,
text kept as ``<text>`` rather than glyph paths.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (np.sqrt(5) - 1) / 2
WIDTH = 5.0
RC = {
    "svg.hashsalt": "repp-lab",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 8,
    "axes.labelsize": 9,
    "axes.linewidth": 0.6,
    "legend.fontsize": 7,
    "lines.linewidth": 1.0,
    "lines.markersize": 2.5,
    "figure.figsize": (WIDTH, WIDTH * GOLDEN),
}
COLORS = ("#08589e", "#d95f02", "#1b9e77", "#7570b3")


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return str(path)


def point_panels(panels, path, horizon=1.0, tau_max=10.0):
    """Side-by-side scatter of point measures: ``panels = [(title, PointMeasure), ...]``."""
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, len(panels), sharey=True, figsize=(WIDTH, WIDTH * GOLDEN * 0.8))
        axes = np.atleast_1d(axes)
        for ax, (title, pm) in zip(axes, panels):
            if len(pm):
                ax.scatter(pm.times, pm.marks[:, 0], s=3, c=COLORS[0], linewidths=0)
            # a degenerate window still gets drawable (empty) axes
            ax.set_xlim(0, horizon if horizon > 0 else 1)
            ax.set_ylim(0, tau_max if tau_max > 0 else 1)
            ax.set_title(title, fontsize=8)
            ax.set_xlabel("t")
        axes[0].set_ylabel("mark")
        fig.tight_layout()
        return _save(fig, path)


def scatter2d(pm, path, radius=3.0, title=""):
    """Marks of a multi-dimensional REPP in the plane (time as colour)."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(WIDTH * 0.6, WIDTH * 0.6))
        if len(pm):
            ax.scatter(pm.marks[:, 0], pm.marks[:, 1], s=3, c=pm.times, cmap="viridis", linewidths=0)
        ax.set_xlim(-radius, radius)
        ax.set_ylim(-radius, radius)
        ax.set_aspect("equal")
        ax.set_title(title, fontsize=8)
        fig.tight_layout()
        return _save(fig, path)


def hist_vs_pmf(sample, pmf, path, kmin=0, xlabel="k", title=""):
    """Observed frequencies of an integer sample against a reference pmf."""
    x = np.asarray(sample, dtype=np.int64)
    ks = np.arange(kmin, max(int(x.max()), kmin) + 1) if x.size else np.zeros(0, dtype=np.int64)
    freq = [float(np.mean(x == k)) for k in ks]
    return freq_vs_pmf(ks, freq, [pmf(int(k)) for k in ks], path, xlabel, title)


def freq_vs_pmf(ks, observed, reference, path, xlabel="k", title=""):
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        if len(ks):
            ax.bar(ks, observed, width=0.8, color=COLORS[0], alpha=0.6, label="observed")
            ax.plot(ks, reference, "o-", color=COLORS[1], label="reference")
            ax.legend(frameon=False)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("frequency")
        ax.set_title(title, fontsize=8)
        fig.tight_layout()
        return _save(fig, path)


def estimate_vs_reference(ref, est, lo, hi, path, xlabel="analytic", ylabel="empirical", title=""):
    """Empirical estimates with intervals against their analytic values."""
    ref, est = np.asarray(ref, float), np.asarray(est, float)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(WIDTH * 0.7, WIDTH * 0.7))
        if ref.size:
            err = np.vstack([est - np.asarray(lo), np.asarray(hi) - est])
            ax.errorbar(ref, est, yerr=err, fmt="o", color=COLORS[0], elinewidth=0.6)
            top = max(float(ref.max()), float(np.max(hi))) * 1.05
            ax.plot([0, top], [0, top], "--", color="0.5", linewidth=0.6)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title, fontsize=8)
        fig.tight_layout()
        return _save(fig, path)


def curves(x, series, path, xlabel="y", ylabel="", title="", logy=False):
    """Line plot of named series over a common grid: ``series = {label: values}``."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for (label, y), c in zip(series.items(), COLORS * 4):
            ax.plot(x, y, label=label, color=c)
        if logy:
            ax.set_yscale("log")
        if series:
            ax.legend(frameon=False)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title, fontsize=8)
        fig.tight_layout()
        return _save(fig, path)


def step_path(path_obj, path, title=""):
    """Draw a StepPath (e.g. an extremal process) up to its horizon."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        bp, v = path_obj.breakpoints, path_obj.values
        if len(bp):
            end = path_obj.horizon if np.isfinite(path_obj.horizon) else bp[-1] * 1.1 + 1
            ax.step(np.append(bp, end), np.append(v, v[-1]), where="post", color=COLORS[0])
        ax.set_xlabel("t")
        ax.set_title(title, fontsize=8)
        fig.tight_layout()
        return _save(fig, path)
