"""Matplotlib figures written next to the delimited outputs by the CLI report
paths: training curves, per-action spectral histograms, and cluster scatters."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def training_curves_figure(curves, out_path, window: int = 50) -> None:
    """curves rows: (episode, reward, duration_s, epsilon, loss_mean)."""
    ep = [c[0] for c in curves]
    rew = [c[1] for c in curves]
    dur = [c[2] for c in curves]

    def smooth(xs):
        xs = np.asarray(xs, dtype=float)
        if len(xs) < window:
            return xs
        k = np.ones(window) / window
        return np.convolve(xs, k, mode="valid")

    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    axes[0].plot(ep, rew, alpha=0.25, lw=0.6)
    axes[0].plot(ep[len(ep) - len(smooth(rew)):], smooth(rew), lw=1.5)
    axes[0].set_ylabel("episode reward")
    axes[1].plot(ep, dur, alpha=0.25, lw=0.6)
    axes[1].plot(ep[len(ep) - len(smooth(dur)):], smooth(dur), lw=1.5)
    axes[1].set_ylabel("duration (s)")
    axes[1].set_xlabel("episode")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def spectral_histogram_figure(scores, flags, action_name, out_path,
                              bins: int = 40) -> None:
    scores = np.asarray(scores, dtype=float)
    flags = np.asarray(flags, dtype=bool)
    fig, ax = plt.subplots(figsize=(5, 3.4))
    edges = np.histogram_bin_edges(scores, bins=bins)
    ax.hist(scores[~flags], bins=edges, alpha=0.6, label="clean", color="#4477aa")
    if flags.any():
        ax.hist(scores[flags], bins=edges, alpha=0.75, label="poisoned",
                color="#cc3311")
    ax.set_xlabel("outlier score")
    ax.set_ylabel("count")
    ax.set_title(f"action: {action_name}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def cluster_scatter_figure(points2d, labels, flags, action_name, out_path) -> None:
    points2d = np.asarray(points2d, dtype=float)
    labels = np.asarray(labels)
    flags = np.asarray(flags, dtype=bool)
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.6), sharex=True, sharey=True)
    for j, color in ((0, "#4477aa"), (1, "#ee7733")):
        m = labels == j
        axes[0].scatter(points2d[m, 0], points2d[m, 1], s=6, color=color,
                        label=f"cluster {j}")
    axes[0].set_title(f"{action_name}: prediction")
    axes[0].legend(markerscale=2)
    axes[1].scatter(points2d[~flags, 0], points2d[~flags, 1], s=6,
                    color="#4477aa", label="clean")
    if flags.any():
        axes[1].scatter(points2d[flags, 0], points2d[flags, 1], s=10,
                        color="#cc3311", label="poisoned")
    axes[1].set_title("ground truth")
    axes[1].legend(markerscale=2)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
