"""Matplotlib figure rendering for the report pipeline (Agg backend only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: str) -> str:
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_pair(path: str, phi, phibar, mode: str) -> str:
    """The two 1D minimizers over the cross-section."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(phi.t, phi.values, label=r"$\varphi$")
    ax.plot(phibar.t, phibar.values, label=r"$\bar\varphi$")
    ax.set_xlabel(r"$x_2$")
    ax.set_ylabel("value")
    ax.set_title(f"minimizer pair ({mode})")
    ax.legend()
    return _save(fig, path)


def plot_scan(path: str, rows, lambda_star: float) -> str:
    """Global 1D minimum versus lambda, with the tie value marked."""
    lam = np.array([r[0] for r in rows])
    m = np.array([r[1] for r in rows])
    order = np.argsort(lam)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(lam[order], m[order], marker=".", lw=1)
    ax.axvline(lambda_star, color="tab:red", lw=0.8, ls="--", label=r"$\lambda^*$")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel(r"$m_\lambda$")
    ax.set_title("energy scan")
    ax.legend()
    return _save(fig, path)


def plot_field(path: str, field, levels=None) -> str:
    """Heatmap of the stream function with overlaid level curves."""
    fig, ax = plt.subplots(figsize=(8, 3))
    extent = (-field.L, field.L, 0.0, 1.0)
    im = ax.imshow(
        field.values.T, origin="lower", extent=extent, aspect="auto", cmap="viridis"
    )
    fig.colorbar(im, ax=ax, label=r"$u$")
    if levels is not None:
        ax.contour(
            field.x1, field.x2, field.values.T, levels=levels, colors="white", linewidths=0.6
        )
    ax.set_xlabel(r"$x_1$")
    ax.set_ylabel(r"$x_2$")
    ax.set_title("stream function")
    return _save(fig, path)


def plot_streamlines(path: str, polylines, L: float) -> str:
    """Traced streamlines in the strip."""
    fig, ax = plt.subplots(figsize=(8, 3))
    for line in polylines:
        pts = np.asarray(line.points)
        ax.plot(pts[:, 0], pts[:, 1], lw=0.8)
    ax.set_xlim(-L, L)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel(r"$x_1$")
    ax.set_ylabel(r"$x_2$")
    ax.set_title("streamlines")
    return _save(fig, path)


def plot_angle_histogram(path: str, counts, angle_class) -> str:
    """Polar histogram of flow directions with the classification in the title."""
    bins = len(counts)
    theta = (np.arange(bins) + 0.5) * 2.0 * np.pi / bins
    fig = plt.figure(figsize=(4.5, 4.5))
    ax = fig.add_subplot(projection="polar")
    ax.bar(theta, counts, width=2.0 * np.pi / bins, bottom=0.0)
    ax.set_yticklabels([])
    ax.set_title(f"direction set: {getattr(angle_class, 'value', angle_class)}")
    return _save(fig, path)
