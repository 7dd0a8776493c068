"""Matplotlib figures written next to the CLI's text and image outputs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import supertile as st  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def plot_patch(rule, patch, path, title=None):
    """Words as a colored strip, blocks and lattice patches as cell maps (origin bottom-left)."""
    fig, ax = plt.subplots(figsize=(6, 6 if not isinstance(patch, (np.ndarray, st.IntervalPatch)) else 1.6))
    cmap = plt.get_cmap("tab20", max(rule.m, 2))
    if isinstance(patch, st.Block) and patch.cells.ndim == 2:
        ax.imshow(patch.cells, origin="lower", cmap=cmap, vmin=-0.5, vmax=max(rule.m, 2) - 0.5, interpolation="nearest")
    elif isinstance(patch, st.LatticePatch) and patch.coords.shape[1] == 2:
        ax.scatter(patch.coords[:, 0], patch.coords[:, 1], c=patch.symbols, cmap=cmap, marker="s", s=40,
                   vmin=-0.5, vmax=max(rule.m, 2) - 0.5)
        ax.set_aspect("equal")
    elif isinstance(patch, st.IntervalPatch):
        for s, left, length in patch.tiles:
            ax.add_patch(plt.Rectangle((left, 0), length, 1, facecolor=cmap(s), edgecolor="k", lw=0.3))
        ax.set_xlim(0, patch.total_length)
        ax.set_ylim(0, 1)
        ax.set_yticks([])
    else:
        syms = patch.symbols if isinstance(patch, st.LatticePatch) else np.asarray(patch)
        ax.imshow(syms.reshape(1, -1), aspect="auto", cmap=cmap, vmin=-0.5, vmax=max(rule.m, 2) - 0.5,
                  interpolation="nearest")
        ax.set_yticks([])
    ax.set_title(title or rule.name)
    _save(fig, path)


def plot_intensity(grid, path, title="intensity"):
    """Intensity against xi (1-D grids), one line per window."""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    xs = grid.xi_values.reshape(len(grid.xi_values), -1)[:, 0]
    for w, N in enumerate(grid.windows):
        ax.plot(xs, grid.intensities[:, w], lw=0.8, label=f"N={N}")
    ax.set_xlabel(r"$\xi$")
    ax.set_ylabel(r"$|c^\xi|^2$")
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)


def plot_image(image, path, title="diffraction"):
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(image.pixels, cmap="gray", extent=(0, 1, 0, 1), interpolation="nearest")
    ax.set_xlabel(r"$\xi_1$")
    ax.set_ylabel(r"$\xi_2$")
    ax.set_title(f"{title} (level {image.level}, top-100 share {image.top_share():.3f})")
    _save(fig, path)


def plot_autocorrelation(measure, path, title="autocorrelation"):
    zs = sorted(measure.atoms)
    vals = [measure.atoms[z].real for z in zs]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.stem(zs, vals, basefmt=" ")
    ax.set_xlabel("z")
    ax.set_ylabel(r"Re $\gamma(z)$")
    ax.set_title(title)
    _save(fig, path)


def plot_distances(report, path, title="eigenvalue test"):
    """Distances to the nearest integer on a log scale."""
    ns = [n for n, _ in report.distances]
    ds = [max(d, 1e-300) for _, d in report.distances]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(ns, ds, "o-", ms=3)
    ax.set_xlabel("n")
    ax.set_ylabel("distance to Z")
    ax.set_title(f"{title}: {report.verdict}")
    _save(fig, path)


def plot_frequencies(seq, path, title="frequency sequence"):
    """rho_n components against n, log scale."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ns = [n for n, _ in seq.levels]
    rho = np.array([r for _, r in seq.levels])
    for i in range(rho.shape[1]):
        ax.semilogy(ns, np.maximum(rho[:, i], 1e-300), "o-", ms=3, label=f"type {i}")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$\rho_n$")
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)
