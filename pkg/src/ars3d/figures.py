"""Figure rendering for CLI reports (PNG files next to the delimited output)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_trajectory(points, out_png, title: str = "") -> Path:
    """3D curve plot of an (n, 3) array of positions."""
    fig = plt.figure(figsize=(6, 5))
    ax = fig.add_subplot(projection="3d")
    ax.plot(points[:, 0], points[:, 1], points[:, 2], lw=1.0)
    ax.scatter(points[0, 0], points[0, 1], points[0, 2], color="k", s=12)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return Path(out_png)


def save_point_cloud(points, out_png, title: str = "", color_by=None) -> Path:
    """3D scatter of an (n, 3) array, optionally coloured by a scalar."""
    fig = plt.figure(figsize=(6, 5))
    ax = fig.add_subplot(projection="3d")
    sc = ax.scatter(points[:, 0], points[:, 1], points[:, 2],
                    c=color_by, s=3, cmap="viridis")
    if color_by is not None:
        fig.colorbar(sc, ax=ax, shrink=0.7)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return Path(out_png)


def save_mass_series(times, mass_left, mass_right, out_png,
                     title: str = "") -> Path:
    """Half-line masses over time on a log scale."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(times, mass_right, label="mass x > 0")
    floor = 1e-300
    ax.semilogy(times, [max(m, floor) for m in mass_left], label="mass x < 0")
    ax.set_xlabel("t")
    ax.set_ylabel("L2 mass")
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return Path(out_png)
