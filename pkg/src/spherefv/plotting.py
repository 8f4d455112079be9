"""Matplotlib rendering of field snapshots and convergence tables.

Figures are written next to the delimited outputs; nothing here is needed by
the solver itself.
"""

from __future__ import annotations

import csv
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import PolyCollection

from .godunov import State
from .grid import Grid


def render_field(grid: Grid, state: State, path: str,
                 title: Optional[str] = None) -> None:
    """Color map of per-cell values in the (lambda, phi) plane."""
    verts = np.empty((grid.n_cells, 4, 2))
    verts[:, 0, 0] = grid.c_lam1
    verts[:, 0, 1] = grid.c_phi1
    verts[:, 1, 0] = grid.c_lam2
    verts[:, 1, 1] = grid.c_phi1
    verts[:, 2, 0] = grid.c_lam2
    verts[:, 2, 1] = grid.c_phi2
    verts[:, 3, 0] = grid.c_lam1
    verts[:, 3, 1] = grid.c_phi2

    fig, ax = plt.subplots(figsize=(8.0, 4.2))
    coll = PolyCollection(verts, array=state.u, cmap="RdYlBu_r",
                          edgecolors="none")
    ax.add_collection(coll)
    ax.set_xlim(0.0, 2.0 * np.pi)
    ax.set_ylim(-0.5 * np.pi, 0.5 * np.pi)
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel(r"$\phi$")
    umin, umax = float(np.min(state.u)), float(np.max(state.u))
    ax.set_title(title or f"t = {state.time:g}   "
                          f"(u_min, u_max) = ({umin:.3f}, {umax:.3f})")
    fig.colorbar(coll, ax=ax, shrink=0.9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_field_csv(csv_path: str, out_path: str,
                     title: Optional[str] = None) -> None:
    """Scatter color map rendered from a written field CSV."""
    lam, phi, u = [], [], []
    with open(csv_path, newline="") as f:
        for row in csv.DictReader(f):
            lam.append(float(row["lambda_center"]))
            phi.append(float(row["phi_center"]))
            u.append(float(row["u"]))
    fig, ax = plt.subplots(figsize=(8.0, 4.2))
    sc = ax.scatter(lam, phi, c=u, s=6, cmap="RdYlBu_r", linewidths=0)
    ax.set_xlim(0.0, 2.0 * np.pi)
    ax.set_ylim(-0.5 * np.pi, 0.5 * np.pi)
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel(r"$\phi$")
    if title:
        ax.set_title(title)
    fig.colorbar(sc, ax=ax, shrink=0.9)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def render_convergence(rows: Sequence[tuple], path: str) -> None:
    """Log-log error vs cell width with first/second order guide lines."""
    dlam = np.array([r[1] for r in rows])
    err = np.array([r[2] for r in rows])
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.loglog(dlam, err, "o-", label="measured")
    if np.all(err > 0.0):
        for order, style in ((1, "--"), (2, ":")):
            guide = err[0] * (dlam / dlam[0]) ** order
            ax.loglog(dlam, guide, style, color="gray",
                      label=f"order {order}")
    ax.set_xlabel(r"$\Delta\lambda$")
    ax.set_ylabel("L1 error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
