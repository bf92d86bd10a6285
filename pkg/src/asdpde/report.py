"""Result bundle writers: delimited output, JSON reports, figures.

All writers are deterministic: floats are serialized with ``repr``
(shortest round-trip form), rows follow the fixed node ordering, and
JSON keys are sorted, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import os

import numpy as np

__all__ = [
    "write_solution_csv",
    "write_trajectory_csv",
    "write_report_json",
    "write_manifest",
    "plot_solution",
    "plot_trajectory",
]


def _fmt(x) -> str:
    return repr(float(x))


def write_solution_csv(path, grid, u) -> None:
    cols = ["x", "y"][: grid.dim]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["node"] + cols + ["value"]) + "\n")
        for i in range(grid.n_nodes):
            coords = [_fmt(c) for c in grid.coords[i]]
            fh.write(",".join([str(i)] + coords + [_fmt(u[i])]) + "\n")


def write_trajectory_csv(path, trajectory) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,t,node,value\n")
        for k, t in enumerate(trajectory.times):
            for i, v in enumerate(trajectory.values[k]):
                fh.write(f"{k},{_fmt(t)},{i},{_fmt(v)}\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_report_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(path, config_text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_text)
        if not config_text.endswith("\n"):
            fh.write("\n")


def _matplotlib():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_solution(path, grid, u, title="solution") -> None:
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(6, 4))
    if grid.dim == 1:
        ax.plot(grid.coords[:, 0], u, marker=".", lw=1)
        ax.set_xlabel("x")
        ax.set_ylabel("u")
    else:
        nx, ny = grid.counts
        im = ax.pcolormesh(
            grid.axis_coords[0],
            grid.axis_coords[1],
            u.reshape(nx, ny).T,
            shading="nearest",
        )
        fig.colorbar(im, ax=ax)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_trajectory(path, grid, trajectory, title="trajectory") -> None:
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(6, 4))
    n = trajectory.values.shape[1]
    if n <= 8:
        for i in range(n):
            ax.plot(trajectory.times, trajectory.values[:, i], lw=1,
                    label=f"node {i}")
        ax.legend(fontsize="small")
        ax.set_xlabel("t")
        ax.set_ylabel("u")
    else:
        im = ax.pcolormesh(
            trajectory.times,
            np.arange(n),
            trajectory.values.T,
            shading="nearest",
        )
        fig.colorbar(im, ax=ax)
        ax.set_xlabel("t")
        ax.set_ylabel("node")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)
