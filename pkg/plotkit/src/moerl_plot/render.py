"""Figure builders and the deterministic save path.

Every builder takes one experiment group (all seeds) and returns a single
matplotlib figure plus a small metadata dict the tests introspect. Output
is reproducible byte for byte: Agg backend, fixed figure sizes, pinned SVG
hash salt, and no date stamps in the files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "moerl-plot"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .frames import (Run, band_halfwidth, expert_grids, group_runs,
                     is_interleaved, stack, switch_steps, task_order)

SWITCH_STYLE = {"color": "0.45", "linestyle": "--", "linewidth": 1.0}


def _draw_switches(ax, steps: list[int]) -> None:
    for step in steps:
        ax.axvline(step, **SWITCH_STYLE)


def _band_plot(ax, x, matrix, kind, label=None, color=None):
    mean = matrix.mean(axis=0)
    half = band_halfwidth(matrix, kind)
    line, = ax.plot(x, mean, label=label, color=color, linewidth=1.4)
    ax.fill_between(x, mean - half, mean + half,
                    color=line.get_color(), alpha=0.25, linewidth=0)
    return float(half.max()) if half.size else 0.0


def curves_figure(name: str, runs: list[Run], band: str):
    """Normalized return over training, seed mean with uncertainty band.

    Interleaved schedules get one panel per task; segmented ones a single
    timeline with dashed lines at every task switch. The legend carries
    the run-average normalized score in parentheses.
    """
    matrix = stack(runs, "return_norm")
    steps = runs[0].steps
    tasks = runs[0].tasks
    label = f"{name} ({matrix.mean():.2f})"
    switches = switch_steps(runs)

    if is_interleaved(tasks):
        games = task_order(tasks)
        fig, axes = plt.subplots(1, len(games), sharey=True, squeeze=False,
                                 figsize=(4.2 * len(games), 3.4))
        widest = 0.0
        for ax, game in zip(axes[0], games):
            idx = [i for i, t in enumerate(tasks) if t == game]
            widest = max(widest, _band_plot(ax, steps[idx], matrix[:, idx],
                                            band, label=label))
            ax.set_title(game)
            ax.set_xlabel("env steps")
        axes[0][0].set_ylabel("normalized return")
        axes[0][0].legend(loc="upper left", fontsize="small")
        panels = len(games)
    else:
        fig, ax = plt.subplots(figsize=(7.0, 3.6))
        widest = _band_plot(ax, steps, matrix, band, label=label)
        _draw_switches(ax, switches)
        ax.set_xlabel("env steps")
        ax.set_ylabel("normalized return")
        ax.legend(loc="upper left", fontsize="small")
        panels = 1

    fig.suptitle(name)
    fig.tight_layout()
    meta = {"panels": panels, "switch_lines": len(switches),
            "band_halfwidth_max": widest, "label": label}
    return fig, meta


def dormant_figure(name: str, runs: list[Run], band: str):
    """Dormant-unit fractions for actor and critic over training."""
    steps = runs[0].steps
    switches = switch_steps(runs)
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    widest = 0.0
    for column, label in (("dormant_actor", "actor"),
                          ("dormant_critic", "critic")):
        widest = max(widest, _band_plot(ax, steps, stack(runs, column),
                                        band, label=label))
    _draw_switches(ax, switches)
    ax.set_xlabel("env steps")
    ax.set_ylabel("dormant fraction")
    ax.set_ylim(bottom=0.0)
    ax.legend(loc="upper left", fontsize="small")
    fig.suptitle(name)
    fig.tight_layout()
    meta = {"panels": 1, "switch_lines": len(switches),
            "band_halfwidth_max": widest}
    return fig, meta


def gradsim_figure(name: str, runs: list[Run], band: str):
    """Sequential gradient-bucket cosine similarity over training.

    Only bucket-completion updates carry a value; the blank rows are the
    same for every seed of a group, so the series stay aligned.
    """
    sims = stack(runs, "grad_sim")
    mask = ~np.isnan(sims[0])
    if not mask.any():
        raise ValueError(f"{name}: no gradient-similarity values "
                         "(run too short for two full buckets)")
    if np.isnan(sims[:, mask]).any():
        raise ValueError(f"{name}: seeds disagree on similarity rows")

    steps = runs[0].steps[mask]
    switches = switch_steps(runs)
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    widest = _band_plot(ax, steps, sims[:, mask], band)
    ax.axhline(0.0, color="0.8", linewidth=0.8)
    _draw_switches(ax, switches)
    ax.set_xlabel("env steps")
    ax.set_ylabel("bucket cosine similarity")
    ax.set_ylim(-1.05, 1.05)
    fig.suptitle(name)
    fig.tight_layout()
    meta = {"panels": 1, "switch_lines": len(switches),
            "band_halfwidth_max": widest, "points": int(mask.sum())}
    return fig, meta


def experts_figure(name: str, runs: list[Run], band: str):
    """Routing-probability heat grids, one panel per (task, layer).

    Rows are update windows within the task, columns experts; each row is
    normalized, so a hardcoded router shows one saturated column per task.
    """
    grids = expert_grids(runs)
    games = list(grids)
    layers = len(next(iter(grids.values())))
    fig, axes = plt.subplots(len(games), layers, squeeze=False,
                             figsize=(3.0 * layers, 2.4 * len(games)))
    image = None
    for r, game in enumerate(games):
        for l in range(layers):
            ax = axes[r][l]
            grid = grids[game][l]
            image = ax.imshow(grid, aspect="auto", origin="lower",
                              vmin=0.0, vmax=1.0, interpolation="nearest")
            ax.set_xticks(range(grid.shape[1]))
            if r == 0:
                ax.set_title(f"layer {l}")
            if l == 0:
                ax.set_ylabel(f"{game}\nupdate")
            if r == len(games) - 1:
                ax.set_xlabel("expert")
    fig.suptitle(name)
    fig.colorbar(image, ax=[ax for row in axes for ax in row],
                 fraction=0.03, pad=0.02)
    meta = {"panels": len(games) * layers, "switch_lines": 0,
            "layers": layers, "tasks": games}
    return fig, meta


KINDS = {
    "curves": curves_figure,
    "experts": experts_figure,
    "dormant": dormant_figure,
    "gradsim": gradsim_figure,
}


def build_figures(kind: str, paths, band: str = "stderr") -> dict:
    """Build one figure per experiment group; {name: (figure, meta)}."""
    if kind not in KINDS:
        raise ValueError(f"unknown figure kind: {kind!r}")
    builder = KINDS[kind]
    return {name: builder(name, runs, band)
            for name, runs in group_runs(paths).items()}


def save_figure(fig, path: Path) -> None:
    # strip the volatile metadata each writer would otherwise embed
    metadata = {"Date": None} if path.suffix == ".svg" else {"Software": None}
    fig.savefig(path, metadata=metadata)
    plt.close(fig)


def render(kind: str, paths, out_dir, band: str = "stderr",
           fmt: str = "png") -> list[Path]:
    """Render every group matched by paths; returns the files written."""
    if fmt not in ("png", "svg"):
        raise ValueError(f"unknown output format: {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (fig, _meta) in build_figures(kind, paths, band).items():
        target = out / f"{kind}_{name}.{fmt}"
        save_figure(fig, target)
        written.append(target)
    return written
