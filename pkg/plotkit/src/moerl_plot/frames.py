"""CSV loading and aggregation behind the figure builders.

A run log holds one row per training update. Seeds of the same experiment
share a filename prefix (``<name>_<seed>.csv``, the layout the trainer's
manifest produces) and must agree on the step and task columns so their
curves can be averaged pointwise.
"""

from __future__ import annotations

import csv
import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EXPECTED_HEADER = [
    "step", "task", "seed", "return_raw", "return_norm", "dormant_actor",
    "dormant_critic", "grad_sim", "policy_loss", "value_loss", "entropy",
    "grad_norm", "expert_probs_json",
]

NUMERIC_COLUMNS = (
    "return_raw", "return_norm", "dormant_actor", "dormant_critic",
    "grad_sim", "policy_loss", "value_loss", "entropy", "grad_norm",
)

# a task revisited more often than this is interleaved round-robin style,
# not a segmented continual schedule
BLOCKS_MEANING_INTERLEAVED = 10


@dataclass
class Run:
    """One seed's log, parsed into aligned columns."""

    path: Path
    seed: int
    steps: np.ndarray
    tasks: list[str]
    numeric: dict[str, np.ndarray]
    expert_probs: list[list[list[float]]]


def load_run(path) -> Run:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EXPECTED_HEADER:
            raise ValueError(f"{path}: unexpected run-log schema: {header}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: log has no data rows")

    columns = {name: [row[i] for row in rows] for i, name in enumerate(header)}
    numeric = {}
    for name in NUMERIC_COLUMNS:
        # grad_sim is blank except on bucket-completion updates
        numeric[name] = np.array(
            [float(v) if v != "" else math.nan for v in columns[name]])
    try:
        probs = [json.loads(v) for v in columns["expert_probs_json"]]
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: bad expert_probs_json: {err}") from err
    return Run(
        path=path,
        seed=int(columns["seed"][0]),
        steps=np.array([int(v) for v in columns["step"]]),
        tasks=columns["task"],
        numeric=numeric,
        expert_probs=probs,
    )


def group_name(path) -> str:
    """Experiment name from a log filename, dropping the seed suffix."""
    stem = Path(path).stem
    match = re.fullmatch(r"(.+)_(\d+)", stem)
    return match.group(1) if match else stem


def group_runs(paths) -> dict[str, list[Run]]:
    """Load logs and bucket them by experiment name, seeds sorted.

    All seeds of a group must share the step sequence and task schedule;
    anything else means the files do not belong to one experiment.
    """
    groups: dict[str, list[Run]] = {}
    for path in sorted(Path(p) for p in paths):
        groups.setdefault(group_name(path), []).append(load_run(path))
    for name, runs in sorted(groups.items()):
        runs.sort(key=lambda r: r.seed)
        first = runs[0]
        for run in runs[1:]:
            if (not np.array_equal(run.steps, first.steps)
                    or run.tasks != first.tasks):
                raise ValueError(
                    f"{name}: {run.path.name} disagrees with "
                    f"{first.path.name} on steps or schedule")
    return dict(sorted(groups.items()))


def stack(runs: list[Run], column: str) -> np.ndarray:
    """Seed-major matrix of one numeric column, shape [seeds, updates]."""
    return np.vstack([run.numeric[column] for run in runs])


def band_halfwidth(matrix: np.ndarray, kind: str) -> np.ndarray:
    """Half-width of the uncertainty band around the seed mean.

    stderr bands use the sample standard error; ci95 scales it by 1.96.
    A single seed has no spread, so the band collapses to zero width.
    """
    if kind not in ("stderr", "ci95"):
        raise ValueError(f"unknown band kind: {kind!r}")
    n = matrix.shape[0]
    if n == 1:
        return np.zeros(matrix.shape[1])
    stderr = matrix.std(axis=0, ddof=1) / math.sqrt(n)
    return stderr if kind == "stderr" else 1.96 * stderr


def task_order(tasks: list[str]) -> list[str]:
    return list(dict.fromkeys(tasks))


def boundary_indices(tasks: list[str]) -> list[int]:
    """Row indices where the task differs from the previous row."""
    return [i for i in range(1, len(tasks)) if tasks[i] != tasks[i - 1]]


def is_interleaved(tasks: list[str]) -> bool:
    blocks = Counter()
    for i, task in enumerate(tasks):
        if i == 0 or task != tasks[i - 1]:
            blocks[task] += 1
    return any(count > BLOCKS_MEANING_INTERLEAVED for count in blocks.values())


def switch_steps(runs: list[Run]) -> list[int]:
    """Step counts at which a segmented schedule changes task.

    Interleaved schedules switch every update; marking those rows would
    paint the whole axis, so they get no switch lines at all.
    """
    tasks = runs[0].tasks
    if is_interleaved(tasks):
        return []
    steps = runs[0].steps
    return [int(steps[i - 1]) for i in boundary_indices(tasks)]


def expert_grids(runs: list[Run]) -> dict[str, list[np.ndarray]]:
    """Routing-probability heat grids, one per (task, layer).

    Returns {task: [matrix of shape [rows_of_task, num_experts] per layer]}
    with rows averaged across seeds and renormalized to sum to one.
    """
    first = runs[0].expert_probs
    layers = len(first[0])
    if layers == 0:
        raise ValueError(
            f"{runs[0].path}: no routing probabilities in this log "
            "(expert_probs_json is empty; was this a plain trunk run?)")
    for run in runs:
        for row in run.expert_probs:
            if len(row) != layers:
                raise ValueError(f"{run.path}: layer count changes mid-run")

    # mean across seeds, layer by layer: expert counts may differ per layer
    layer_means = []
    for layer in range(layers):
        stacked = np.array(
            [[row[layer] for row in run.expert_probs] for run in runs],
            dtype=np.float64)  # [seeds, rows, experts]
        layer_means.append(stacked.mean(axis=0))

    tasks = runs[0].tasks
    grids: dict[str, list[np.ndarray]] = {}
    for task in task_order(tasks):
        idx = [i for i, t in enumerate(tasks) if t == task]
        per_layer = []
        for mean in layer_means:
            grid = mean[idx, :]
            sums = grid.sum(axis=1, keepdims=True)
            safe = np.where(sums > 0, sums, 1.0)
            per_layer.append(grid / safe)
        grids[task] = per_layer
    return grids
