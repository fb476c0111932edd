"""Training diagnostics: dormant-unit counts, gradient-bucket similarity,
score normalization, and the delimited run log.

One CSV row is written per update. The similarity column is only populated
on updates where a gradient bucket completes; other rows leave it blank.
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque

import numpy as np

from .optim import cosine_similarity

CSV_HEADER = [
    "step", "task", "seed", "return_raw", "return_norm", "dormant_actor",
    "dormant_critic", "grad_sim", "policy_loss", "value_loss", "entropy",
    "grad_norm", "expert_probs_json",
]

# desk-scale reference returns used to put the three games on one axis;
# they cancel in any within-game comparison
REFERENCE_SCORES = {"SI": 150.0, "BO": 50.0, "Ast": 15.0}

DORMANT_TAU = 0.025


def dormant_fraction(hidden: list[np.ndarray], tau: float = DORMANT_TAU) -> float:
    """Fraction of hidden units whose mean |activation| is near-zero.

    A unit is dormant when its batch-mean absolute activation is at most
    tau times its layer's mean. A layer with no activity at all counts as
    fully dormant. Units pool across layers, so wider layers weigh more.
    """
    dormant = 0
    total = 0
    for h in hidden:
        score = np.abs(h).mean(axis=0)
        total += score.size
        layer_mean = score.mean()
        if layer_mean == 0.0:
            dormant += score.size
        else:
            dormant += int((score / layer_mean <= tau).sum())
    if total == 0:
        return 0.0
    return dormant / total


def bucket_capacity(total_updates: int) -> int:
    """Updates per gradient bucket: about thirty buckets over a run."""
    return max(1, math.ceil(total_updates / 30))


class GradientBuckets:
    """Average consecutive update gradients into fixed-size buckets.

    Each completed bucket is compared (cosine) against the previously
    completed one; push returns that similarity on completion updates and
    None otherwise. The last few bucket means are kept for inspection.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("bucket capacity must be at least 1")
        self.capacity = capacity
        self.history: deque[np.ndarray] = deque(maxlen=5)
        self.latest: float | None = None
        self._sum: np.ndarray | None = None
        self._count = 0
        self._width: int | None = None

    def push(self, grad_vector: np.ndarray) -> float | None:
        if self._width is None:
            self._width = grad_vector.size
        elif grad_vector.size != self._width:
            raise ValueError("gradient length changed mid-run")
        self._sum = grad_vector.copy() if self._sum is None else self._sum + grad_vector
        self._count += 1
        if self._count < self.capacity:
            return None
        mean = self._sum / self._count
        self._sum = None
        self._count = 0
        similarity = None
        if self.history:
            similarity = cosine_similarity(self.history[-1], mean)
            self.latest = similarity
        self.history.append(mean)
        return similarity


def normalize_score(raw: float, reference: float, random_score: float = 0.0) -> float:
    return (raw - random_score) / (reference - random_score)


def iqm(values) -> float:
    """Interquartile mean: drop the lowest and highest quarter, average the rest."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    k = v.size // 4
    trimmed = v[k : v.size - k]
    return float(trimmed.mean())


def usage_json(usage: dict[str, np.ndarray]) -> str:
    """Compact per-layer routing probabilities, in layer insertion order."""
    rows = [[round(float(p), 6) for p in probs] for probs in usage.values()]
    return json.dumps(rows, separators=(",", ":"))


class RunLog:
    """Append-only CSV sink, one row per update, flushed as written."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(CSV_HEADER)
        self._fh.flush()

    def write(self, step: int, task: str, seed: int, return_raw: float,
              return_norm: float, dormant_actor: float, dormant_critic: float,
              grad_sim: float | None, policy_loss: float, value_loss: float,
              entropy: float, grad_norm: float, expert_probs_json: str) -> None:
        self._writer.writerow([
            step, task, seed, return_raw, return_norm, dormant_actor,
            dormant_critic, "" if grad_sim is None else grad_sim,
            policy_loss, value_loss, entropy, grad_norm, expert_probs_json,
        ])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
