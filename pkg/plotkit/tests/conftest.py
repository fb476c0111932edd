import csv
import json

import pytest

HEADER = [
    "step", "task", "seed", "return_raw", "return_norm", "dormant_actor",
    "dormant_critic", "grad_sim", "policy_loss", "value_loss", "entropy",
    "grad_norm", "expert_probs_json",
]

CRL_TASKS = (["SI"] * 2 + ["BO"] * 2 + ["Ast"] * 2) * 2   # 6 segments, 5 switches
MTRL_TASKS = ["SI", "BO", "Ast"] * 12                      # interleaved


def write_log(path, tasks, seed, *, norm=None, sims=None, probs=None,
              dormant=None):
    """Synthetic run log with the trainer's column layout."""
    n = len(tasks)
    norm = norm if norm is not None else [round(0.05 * i, 3) for i in range(n)]
    dormant = dormant if dormant is not None else [0.2] * n
    rows = []
    for i, task in enumerate(tasks):
        sim = "" if sims is None or sims[i] is None else sims[i]
        blob = "[]" if probs is None else json.dumps(probs[i])
        rows.append([8192 * (i + 1), task, seed, 10.0 * norm[i], norm[i],
                     dormant[i], dormant[i] / 2.0, sim,
                     0.01, 0.5, 1.2, 3.0, blob])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        writer.writerows(rows)
    return path


@pytest.fixture
def make_log(tmp_path):
    """Write a synthetic log under tmp_path; returns its path."""

    def _make(name, tasks, seed, **kwargs):
        return write_log(tmp_path / name, tasks, seed, **kwargs)

    return _make


@pytest.fixture
def crl_tasks():
    return list(CRL_TASKS)


@pytest.fixture
def mtrl_tasks():
    return list(MTRL_TASKS)


@pytest.fixture
def header():
    return list(HEADER)
