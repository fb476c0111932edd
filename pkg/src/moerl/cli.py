"""Command line entry points.

moerl run        train an experiment (config file and/or preset) across seeds
moerl summarize  aggregate telemetry CSVs into final-performance tables
moerl gradcheck  cross-check analytic gradients against finite differences

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import (
    experiment_from_dict,
    experiment_to_dict,
    parse_seed_spec,
    run_config_from_dict,
    run_config_to_dict,
)
from .errors import ConfigError
from .metrics import CSV_HEADER, iqm

BLOCKS_MEANING_INTERLEAVED = 10  # more revisits than any pass-based schedule


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="moerl", description=__doc__.strip().splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train an experiment across seeds")
    run_p.add_argument("--config", help="JSON experiment file (a manifest also works)")
    run_p.add_argument("--preset", help="named preset; see moerl.presets")
    run_p.add_argument("--seeds", help="seed list: 3, 0,1,2 or 0..9")
    run_p.add_argument("--out", help="output directory (default from config)")

    sum_p = sub.add_parser("summarize", help="tabulate final normalized returns")
    sum_p.add_argument("csv", nargs="+", help="telemetry CSV files, one per seed")
    sum_p.add_argument("--iqm", action="store_true",
                       help="add an interquartile-mean column over seeds")
    sum_p.add_argument("--json", action="store_true", dest="as_json",
                       help="emit the table as JSON")

    sub.add_parser("gradcheck", help="finite-difference audit of the gradients")
    return p


# --------------------------------------------------------------------- run


def _worker_count(jobs: int) -> int:
    raw = os.environ.get("MOERL_THREADS")
    if raw is None:
        limit = os.cpu_count() or 1
    else:
        try:
            limit = int(raw)
        except ValueError:
            raise ConfigError(f"MOERL_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(limit, jobs))


def _train_worker(job) -> str:
    run_dict, seed, path = job
    from .harness import run_training

    cfg = run_config_from_dict(run_dict)
    cfg.seed = seed
    run_training(cfg, path)
    return path


def cmd_run(args) -> int:
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except OSError as err:
            raise ConfigError(f"cannot read config {args.config}: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"malformed JSON in {args.config}: {err}") from err
    else:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    if isinstance(raw.get("config"), dict):
        raw = raw["config"]
    if args.preset:
        raw["preset"] = args.preset
    if args.seeds:
        raw["seeds"] = parse_seed_spec(args.seeds)
    if args.out:
        raw["out"] = args.out
    exp = experiment_from_dict(raw)

    os.makedirs(exp.out, exist_ok=True)
    files = {f"{exp.name}_{seed}.csv": seed for seed in exp.seeds}
    manifest_path = os.path.join(exp.out, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump({"version": __version__, "config": experiment_to_dict(exp),
                   "runs": files}, fh, indent=2, sort_keys=True)
        fh.write("\n")

    run_dict = run_config_to_dict(exp.run)
    jobs = [(run_dict, seed, os.path.join(exp.out, name))
            for name, seed in files.items()]
    workers = _worker_count(len(jobs))
    if workers == 1:
        from .harness import run_training

        for _, seed, path in jobs:
            cfg = run_config_from_dict(run_dict)
            cfg.seed = seed
            stride = max(1, cfg.ppo.total_updates // 20)

            def report(done, total, net, seed=seed):
                if done % stride == 0 or done == total:
                    print(f"{exp.name} seed {seed}: update {done}/{total}", flush=True)

            run_training(cfg, path, on_update=report)
            print(f"wrote {path}", flush=True)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for path in pool.map(_train_worker, jobs):
                print(f"wrote {path}", flush=True)
    print(f"wrote {manifest_path}", flush=True)
    return 0


# --------------------------------------------------------------- summarize


def _read_seed_streams(paths) -> dict[int, list[dict]]:
    streams: dict[int, list[dict]] = {}
    for path in paths:
        try:
            fh = open(path, newline="")
        except OSError as err:
            raise ConfigError(f"cannot read {path}: {err}") from err
        with fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CSV_HEADER:
                raise ConfigError(f"{path} does not carry the telemetry schema")
            for row in reader:
                streams.setdefault(int(row["seed"]), []).append(row)
    if not streams:
        raise ConfigError("no telemetry rows found")
    return streams


def _group_blocks(rows) -> list[tuple[str, list[dict]]]:
    """Cut one seed's stream into task groups.

    Contiguous same-task rows form a block. A task revisited more often than
    any pass-based schedule allows means the stream interleaves updates, so
    blocks pool per task; otherwise each revisit is its own group, suffixed
    -2, -3, ... in visit order.
    """
    blocks: list[tuple[str, list[dict]]] = []
    for row in rows:
        if blocks and blocks[-1][0] == row["task"]:
            blocks[-1][1].append(row)
        else:
            blocks.append((row["task"], [row]))
    revisits = Counter(task for task, _ in blocks)
    if max(revisits.values()) > BLOCKS_MEANING_INTERLEAVED:
        pooled: dict[str, list[dict]] = {}
        for task, chunk in blocks:
            pooled.setdefault(task, []).extend(chunk)
        return list(pooled.items())
    seen: Counter = Counter()
    groups = []
    for task, chunk in blocks:
        seen[task] += 1
        key = task if seen[task] == 1 else f"{task}-{seen[task]}"
        groups.append((key, chunk))
    return groups


def _final_window_mean(rows) -> float:
    window = max(1, math.ceil(0.05 * len(rows)))
    tail = [float(r["return_norm"]) for r in rows[-window:]]
    return sum(tail) / len(tail)


def summarize_streams(streams: dict[int, list[dict]], want_iqm: bool) -> dict:
    """Final-window normalized return per group: mean and stderr over seeds."""
    table: dict[str, dict[int, float]] = {}
    for seed in sorted(streams):
        for key, rows in _group_blocks(streams[seed]):
            table.setdefault(key, {})[seed] = _final_window_mean(rows)

    def stats(values: list[float]) -> dict:
        n = len(values)
        mean = float(np.mean(values))
        stderr = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out = {"mean": mean, "stderr": stderr, "n": n}
        if want_iqm:
            out["iqm"] = float(iqm(values))
        return out

    result = {key: stats(list(per_seed.values())) for key, per_seed in table.items()}
    totals = []
    for seed in sorted(streams):
        vals = [per_seed[seed] for per_seed in table.values() if seed in per_seed]
        if vals:
            totals.append(float(np.mean(vals)))
    result["Total"] = stats(totals)
    return result


def cmd_summarize(args) -> int:
    result = summarize_streams(_read_seed_streams(args.csv), args.iqm)
    if args.as_json:
        print(json.dumps(result, indent=2))
        return 0
    width = max(len(k) for k in result)
    header = f"{'group':<{width}}  {'mean':>8}  {'stderr':>8}  {'n':>3}"
    if args.iqm:
        header += f"  {'iqm':>8}"
    print(header)
    for key, st in result.items():
        line = f"{key:<{width}}  {st['mean']:8.4f}  {st['stderr']:8.4f}  {st['n']:>3}"
        if args.iqm:
            line += f"  {st['iqm']:8.4f}"
        print(line)
    return 0


# --------------------------------------------------------------- gradcheck


class _LinearExpert:
    """Minimal expert for layer-level checks: a bare matmul."""

    def __init__(self, w):
        self.w = w

    def forward(self, t):
        from . import tensor as T

        return T.matmul(t, self.w)


def _soft_mixture_layer_error() -> float:
    from . import tensor as T
    from .fdcheck import compare_gradients
    from .moe import softmoe_forward
    from .tensor import Tape, Tensor

    rng = np.random.default_rng(3)
    arrays = [rng.standard_normal((3, 4)),            # tokens
              rng.standard_normal((4, 6)),            # slot logits map (n=3, p=2)
              *(rng.standard_normal((4, 5)) for _ in range(3))]
    weight = rng.standard_normal((3, 5))

    def f(arrs):
        x, phi, *ws = (Tensor(a) for a in arrs)
        y, _ = softmoe_forward(x, phi, [_LinearExpert(w) for w in ws], 2)
        return float((y.data * weight).sum())

    def taped(arrs):
        x, phi, *ws = (Tensor(a, requires_grad=True) for a in arrs)
        y, _ = softmoe_forward(x, phi, [_LinearExpert(w) for w in ws], 2)
        return T.reduce_sum(T.mul(y, Tensor(weight))), (x, phi, *ws)

    with Tape() as tape:
        loss, tensors = taped(arrays)
    grads = tape.gradients(loss)
    analytic = [grads[id(t)] for t in tensors]
    return compare_gradients(f, arrays, analytic)


def _top1_layer_error() -> float:
    from . import tensor as T
    from .fdcheck import compare_gradients
    from .moe import topk_forward
    from .tensor import Tape, Tensor

    rng = np.random.default_rng(4)
    # inputs sit near corners so every argmax margin is O(1): finite
    # differencing never flips the selected expert
    x = np.vstack([3.0 * np.eye(3), [[3.0, 0.0, 0.0]]])
    x = x + 0.05 * rng.standard_normal(x.shape)
    arrays = [x,
              np.eye(3),                              # router weights
              np.zeros(3),                            # router bias
              *(rng.standard_normal((3, 5)) for _ in range(3))]
    weight = rng.standard_normal((4, 5))

    def f(arrs):
        xb, rw, rb, *ws = (Tensor(a) for a in arrs)
        y, _, _ = topk_forward(xb, rw, rb, [_LinearExpert(w) for w in ws], k=1)
        return float((y.data * weight).sum())

    def taped(arrs):
        xb, rw, rb, *ws = (Tensor(a, requires_grad=True) for a in arrs)
        y, _, _ = topk_forward(xb, rw, rb, [_LinearExpert(w) for w in ws], k=1)
        return T.reduce_sum(T.mul(y, Tensor(weight))), (xb, rw, rb, *ws)

    with Tape() as tape:
        loss, tensors = taped(arrays)
    grads = tape.gradients(loss)
    analytic = [grads[id(t)] for t in tensors]
    return compare_gradients(f, arrays, analytic)


def _loss_gradient_error(kind: str, grad_sim: float = 0.0) -> float:
    from .fdcheck import compare_gradients
    from .moe import RouterContext, RouterSpec
    from .networks import ActorCritic, NetworkConfig
    from .ppo import PPOConfig, ppo_loss
    from .tensor import Tape

    if kind == "Baseline":
        net_cfg = NetworkConfig(architecture="Baseline", layer_size=8)
    else:
        net_cfg = NetworkConfig(architecture="Middle", layer_size=8,
                                routers=[RouterSpec(kind=kind, entropy_coef=0.01)])
    net = ActorCritic(net_cfg, obs_dim=6, act_dim=3, num_tasks=1, seed=6)
    ctx = RouterContext(grad_sim=grad_sim)
    rng = np.random.default_rng(12)
    obs = rng.standard_normal((4, 6))
    actions = rng.integers(0, 3, size=4)
    from . import tensor as T
    from .tensor import Tensor

    logits, _ = net.actor_logits(Tensor(obs), ctx)
    old_logprobs = T.log_softmax(logits, axis=1).data[np.arange(4), actions]
    old_logprobs = old_logprobs + 0.01 * rng.standard_normal(4)
    values, _ = net.critic_value(Tensor(obs), ctx)
    old_values = values.data + 0.01 * rng.standard_normal(4)
    advantages = rng.standard_normal(4)
    returns = values.data + 0.1 * rng.standard_normal(4)
    cfg = PPOConfig()

    params = [p for _, p in net.params.items()]
    arrays = [p.data.copy() for p in params]

    def loss():
        return ppo_loss(net, cfg, ctx, obs, actions, old_logprobs,
                        advantages, returns, old_values)[0]

    with Tape() as tape:
        grads = net.params.collect(tape.gradients(loss()))
    analytic = [grads[name] for name, _ in net.params.items()]

    def f(arrs):
        for p, a in zip(params, arrs):
            p.data[...] = a
        return loss().item()

    err = compare_gradients(f, arrays, analytic)
    for p, a in zip(params, arrays):
        p.data[...] = a
    return err


def cmd_gradcheck() -> int:
    checks = [
        ("soft mixture layer", _soft_mixture_layer_error),
        ("top-1 mixture layer", _top1_layer_error),
        ("full loss, plain trunk", lambda: _loss_gradient_error("Baseline")),
        ("full loss, soft mixture", lambda: _loss_gradient_error("SoftMoE")),
        ("full loss, top-1 mixture", lambda: _loss_gradient_error("TopK")),
        ("full loss, gradient-informed",
         lambda: _loss_gradient_error("SoftGradientMoE", grad_sim=0.37)),
    ]
    worst = 0.0
    for label, check in checks:
        err = check()
        worst = max(worst, err)
        verdict = "ok" if err < 1e-5 else "FAIL"
        print(f"{label:<30} max relative error {err:.3e}  {verdict}")
    if worst < 1e-5:
        print("gradients agree with finite differences")
        return 0
    print("gradient check FAILED", file=sys.stderr)
    return 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "summarize":
            return cmd_summarize(args)
        return cmd_gradcheck()
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # CLI boundary: anything else is a runtime failure
        print(f"failed: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
