"""Training harness: expands a schedule into updates and logs one CSV row each.

The harness owns everything the learner must not see directly. Task identity
reaches the network only through the routing context, so a network whose
routers ignore task features behaves identically under any schedule slicing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .envs import NUM_ACTIONS, OBS_DIM, VecTask
from .metrics import (
    GradientBuckets,
    RunLog,
    bucket_capacity,
    dormant_fraction,
    normalize_score,
    usage_json,
)
from .moe import RouterContext
from .networks import ActorCritic
from .optim import linear_anneal
from .ppo import collect_rollout, compute_gae, flatten_rollout, update
from .rng import STREAM_ACTION, STREAM_SHUFFLE, stream

PROBE_ROWS = 1024  # dormancy probe size, drawn from the head of each rollout


@dataclass(frozen=True)
class UpdatePlan:
    task: int     # routing task id: index into the deduplicated game list
    game: str
    env_key: int  # identity of the vectorized-lane pool entry


def plan_updates(schedule, total_updates: int) -> tuple[list[str], list[UpdatePlan]]:
    """Expand a schedule into one plan per update.

    Single trains the one game throughout. MTRL round-robins, one update per
    game per cycle, with persistent per-game lanes. CRL cuts the update budget
    into equal segments over games * passes; each segment starts fresh lanes
    while network and optimizer state carry over.
    """
    tasks = list(dict.fromkeys(schedule.games))
    index = {g: i for i, g in enumerate(tasks)}
    if schedule.mode == "Single":
        return tasks, [UpdatePlan(0, schedule.games[0], 0)] * total_updates
    plans: list[UpdatePlan] = []
    if schedule.mode == "MTRL":
        order = schedule.games
        for u in range(total_updates):
            game = order[u % len(order)]
            plans.append(UpdatePlan(index[game], game, index[game]))
    else:  # CRL
        segments = schedule.games * schedule.passes
        count = len(segments)
        bounds = [round(i * total_updates / count) for i in range(count + 1)]
        for s, game in enumerate(segments):
            for _ in range(bounds[s], bounds[s + 1]):
                plans.append(UpdatePlan(index[game], game, s * 16 + index[game]))
    return tasks, plans


def run_training(cfg: RunConfig, csv_path, on_update=None) -> ActorCritic:
    """Train one seed end to end, streaming telemetry rows to csv_path.

    Returns the trained network (useful for tests and interactive probing).
    on_update, if given, is called as on_update(done, total, net) after each
    row, giving progress reporters and probes a hook into the live run.
    """
    ppo = cfg.ppo
    total = ppo.total_updates
    tasks, plans = plan_updates(cfg.schedule, total)
    net = ActorCritic(cfg.network, OBS_DIM, NUM_ACTIONS, len(tasks), cfg.seed)
    buckets = GradientBuckets(bucket_capacity(total))
    action_rng = stream(cfg.seed, STREAM_ACTION, 0)
    shuffle_rng = stream(cfg.seed, STREAM_SHUFFLE, 0)
    lanes: dict[int, VecTask] = {}
    carry = dict.fromkeys(range(len(tasks)), 0.0)  # last observed mean return
    latest_sim = 0.0
    with RunLog(csv_path) as log:
        for u, plan in enumerate(plans):
            vec = lanes.get(plan.env_key)
            if vec is None:
                if cfg.schedule.mode == "CRL":
                    lanes.clear()  # a finished segment's lanes never come back
                vec = VecTask(plan.game, ppo.num_envs, cfg.seed,
                              stream_salt=plan.env_key)
                lanes[plan.env_key] = vec
            ctx = RouterContext(task_id=plan.task, num_tasks=len(tasks),
                                grad_sim=latest_sim)
            roll = collect_rollout(net, vec, ctx, ppo.rollout_steps, action_rng)
            adv, ret = compute_gae(roll.rewards, roll.dones, roll.values,
                                   roll.bootstrap, ppo.gae_gamma, ppo.gae_lambda)
            data = flatten_rollout(roll, adv, ret)
            lr = linear_anneal(ppo.lr, u, total) if ppo.anneal else ppo.lr
            stats = update(net, ppo, ctx, data, lr, shuffle_rng)

            sim = buckets.push(stats.grad_vector)
            if sim is not None:
                latest_sim = sim
                net.on_similarity(sim)

            probe = roll.obs.reshape(-1, vec.obs_dim)[:PROBE_ROWS]
            hid_a, hid_c = net.probe_hidden(probe, ctx)
            if roll.episodes:
                carry[plan.task] = float(np.mean([ep.ret for ep in roll.episodes]))
            raw = carry[plan.task]
            norm = normalize_score(raw, cfg.reference_scores[plan.game],
                                   cfg.random_scores.get(plan.game, 0.0))
            log.write(
                step=(u + 1) * ppo.batch_size,
                task=plan.game,
                seed=cfg.seed,
                return_raw=raw,
                return_norm=norm,
                dormant_actor=dormant_fraction(hid_a),
                dormant_critic=dormant_fraction(hid_c),
                grad_sim=sim,
                policy_loss=stats.policy_loss,
                value_loss=stats.value_loss,
                entropy=stats.entropy,
                grad_norm=stats.grad_norm,
                expert_probs_json=usage_json(stats.usage),
            )
            if on_update is not None:
                on_update(u + 1, total, net)
    return net
