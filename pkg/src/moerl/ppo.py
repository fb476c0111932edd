"""Clipped-surrogate policy optimization over the vectorized games.

One update = collect a rollout, estimate advantages, then several epochs of
shuffled minibatch gradient steps. The loss combines the clipped policy
surrogate, a clipped value regression, an action-entropy bonus, and optional
per-layer routing-entropy bonuses reported by the network's mixtures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .moe import RouterContext, taped_router_entropy
from .networks import ActorCritic, NetAux
from .optim import adam_step, clip_global_norm
from .tensor import Tape, Tensor


@dataclass
class PPOConfig:
    num_envs: int = 128
    rollout_steps: int = 64
    total_timesteps: int = 10_000_000
    lr: float = 9e-4
    anneal: bool = True
    gae_gamma: float = 0.99
    gae_lambda: float = 0.7
    update_epochs: int = 10
    num_minibatches: int = 8
    clip_eps: float = 0.2
    entropy_coef: float = 0.01
    vf_coef: float = 0.5
    max_grad_norm: float = 1.9
    adam_eps: float = 1e-5

    @property
    def batch_size(self) -> int:
        return self.num_envs * self.rollout_steps

    @property
    def total_updates(self) -> int:
        return self.total_timesteps // self.batch_size


@dataclass
class Rollout:
    """Trajectories from one collection phase, time-major [T, N, ...]."""

    obs: np.ndarray
    actions: np.ndarray
    logprobs: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    values: np.ndarray
    bootstrap: np.ndarray  # value of the observation after the last step
    episodes: list


@dataclass
class TrainData:
    """Flattened, advantage-annotated samples ready for minibatch epochs."""

    obs: np.ndarray
    actions: np.ndarray
    logprobs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    values: np.ndarray


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    grad_norm: float  # mean pre-clip global norm over minibatch steps
    grad_vector: np.ndarray  # mean post-clip flattened gradient
    usage: dict[str, np.ndarray]  # mean routing probabilities per MoE layer


def sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw per row; the last column is forced to close the CDF."""
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random((probs.shape[0], 1))
    return np.argmax(cdf >= u, axis=1)


def collect_rollout(net: ActorCritic, vec, ctx: RouterContext, steps: int,
                    action_rng: np.random.Generator) -> Rollout:
    """Step the vectorized task for a fixed horizon under the current policy.

    Runs untaped; per-step policy/value forwards are plain array math.
    """
    n = vec.num_lanes
    obs = np.empty((steps, n, vec.obs_dim))
    actions = np.empty((steps, n), dtype=np.int64)
    logprobs = np.empty((steps, n))
    rewards = np.empty((steps, n))
    dones = np.empty((steps, n))
    values = np.empty((steps, n))
    for t in range(steps):
        obs[t] = vec.observations
        logits, _ = net.actor_logits(Tensor(obs[t]), ctx)
        logp = T.log_softmax(logits, axis=1).data
        acts = sample_actions(np.exp(logp), action_rng)
        actions[t] = acts
        logprobs[t] = logp[np.arange(n), acts]
        value, _ = net.critic_value(Tensor(obs[t]), ctx)
        values[t] = value.data
        r, d, _ = vec.step(acts)
        rewards[t] = r
        dones[t] = d
    bootstrap, _ = net.critic_value(Tensor(vec.observations.copy()), ctx)
    return Rollout(obs, actions, logprobs, rewards, dones, values,
                   bootstrap.data, vec.drain_completed())


def compute_gae(rewards, dones, values, bootstrap, gamma: float, lam: float):
    """Lambda-weighted advantage estimates, swept once backward in time.

    dones[t] marks episode ends after step t; a terminal step neither
    bootstraps the next value nor carries accumulated advantage across.
    """
    steps = rewards.shape[0]
    advantages = np.zeros_like(rewards)
    lastgae = np.zeros_like(bootstrap)
    for t in range(steps - 1, -1, -1):
        nonterminal = 1.0 - dones[t]
        nextvalue = bootstrap if t == steps - 1 else values[t + 1]
        delta = rewards[t] + gamma * nextvalue * nonterminal - values[t]
        lastgae = delta + gamma * lam * nonterminal * lastgae
        advantages[t] = lastgae
    return advantages, advantages + values


def flatten_rollout(roll: Rollout, advantages: np.ndarray, returns: np.ndarray) -> TrainData:
    flat = lambda a: a.reshape((-1,) + a.shape[2:])
    return TrainData(flat(roll.obs), flat(roll.actions), flat(roll.logprobs),
                     flat(advantages), flat(returns), flat(roll.values))


def minibatch_slices(batch_size: int, num_minibatches: int, rng: np.random.Generator):
    """One epoch's shuffled index chunks: an exact partition of the batch."""
    perm = rng.permutation(batch_size)
    size = batch_size // num_minibatches
    for m in range(num_minibatches):
        yield perm[m * size : (m + 1) * size]


def ppo_loss(net: ActorCritic, cfg: PPOConfig, ctx: RouterContext,
             obs, actions, old_logprobs, advantages, returns, old_values):
    """Build the scalar loss for one minibatch; returns (loss, parts, auxes).

    advantages are standardized here, per minibatch.
    """
    adv = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    adv_col = Tensor(adv)

    aux_a = NetAux()
    logits, _ = net.actor_logits(Tensor(obs), ctx, aux_a)
    logp_all = T.log_softmax(logits, axis=1)
    new_logprob = T.take_per_row(logp_all, actions)
    ratio = T.exp(T.sub(new_logprob, Tensor(old_logprobs)))
    unclipped = T.mul(ratio, adv_col)
    clipped = T.mul(T.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv_col)
    pg_loss = T.neg(T.reduce_mean(T.minimum(unclipped, clipped)))

    probs = T.softmax(logits, axis=1)
    entropy = T.neg(T.reduce_mean(T.reduce_sum(T.mul(probs, logp_all), axis=1)))

    aux_c = NetAux()
    new_value, _ = net.critic_value(Tensor(obs), ctx, aux_c)
    err = T.sub(new_value, Tensor(returns))
    v_unclipped = T.mul(err, err)
    v_pred_clipped = T.add(Tensor(old_values),
                           T.clip(T.sub(new_value, Tensor(old_values)),
                                  -cfg.clip_eps, cfg.clip_eps))
    cerr = T.sub(v_pred_clipped, Tensor(returns))
    v_clipped = T.mul(cerr, cerr)
    v_loss = T.mul(T.reduce_mean(T.maximum(v_unclipped, v_clipped)), Tensor(0.5))

    loss = T.add(T.sub(pg_loss, T.mul(entropy, Tensor(cfg.entropy_coef))),
                 T.mul(v_loss, Tensor(cfg.vf_coef)))
    for coef, mass in aux_a.entropy_terms + aux_c.entropy_terms:
        loss = T.sub(loss, T.mul(taped_router_entropy([mass]), Tensor(coef)))

    parts = (pg_loss.item(), v_loss.item(), entropy.item())
    return loss, parts, (aux_a, aux_c)


def update(net: ActorCritic, cfg: PPOConfig, ctx: RouterContext, data: TrainData,
           lr: float, shuffle_rng: np.random.Generator) -> UpdateStats:
    """Run the full epoch/minibatch schedule and apply the gradient steps."""
    batch_size = data.obs.shape[0]
    pg_sum = v_sum = ent_sum = norm_sum = 0.0
    grad_accum = None
    usage_sum: dict[str, np.ndarray] = {}
    steps = 0
    for _ in range(cfg.update_epochs):
        for idx in minibatch_slices(batch_size, cfg.num_minibatches, shuffle_rng):
            with Tape() as tape:
                loss, parts, auxes = ppo_loss(
                    net, cfg, ctx,
                    data.obs[idx], data.actions[idx], data.logprobs[idx],
                    data.advantages[idx], data.returns[idx], data.values[idx],
                )
                grads = net.params.collect(tape.gradients(loss))
            grads, norm = clip_global_norm(grads, cfg.max_grad_norm)
            adam_step(net.params, grads, lr, eps=cfg.adam_eps)
            flat = net.params.flatten(grads)
            grad_accum = flat if grad_accum is None else grad_accum + flat
            for aux in auxes:
                for rec in aux.records:
                    if rec.layer in usage_sum:
                        usage_sum[rec.layer] += rec.probs
                    else:
                        usage_sum[rec.layer] = rec.probs.copy()
            pg_sum += parts[0]
            v_sum += parts[1]
            ent_sum += parts[2]
            norm_sum += norm
            steps += 1
    return UpdateStats(
        policy_loss=pg_sum / steps,
        value_loss=v_sum / steps,
        entropy=ent_sum / steps,
        grad_norm=norm_sum / steps,
        grad_vector=grad_accum / steps,
        usage={name: s / steps for name, s in usage_sum.items()},
    )
