"""Actor and critic towers with configurable mixture placement.

Five layouts over a trunk of dense+relu layers (width 64 by default):

- Baseline: plain trunk, no mixtures.
- Middle: the middle hidden layer becomes an MoE of single dense+relu experts.
- Final: the last hidden layer becomes an MoE.
- All: every hidden layer becomes an MoE, one router spec per layer.
- Big: the whole network is one MoE whose experts are complete towers,
  output head included, so hard routing shares no parameters across experts.

Actor and critic are fully separate parameter sets drawn from independent
init streams; mixture placement can be switched off per tower.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError
from .moe import (
    SOFT_KINDS,
    RouterContext,
    RouterSpec,
    RoutingRecord,
    augment_router_input,
    grad_threshold_switch,
    hardcoded_forward,
    router_input_width,
    softmoe_forward_batched,
    topk_forward,
)
from .optim import ParamStore
from .rng import STREAM_INIT, stream
from .tensor import Tensor

ARCHITECTURES = ("Baseline", "Middle", "Final", "All", "Big")

ROUTER_COUNT = {"Baseline": 0, "Middle": 1, "Final": 1, "All": None, "Big": 1}


@dataclass
class NetworkConfig:
    architecture: str = "Baseline"
    routers: list[RouterSpec] = field(default_factory=list)
    num_experts: int = 3
    slots_per_expert: int = 1
    apply_to_actor: bool = True
    apply_to_critic: bool = True
    hidden_layers: int = 3
    layer_size: int = 64


def validate_network_config(cfg: NetworkConfig, num_tasks: int) -> None:
    if cfg.architecture not in ARCHITECTURES:
        raise ConfigError(f"unknown architecture: {cfg.architecture}")
    required = ROUTER_COUNT[cfg.architecture]
    if required is None:
        required = cfg.hidden_layers
    if len(cfg.routers) != required:
        raise ConfigError(
            f"{cfg.architecture} needs {required} router spec(s), got {len(cfg.routers)}"
        )
    if cfg.num_experts < 1:
        raise ConfigError("num_experts must be positive")
    if cfg.slots_per_expert < 1:
        raise ConfigError("slots_per_expert must be positive")
    for spec in cfg.routers:
        if spec.kind == "Hardcoded" and num_tasks > cfg.num_experts:
            raise ConfigError("hardcoded routing needs at least one expert per task")


def orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    """Orthogonal weight init with a deterministic sign convention."""
    a = rng.standard_normal((rows, cols))
    flip = rows < cols
    if flip:
        a = a.T
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if flip:
        q = q.T
    return gain * q


@dataclass
class NetAux:
    """Per-forward routing byproducts and optional activation capture."""

    records: list[RoutingRecord] = field(default_factory=list)
    entropy_terms: list[tuple[float, Tensor]] = field(default_factory=list)
    hidden: list[np.ndarray] = field(default_factory=list)
    collect_hidden: bool = False
    probe_all: bool = False


class DenseBlock:
    """Affine map plus optional relu; relu outputs count as hidden units."""

    def __init__(self, params, name, in_dim, out_dim, rng, gain=float(np.sqrt(2.0)), activation=True):
        self.w = params.add(f"{name}.w", orthogonal(rng, in_dim, out_dim, gain))
        self.b = params.add(f"{name}.b", np.zeros(out_dim))
        self.activation = activation

    def forward(self, x: Tensor, ctx: RouterContext, aux: NetAux) -> Tensor:
        h = T.add(T.matmul(x, self.w), self.b)
        if self.activation:
            h = T.relu(h)
            if aux.collect_hidden:
                aux.hidden.append(h.data)
        return h


class DenseExpert:
    """Single dense+relu layer, the expert unit for trunk mixtures."""

    def __init__(self, params, name, in_dim, out_dim, rng):
        self.block = DenseBlock(params, name, in_dim, out_dim, rng)

    def bind(self, ctx: RouterContext, aux: NetAux):
        return _Bound(self, ctx, aux)

    def forward(self, x: Tensor, ctx: RouterContext, aux: NetAux) -> Tensor:
        return self.block.forward(x, ctx, aux)


class TowerExpert:
    """Full network (trunk and head), the expert unit for the Big layout."""

    def __init__(self, params, name, in_dim, width, depth, out_dim, rng, head_gain):
        self.blocks = []
        d = in_dim
        for i in range(depth):
            self.blocks.append(DenseBlock(params, f"{name}.layer{i}", d, width, rng))
            d = width
        self.head = DenseBlock(params, f"{name}.head", d, out_dim, rng, gain=head_gain, activation=False)

    def bind(self, ctx: RouterContext, aux: NetAux):
        return _Bound(self, ctx, aux)

    def forward(self, x: Tensor, ctx: RouterContext, aux: NetAux) -> Tensor:
        for block in self.blocks:
            x = block.forward(x, ctx, aux)
        return self.head.forward(x, ctx, aux)


class _Bound:
    """Adapter giving experts the single-argument forward the mixture ops use."""

    __slots__ = ("expert", "ctx", "aux")

    def __init__(self, expert, ctx, aux):
        self.expert = expert
        self.ctx = ctx
        self.aux = aux

    def forward(self, x: Tensor) -> Tensor:
        return self.expert.forward(x, self.ctx, self.aux)


class MoEBlock:
    """One mixture layer: n experts plus a routing rule from the spec."""

    def __init__(self, params, name, spec: RouterSpec, num_experts, slots, in_dim, num_tasks, rng, expert_factory):
        self.name = name
        self.spec = spec
        self.num_experts = num_experts
        self.slots = slots
        self.experts = [expert_factory(f"{name}.expert{i}") for i in range(num_experts)]
        self.active = 0  # register for gradient-threshold switching
        rw = router_input_width(in_dim, spec, num_tasks)
        if spec.kind in SOFT_KINDS:
            self.phi = params.add(f"{name}.phi", orthogonal(rng, rw, num_experts * slots, 1.0))
        elif spec.kind == "TopK":
            self.router_w = params.add(f"{name}.router.w", orthogonal(rng, rw, num_experts, 1.0))
            self.router_b = params.add(f"{name}.router.b", np.zeros(num_experts))

    def forward(self, x: Tensor, ctx: RouterContext, aux: NetAux) -> Tensor:
        bound = [ex.bind(ctx, aux) for ex in self.experts]
        kind = self.spec.kind
        ran_all = False
        if kind in SOFT_KINDS:
            rx = augment_router_input(x, self.spec, ctx)
            y, mass, record = softmoe_forward_batched(
                x, self.phi, bound, self.slots, router_xb=rx
            )
            if self.spec.entropy_coef > 0.0:
                aux.entropy_terms.append((self.spec.entropy_coef, mass))
            ran_all = True
        elif kind == "TopK":
            rx = augment_router_input(x, self.spec, ctx)
            y, probs, record = topk_forward(x, self.router_w, self.router_b, bound, k=1, router_xb=rx)
            if self.spec.entropy_coef > 0.0:
                aux.entropy_terms.append((self.spec.entropy_coef, probs))
        elif kind == "Hardcoded":
            y, record = hardcoded_forward(x, bound, ctx.task_id)
        else:  # GradThresholdSwitch
            y, record = hardcoded_forward(x, bound, self.active)
        aux.records.append(RoutingRecord(self.name, record))
        if aux.probe_all and not ran_all:
            self._probe_missing(x, ctx, aux, record)
        return y

    def _probe_missing(self, x, ctx, aux, record):
        # dormancy counts every expert, including ones routing skipped
        for i, ex in enumerate(self.experts):
            if record[i] == 0.0:
                ex.forward(x, ctx, aux)

    def on_similarity(self, similarity: float) -> None:
        if self.spec.kind == "GradThresholdSwitch":
            self.active = grad_threshold_switch(
                similarity, self.spec.switch_threshold, self.active, self.num_experts
            )


class Tower:
    """One network (actor or critic) assembled per the configured layout."""

    def __init__(self, params, prefix, cfg: NetworkConfig, obs_dim, out_dim, num_tasks, rng, head_gain, use_moe):
        arch = cfg.architecture if use_moe else "Baseline"
        width = cfg.layer_size
        depth = cfg.hidden_layers
        self.moe_blocks: list[MoEBlock] = []
        blocks = []
        head = None
        if arch == "Big":
            spec = cfg.routers[0]

            def factory(name):
                return TowerExpert(params, name, obs_dim, width, depth, out_dim, rng, head_gain)

            moe = MoEBlock(
                params, f"{prefix}.moe", spec, cfg.num_experts, cfg.slots_per_expert,
                obs_dim, num_tasks, rng, factory,
            )
            blocks.append(moe)
            self.moe_blocks.append(moe)
        else:
            moe_at = {
                "Baseline": frozenset(),
                "Middle": frozenset({depth // 2}),
                "Final": frozenset({depth - 1}),
                "All": frozenset(range(depth)),
            }[arch]
            router_idx = 0
            d = obs_dim
            for i in range(depth):
                if i in moe_at:
                    spec = cfg.routers[router_idx]
                    router_idx += 1

                    def factory(name, d=d):
                        return DenseExpert(params, name, d, width, rng)

                    moe = MoEBlock(
                        params, f"{prefix}.layer{i}", spec, cfg.num_experts, cfg.slots_per_expert,
                        d, num_tasks, rng, factory,
                    )
                    blocks.append(moe)
                    self.moe_blocks.append(moe)
                else:
                    blocks.append(DenseBlock(params, f"{prefix}.layer{i}", d, width, rng))
                d = width
            head = DenseBlock(params, f"{prefix}.head", d, out_dim, rng, gain=head_gain, activation=False)
        self.blocks = blocks
        self.head = head

    def forward(self, x: Tensor, ctx: RouterContext, aux: NetAux) -> Tensor:
        for block in self.blocks:
            x = block.forward(x, ctx, aux)
        if self.head is not None:
            x = self.head.forward(x, ctx, aux)
        return x


class ActorCritic:
    """Separate actor and critic towers over one parameter store."""

    def __init__(self, cfg: NetworkConfig, obs_dim: int, act_dim: int, num_tasks: int, seed: int):
        validate_network_config(cfg, num_tasks)
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.num_tasks = num_tasks
        self.params = ParamStore()
        self.actor = Tower(
            self.params, "actor", cfg, obs_dim, act_dim, num_tasks,
            stream(seed, STREAM_INIT, 0), head_gain=0.01, use_moe=cfg.apply_to_actor,
        )
        self.critic = Tower(
            self.params, "critic", cfg, obs_dim, 1, num_tasks,
            stream(seed, STREAM_INIT, 1), head_gain=1.0, use_moe=cfg.apply_to_critic,
        )

    def actor_logits(self, x: Tensor, ctx: RouterContext, aux: NetAux | None = None):
        aux = aux if aux is not None else NetAux()
        return self.actor.forward(x, ctx, aux), aux

    def critic_value(self, x: Tensor, ctx: RouterContext, aux: NetAux | None = None):
        aux = aux if aux is not None else NetAux()
        out = self.critic.forward(x, ctx, aux)
        return T.reshape(out, (x.data.shape[0],)), aux

    def probe_hidden(self, obs: np.ndarray, ctx: RouterContext) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Hidden activations of every unit in both towers, all experts run."""
        x = Tensor(obs)
        aux_a = NetAux(collect_hidden=True, probe_all=True)
        self.actor.forward(x, ctx, aux_a)
        aux_c = NetAux(collect_hidden=True, probe_all=True)
        self.critic.forward(x, ctx, aux_c)
        return aux_a.hidden, aux_c.hidden

    def on_similarity(self, similarity: float) -> None:
        for tower in (self.actor, self.critic):
            for block in tower.moe_blocks:
                block.on_similarity(similarity)
