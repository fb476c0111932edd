"""JSON configuration surface: strict parsing, defaults, and validation.

Configs are plain JSON. Unknown keys are rejected at every level so typos
fail loudly instead of silently training the wrong thing. A config may name
a preset; explicit keys then override the preset's values field by field.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields

from .envs import GAME_IDS
from .errors import ConfigError
from .metrics import REFERENCE_SCORES
from .moe import RouterSpec
from .networks import NetworkConfig, validate_network_config
from .ppo import PPOConfig

SCHEDULE_MODES = ("Single", "MTRL", "CRL")


@dataclass
class ScheduleConfig:
    mode: str = "Single"
    games: list[str] = field(default_factory=lambda: ["BO"])
    passes: int = 2  # CRL only: how many times the listed order repeats

    def tasks(self) -> list[str]:
        """Deduplicated task order; positions are the task ids."""
        return list(dict.fromkeys(self.games))

    def segments(self) -> list[str]:
        return self.games * self.passes if self.mode == "CRL" else list(self.games)


@dataclass
class RunConfig:
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    seed: int = 0
    reference_scores: dict = field(default_factory=lambda: dict(REFERENCE_SCORES))
    random_scores: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    """A run template plus the seeds to sweep and where to write."""

    name: str = "run"
    seeds: list[int] = field(default_factory=lambda: [0])
    out: str = "results"
    run: RunConfig = field(default_factory=RunConfig)


def validate_run_config(cfg: RunConfig) -> None:
    sched = cfg.schedule
    if sched.mode not in SCHEDULE_MODES:
        raise ConfigError(f"schedule.mode must be one of {SCHEDULE_MODES}, got {sched.mode!r}")
    if not sched.games:
        raise ConfigError("schedule.games must list at least one game")
    for g in sched.games:
        if g not in GAME_IDS:
            raise ConfigError(f"schedule.games: unknown game {g!r} (known: {GAME_IDS})")
    if len(set(sched.games)) != len(sched.games):
        raise ConfigError("schedule.games must not repeat a game; CRL revisits via passes")
    if sched.mode == "Single" and len(sched.games) != 1:
        raise ConfigError("Single schedule takes exactly one game")
    if sched.passes < 1:
        raise ConfigError("schedule.passes must be at least 1")
    if cfg.seed < 0:
        raise ConfigError("seed must be nonnegative")

    ppo = cfg.ppo
    for key in ("num_envs", "rollout_steps", "update_epochs", "num_minibatches"):
        if getattr(ppo, key) < 1:
            raise ConfigError(f"ppo.{key} must be positive")
    if ppo.batch_size % ppo.num_minibatches != 0:
        raise ConfigError(
            f"ppo.num_minibatches={ppo.num_minibatches} does not divide the "
            f"batch of {ppo.batch_size} samples"
        )
    if ppo.total_timesteps < ppo.batch_size:
        raise ConfigError("ppo.total_timesteps is smaller than one rollout batch")
    if ppo.lr <= 0.0:
        raise ConfigError("ppo.lr must be positive")

    for g in sched.tasks():
        ref = cfg.reference_scores.get(g)
        if ref is None:
            raise ConfigError(f"reference_scores missing entry for scheduled game {g!r}")
        if ref <= 0.0:
            raise ConfigError(f"reference_scores[{g!r}] must be positive")
        rand = cfg.random_scores.get(g, 0.0)
        if rand >= ref:
            raise ConfigError(f"random_scores[{g!r}] must fall below the reference score")

    validate_network_config(cfg.network, len(sched.tasks()))


# ----------------------------------------------------------------- parsing


def _check_keys(d: dict, allowed, where: str) -> None:
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _apply_typed(obj, d: dict, where: str, skip=()) -> None:
    """Copy JSON values onto a defaults-filled dataclass, checking types."""
    _check_keys(d, [f.name for f in fields(obj)], where)
    for key, value in d.items():
        if key in skip:
            continue
        current = getattr(obj, key)
        label = f"{where}.{key}"
        if isinstance(current, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{label} expects a boolean")
        elif isinstance(current, int):
            if isinstance(value, float) and value.is_integer():
                value = int(value)  # JSON 1e7 arrives as a float
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{label} expects an integer")
        elif isinstance(current, float):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{label} expects a number")
            value = float(value)
        elif isinstance(current, str):
            if not isinstance(value, str):
                raise ConfigError(f"{label} expects a string")
        elif isinstance(current, list):
            if not isinstance(value, list):
                raise ConfigError(f"{label} expects a list")
        elif isinstance(current, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{label} expects an object")
        setattr(obj, key, value)


def router_spec_from(obj, where: str) -> RouterSpec:
    if isinstance(obj, str):
        obj = {"kind": obj}
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} expects a router name or object")
    _check_keys(obj, [f.name for f in fields(RouterSpec)], where)
    try:
        return RouterSpec(**obj)
    except (ValueError, TypeError) as err:
        raise ConfigError(f"{where}: {err}") from err


def network_config_from(d: dict) -> NetworkConfig:
    cfg = NetworkConfig()
    _apply_typed(cfg, d, "network", skip=("routers",))
    routers = d.get("routers", [])
    if not isinstance(routers, list):
        raise ConfigError("network.routers expects a list")
    cfg.routers = [router_spec_from(r, f"network.routers[{i}]") for i, r in enumerate(routers)]
    return cfg


def run_config_from_dict(d: dict) -> RunConfig:
    _check_keys(d, ("schedule", "network", "ppo", "seed", "reference_scores", "random_scores"),
                "config")
    cfg = RunConfig()
    sched = d.get("schedule", {})
    if not isinstance(sched, dict):
        raise ConfigError("schedule expects an object")
    _apply_typed(cfg.schedule, sched, "schedule")
    net = d.get("network", {})
    if not isinstance(net, dict):
        raise ConfigError("network expects an object")
    cfg.network = network_config_from(net)
    ppo = d.get("ppo", {})
    if not isinstance(ppo, dict):
        raise ConfigError("ppo expects an object")
    _apply_typed(cfg.ppo, ppo, "ppo")
    seed = d.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed expects an integer")
    cfg.seed = seed
    for key in ("reference_scores", "random_scores"):
        table = d.get(key, None)
        if table is None:
            continue
        if not isinstance(table, dict):
            raise ConfigError(f"{key} expects an object")
        _check_keys(table, GAME_IDS, key)
        clean = {}
        for g, v in table.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"{key}[{g!r}] expects a number")
            clean[g] = float(v)
        if key == "reference_scores":
            cfg.reference_scores.update(clean)
        else:
            cfg.random_scores = clean
    validate_run_config(cfg)
    return cfg


def router_spec_to_dict(spec: RouterSpec) -> dict:
    return {
        "kind": spec.kind, "k": spec.k, "task_onehot": spec.task_onehot,
        "grad_feature": spec.grad_feature, "entropy_coef": spec.entropy_coef,
        "switch_threshold": spec.switch_threshold,
    }


def run_config_to_dict(cfg: RunConfig) -> dict:
    return {
        "schedule": {"mode": cfg.schedule.mode, "games": list(cfg.schedule.games),
                     "passes": cfg.schedule.passes},
        "network": {
            "architecture": cfg.network.architecture,
            "routers": [router_spec_to_dict(r) for r in cfg.network.routers],
            "num_experts": cfg.network.num_experts,
            "slots_per_expert": cfg.network.slots_per_expert,
            "apply_to_actor": cfg.network.apply_to_actor,
            "apply_to_critic": cfg.network.apply_to_critic,
            "hidden_layers": cfg.network.hidden_layers,
            "layer_size": cfg.network.layer_size,
        },
        "ppo": {f.name: getattr(cfg.ppo, f.name) for f in fields(PPOConfig)},
        "reference_scores": dict(cfg.reference_scores),
        "random_scores": dict(cfg.random_scores),
    }


def deep_merge(base: dict, override: dict) -> dict:
    """Nested-dict merge; non-dict values (lists included) replace outright."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def experiment_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config root must be an object")
    if isinstance(d.get("config"), dict):
        d = d["config"]  # a manifest was handed back in; unwrap it
    _check_keys(d, ("preset", "name", "seeds", "out", "schedule", "network", "ppo",
                    "reference_scores", "random_scores"), "config")
    preset_name = d.get("preset")
    body = {k: v for k, v in d.items() if k != "preset"}
    if preset_name is not None:
        from .presets import preset_dict  # late import keeps presets optional here

        body = deep_merge(preset_dict(preset_name), body)
    exp = ExperimentConfig()
    exp.name = body.pop("name", preset_name or "run")
    if not isinstance(exp.name, str) or not exp.name:
        raise ConfigError("name expects a nonempty string")
    seeds = body.pop("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(
            isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        raise ConfigError("seeds expects a nonempty list of nonnegative integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    exp.seeds = seeds
    out = body.pop("out", "results")
    if not isinstance(out, str) or not out:
        raise ConfigError("out expects a nonempty path string")
    exp.out = out
    exp.run = run_config_from_dict(body)
    return exp


def experiment_to_dict(exp: ExperimentConfig) -> dict:
    d = {"name": exp.name, "seeds": list(exp.seeds), "out": exp.out}
    d.update(run_config_to_dict(exp.run))
    return d


def load_experiment(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"malformed JSON in {path}: {err}") from err
    return experiment_from_dict(raw)


def parse_seed_spec(spec: str) -> list[int]:
    """Seed lists for the command line: '4', '0,2,5', or '0..9' (inclusive)."""
    spec = spec.strip()
    try:
        if ".." in spec:
            lo, hi = spec.split("..")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(part) for part in spec.split(",")]
    except ValueError:
        raise ConfigError(f"bad seed spec {spec!r}; use forms like 3, 0,1,2 or 0..9") from None
