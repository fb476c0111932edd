"""Named experiment presets.

Every schedule/architecture/router combination in the study gets a stable
name, so runs are launched as e.g. ``moerl run --preset crl-big-softmoe``
instead of hand-writing JSON. Presets are plain config dicts; anything not
set here keeps the config defaults (10M steps, 128 envs, and so on).

Naming: ``<slot>-<architecture>-<router>[-variant]`` where slot is one of
single-si, single-bo, single-ast, mtrl, crl. Variants: ``-taskid`` feeds the
router a task one-hot, ``-entreg`` adds a routing entropy bonus,
``-actoronly``/``-criticonly`` restrict the expert layers to one tower, and
``-revorder`` flips the game order for the multi-task slots.
"""

from __future__ import annotations

import copy

from .errors import ConfigError

_SLOTS = {
    "single-si": {"mode": "Single", "games": ["SI"]},
    "single-bo": {"mode": "Single", "games": ["BO"]},
    "single-ast": {"mode": "Single", "games": ["Ast"]},
    "mtrl": {"mode": "MTRL", "games": ["SI", "BO", "Ast"]},
    "crl": {"mode": "CRL", "games": ["SI", "BO", "Ast"], "passes": 2},
}

_ARCHS = {"middle": "Middle", "final": "Final", "all": "All", "big": "Big"}

_ROUTERS = {
    "softmoe": "SoftMoE",
    "topk": "TopK",
    "hardcoded": "Hardcoded",
    "gradswitch": "GradThresholdSwitch",
    "softgradmoe": "SoftGradientMoE",
}

_REV_GAMES = ["Ast", "BO", "SI"]


def _sites(arch: str) -> int:
    # one expert layer unless every hidden layer is replaced
    return 3 if arch == "All" else 1


def _build() -> dict:
    presets = {}
    for slot, sched in _SLOTS.items():
        presets[f"{slot}-baseline"] = {
            "schedule": dict(sched),
            "network": {"architecture": "Baseline"},
        }
        presets[f"{slot}-all-smsmhc"] = {
            "schedule": dict(sched),
            "network": {"architecture": "All",
                        "routers": ["SoftMoE", "SoftMoE", "Hardcoded"]},
        }
        for aname, arch in _ARCHS.items():
            n = _sites(arch)
            for rname, router in _ROUTERS.items():
                base = {
                    "schedule": dict(sched),
                    "network": {"architecture": arch, "routers": [router] * n},
                }
                presets[f"{slot}-{aname}-{rname}"] = base
                for tag, flips in (("actoronly", {"apply_to_critic": False}),
                                   ("criticonly", {"apply_to_actor": False})):
                    variant = copy.deepcopy(base)
                    variant["network"].update(flips)
                    presets[f"{slot}-{aname}-{rname}-{tag}"] = variant
                if rname in ("softmoe", "topk"):
                    entreg = copy.deepcopy(base)
                    entreg["network"]["routers"] = [
                        {"kind": router, "entropy_coef": 0.01} for _ in range(n)]
                    presets[f"{slot}-{aname}-{rname}-entreg"] = entreg
                    if slot in ("mtrl", "crl"):
                        taskid = copy.deepcopy(base)
                        taskid["network"]["routers"] = [
                            {"kind": router, "task_onehot": True} for _ in range(n)]
                        presets[f"{slot}-{aname}-{rname}-taskid"] = taskid
    for slot in ("mtrl", "crl"):
        for key in [k for k in presets
                    if k.startswith(f"{slot}-") and not k.endswith(
                        ("-actoronly", "-criticonly", "-entreg", "-taskid"))]:
            variant = copy.deepcopy(presets[key])
            variant["schedule"]["games"] = list(_REV_GAMES)
            presets[f"{key}-revorder"] = variant
    return presets


PRESETS = _build()


def preset_names() -> list[str]:
    return sorted(PRESETS)


def preset_dict(name: str) -> dict:
    if name not in PRESETS:
        import difflib

        hint = difflib.get_close_matches(name, PRESETS, n=3)
        extra = f" (closest: {', '.join(hint)})" if hint else ""
        raise ConfigError(f"unknown preset {name!r}{extra}")
    return copy.deepcopy(PRESETS[name])
