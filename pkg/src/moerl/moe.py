"""Mixture-of-experts layers and routing rules.

Four routing families share one expert pool per layer:

- soft mixing: every expert runs and the outputs are blended by per-slot
  combine weights (dispatch/combine both come from a single slot logit
  matrix phi). A variant feeds the latest gradient-similarity scalar to the
  router as an extra input.
- top-1 selection: a small linear router scores experts, the argmax expert
  runs, and its output is scaled by that expert's softmax gate so the router
  still receives gradient through the selected gate only.
- hardcoded: the current task index picks the expert; no router parameters.
- gradient-threshold switching: like hardcoded, but an internal register picks
  the expert and advances (mod n) whenever a freshly completed gradient bucket
  is too dissimilar from the previous one.

Routers may see an augmented input (task one-hot, similarity scalar); experts
always receive the raw layer input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor

ROUTER_KINDS = ("SoftMoE", "TopK", "Hardcoded", "SoftGradientMoE", "GradThresholdSwitch")
SOFT_KINDS = ("SoftMoE", "SoftGradientMoE")


@dataclass
class RouterSpec:
    kind: str = "SoftMoE"
    k: int = 1
    task_onehot: bool = False
    grad_feature: bool = False
    entropy_coef: float = 0.0
    switch_threshold: float = 0.5

    def __post_init__(self):
        if self.kind not in ROUTER_KINDS:
            raise ValueError(f"unknown router kind: {self.kind}")
        if self.kind == "TopK" and self.k != 1:
            raise ValueError("only top-1 selection is supported")
        if self.kind == "SoftGradientMoE":
            self.grad_feature = True


@dataclass
class RouterContext:
    """Per-forward routing inputs supplied by the training loop."""

    task_id: int = 0
    num_tasks: int = 1
    grad_sim: float = 0.0


@dataclass
class RoutingRecord:
    """Expert-selection probabilities observed in one forward, one MoE layer."""

    layer: str
    probs: np.ndarray  # length n, nonnegative, sums to 1


def router_input_width(base: int, spec: RouterSpec, num_tasks: int) -> int:
    width = base
    if spec.task_onehot:
        width += num_tasks
    if spec.grad_feature:
        width += 1
    return width


def augment_router_input(x: Tensor, spec: RouterSpec, ctx: RouterContext) -> Tensor:
    """Concatenate the optional task one-hot and similarity scalar onto x.

    Identity when both flags are off, so routers stay a pure function of the
    observation unless augmentation is explicitly enabled.
    """
    parts = [x]
    rows = x.data.shape[0]
    if spec.task_onehot:
        onehot = np.zeros((rows, ctx.num_tasks))
        onehot[:, ctx.task_id] = 1.0
        parts.append(Tensor(onehot))
    if spec.grad_feature:
        parts.append(Tensor(np.full((rows, 1), ctx.grad_sim)))
    if len(parts) == 1:
        return x
    return T.concat(parts, axis=1)


def softmoe_forward(x, phi, experts, slots_per_expert: int, router_x=None):
    """Soft mixture over a token matrix x of shape [m, d].

    phi has one column per slot (n experts * p slots). Dispatch weights
    normalize each slot's logits over tokens; combine weights normalize each
    token's logits over slots. Expert i consumes slot rows [i*p, (i+1)*p).

    Returns (y, per-expert combine mass averaged over tokens).
    """
    x = T._as_tensor(x)
    rx = x if router_x is None else T._as_tensor(router_x)
    p = slots_per_expert
    n = len(experts)
    logits = T.matmul(rx, phi)  # [m, n*p]
    dispatch = T.softmax(logits, axis=0)
    combine = T.softmax(logits, axis=1)
    slot_inputs = T.matmul(T.transpose2d(dispatch), x)  # [n*p, d]
    outs = [ex.forward(T.slice_rows(slot_inputs, i * p, (i + 1) * p)) for i, ex in enumerate(experts)]
    y = T.matmul(combine, T.concat(outs, axis=0))
    m = x.data.shape[0]
    mass = combine.data.reshape(m, n, p).sum(axis=2).mean(axis=0)
    return y, mass


def softmoe_forward_batched(xb, phi, experts, slots_per_expert: int, router_xb=None):
    """The single-token case vectorized over a batch.

    With one token per sample the dispatch weights are identically 1, every
    slot of expert i sees the sample itself, and the output reduces to a
    combine-mass weighted sum of expert outputs. Returns (y, mass tensor
    [B, n] on the tape, record probs).
    """
    xb = T._as_tensor(xb)
    rxb = xb if router_xb is None else T._as_tensor(router_xb)
    n = len(experts)
    p = slots_per_expert
    batch = xb.data.shape[0]
    logits = T.matmul(rxb, phi)  # [B, n*p]
    combine = T.softmax(logits, axis=1)
    mass = T.reduce_sum(T.reshape(combine, (batch, n, p)), axis=2)  # [B, n]
    y = None
    for i, ex in enumerate(experts):
        term = T.mul(T.slice_cols(mass, i, i + 1), ex.forward(xb))
        y = term if y is None else T.add(y, term)
    return y, mass, mass.data.mean(axis=0)


def topk_forward(xb, router_w, router_b, experts, k: int = 1, router_xb=None):
    """Top-1 routing: run the argmax expert, scale by its gate probability.

    Ties pick the lowest expert index. The router gradient flows only through
    the selected gate scalar; unselected experts receive exactly zero gradient
    (their outputs are multiplied by a constant zero mask).
    """
    if k != 1:
        raise ValueError("only top-1 selection is supported")
    xb = T._as_tensor(xb)
    rxb = xb if router_xb is None else T._as_tensor(router_xb)
    batch = xb.data.shape[0]
    logits = T.add(T.matmul(rxb, router_w), router_b)  # [B, n]
    probs = T.softmax(logits, axis=1)
    choice = np.argmax(probs.data, axis=1)
    gate = T.reshape(T.take_per_row(probs, choice), (batch, 1))
    y = None
    for i, ex in enumerate(experts):
        mask = (choice == i).astype(np.float64).reshape(batch, 1)
        if not mask.any():
            continue
        term = T.mul(T.mul(gate, Tensor(mask)), ex.forward(xb))
        y = term if y is None else T.add(y, term)
    record = np.bincount(choice, minlength=len(experts)).astype(np.float64) / batch
    return y, probs, record


def hardcoded_forward(xb, experts, task_id: int):
    """Route the whole batch to the task's own expert; no router parameters.

    Gradient isolation is structural: unselected experts are never touched.
    """
    if not 0 <= task_id < len(experts):
        raise ValueError(f"task id {task_id} outside expert range 0..{len(experts) - 1}")
    y = experts[task_id].forward(T._as_tensor(xb))
    record = np.zeros(len(experts))
    record[task_id] = 1.0
    return y, record


def grad_threshold_switch(similarity: float, threshold: float, current: int, num_experts: int) -> int:
    """Advance to the next expert (mod n) when bucket similarity drops."""
    if similarity < threshold:
        return (current + 1) % num_experts
    return current


def router_entropy(probs_list) -> float:
    """Shannon entropy -sum(p ln p) per layer, summed over layers.

    Operates on recorded probability vectors; zero entries contribute zero,
    so a hard one-hot routing has entropy exactly 0.
    """
    total = 0.0
    for probs in probs_list:
        p = np.asarray(probs, dtype=np.float64)
        nz = p[p > 0.0]
        total += float(-(nz * np.log(nz)).sum())
    return total


def taped_router_entropy(mass_tensors) -> Tensor | None:
    """Differentiable mean routing entropy, summed over soft layers.

    Probabilities are floored before the log so a vanishing slot cannot
    produce a non-finite value; the floor is far below routing resolution.
    """
    total = None
    for mass in mass_tensors:
        safe = T.clip(mass, 1e-12, 1.0)
        ent = T.neg(T.reduce_mean(T.reduce_sum(T.mul(mass, T.log(safe)), axis=1)))
        total = ent if total is None else T.add(total, ent)
    return total
