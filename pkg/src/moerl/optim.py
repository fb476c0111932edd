"""Parameter storage, Adam, gradient clipping, schedules, vector similarity."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class ParamStore:
    """Named map of trainable tensors plus per-parameter Adam state.

    Insertion order is the canonical parameter order for flattening; it is
    frozen by network construction and must not change mid-run.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        self._m[name] = np.zeros_like(t.data)
        self._v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def n_params(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def collect(self, tape_grads: dict[int, np.ndarray]) -> dict[str, np.ndarray]:
        """Map tape gradients onto parameter names; unreachable params get zeros."""
        out = {}
        for name, t in self._params.items():
            g = tape_grads.get(id(t))
            out[name] = np.zeros_like(t.data) if g is None else g
        return out

    def flatten(self, grads: dict[str, np.ndarray]) -> np.ndarray:
        """Concatenate per-parameter arrays in insertion order."""
        return np.concatenate([grads[name].ravel() for name in self._params])

    def state_vector(self) -> np.ndarray:
        return np.concatenate([t.data.ravel() for t in self._params.values()])


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """Scale the whole gradient set so its joint L2 norm is at most max_norm.

    Returns the (possibly rescaled) gradients and the pre-clip norm.
    """
    total = 0.0
    for g in grads.values():
        total += float(np.dot(g.ravel(), g.ravel()))
    norm = float(np.sqrt(total))
    if norm <= max_norm or norm == 0.0:
        return grads, norm
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}, norm


def adam_step(
    params: ParamStore,
    grads: dict[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-5,
) -> None:
    """One Adam update with bias correction, in place.

    Parameters whose gradient is identically zero are skipped outright:
    moments neither accumulate nor decay, so structurally unrouted experts
    stay bit-identical instead of drifting on stale momentum.
    """
    params.step_count += 1
    t = params.step_count
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params._params.items():
        g = grads[name]
        if not g.any():
            continue
        m = params._m[name]
        v = params._v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def linear_anneal(lr0: float, step: int, total: int) -> float:
    """lr0 * (1 - step/total), floored at 0."""
    if total <= 0:
        return lr0
    return lr0 * max(0.0, 1.0 - step / total)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two flat vectors; 0.0 if either is zero."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
