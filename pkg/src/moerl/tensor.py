"""Dense float64 tensors with reverse-mode differentiation on an explicit tape.

Values are numpy arrays; the tape records one node per primitive op, in
execution order, so the backward walk is a single reversed pass that touches
every node exactly once. Ops run untaped (plain numpy, no recording) whenever
no tape is active, which is how inference-time forwards stay cheap.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Sequence

import numpy as np

# When True every op output (and every leaf) is checked for NaN/Inf and a
# FiniteError is raised at the op boundary. Costs a few percent of runtime.
FINITE_CHECKS = True


class FiniteError(FloatingPointError):
    """A tensor value stopped being finite."""


def _check_finite(arr: np.ndarray, where: str) -> None:
    if FINITE_CHECKS and not np.isfinite(arr).all():
        raise FiniteError(f"non-finite values in {where}")


class Tensor:
    """Immutable-by-convention wrapper around a float64 ndarray."""

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        _check_finite(arr, "tensor construction")
        self.data = arr
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar; every overload routes through the module-level ops
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


_TAPE_STACK: list["Tape"] = []


class Tape:
    """Records ops for one forward pass; single-threaded by contract."""

    def __init__(self):
        self._ops: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self._owner = threading.get_ident()

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _TAPE_STACK.pop()
        assert popped is self

    def _record(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Callable) -> None:
        if threading.get_ident() != self._owner:
            raise RuntimeError("tape used from a thread other than its owner")
        self._ops.append((out, inputs, backward))

    def __len__(self) -> int:
        return len(self._ops)

    def gradients(self, loss: Tensor) -> dict[int, np.ndarray]:
        """Accumulated dloss/dtensor for every tensor on the tape.

        Keyed by id() of the Tensor objects, which the tape keeps alive.
        loss must be a scalar (size-1) tensor.
        """
        if loss.data.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for out, inputs, backward in reversed(self._ops):
            g = grads.get(id(out))
            if g is None:
                continue
            contribs = backward(g)
            for t, c in zip(inputs, contribs):
                if c is None or not t.requires_grad:
                    continue
                k = id(t)
                prev = grads.get(k)
                # new array on accumulate: adjoints may alias views of g
                grads[k] = c if prev is None else prev + c
        return grads


def _active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum g down to the given shape, inverting numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _make(out_data: np.ndarray, inputs: tuple[Tensor, ...], backward: Callable, name: str) -> Tensor:
    _check_finite(out_data, name)
    tape = _active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.requires_grad = needs
    if needs:
        tape._record(out, inputs, backward)
    return out


# ---------------------------------------------------------------------------
# primitive ops


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape))

    return _make(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape))

    return _make(a.data - b.data, (a, b), backward, "sub")


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        ga = _unbroadcast(g * b.data, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.data.shape) if b.requires_grad else None
        return (ga, gb)

    return _make(a.data * b.data, (a, b), backward, "mul")


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return (ga, gb)

    return _make(a.data @ b.data, (a, b), backward, "matmul")


def relu(a) -> Tensor:
    a = _as_tensor(a)
    # subgradient 0 at exactly 0
    return _make(np.maximum(a.data, 0.0), (a,), lambda g: (g * (a.data > 0.0),), "relu")


def exp(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(over="ignore"):
        out_data = np.exp(a.data)  # overflow surfaces as FiniteError

    def backward(g):
        return (g * out_data,)

    return _make(out_data, (a,), backward, "exp")


def log(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(invalid="ignore", divide="ignore"):
        out_data = np.log(a.data)  # FiniteError below for non-positive input
    return _make(out_data, (a,), lambda g: (g / a.data,), "log")


def softmax(a, axis: int) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, (a,), backward, "softmax")


def log_softmax(a, axis: int) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    ls = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(ls) * g.sum(axis=axis, keepdims=True),)

    return _make(ls, (a,), backward, "log_softmax")


def reduce_sum(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.full_like(a.data, float(g)),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gk, a.data.shape),)

    return _make(out_data, (a,), backward, "reduce_sum")


def reduce_mean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else a.data.shape[axis]

    def backward(g):
        if axis is None:
            return (np.full_like(a.data, float(g) / count),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gk / count, a.data.shape),)

    return _make(out_data, (a,), backward, "reduce_mean")


def take_per_row(a, index: np.ndarray) -> Tensor:
    """a[i, index[i]] for each row i; a is 2-D, index is int 1-D."""
    a = _as_tensor(a)
    idx = np.asarray(index)
    rows = np.arange(a.data.shape[0])
    out_data = a.data[rows, idx]

    def backward(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (rows, idx), g)
        return (ga,)

    return _make(out_data, (a,), backward, "take_per_row")


def concat(parts: Sequence, axis: int = 1) -> Tensor:
    ts = tuple(_as_tensor(p) for p in parts)
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        sl = [slice(None)] * g.ndim
        outs = []
        for i in range(len(ts)):
            sl[axis] = slice(offsets[i], offsets[i + 1])
            outs.append(g[tuple(sl)])
        return tuple(outs)

    return _make(np.concatenate([t.data for t in ts], axis=axis), ts, backward, "concat")


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = _as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.data.shape),), "reshape")


def transpose2d(a) -> Tensor:
    a = _as_tensor(a)
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,), "transpose2d")


def slice_rows(a, start: int, stop: int) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[start:stop] = g
        return (ga,)

    return _make(a.data[start:stop].copy(), (a,), backward, "slice_rows")


def slice_cols(a, start: int, stop: int) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[:, start:stop] = g
        return (ga,)

    return _make(a.data[:, start:stop].copy(), (a,), backward, "slice_cols")


def minimum(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    mask = a.data <= b.data  # ties route to the first argument

    def backward(g):
        ga = _unbroadcast(g * mask, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(g * ~mask, b.data.shape) if b.requires_grad else None
        return (ga, gb)

    return _make(np.minimum(a.data, b.data), (a, b), backward, "minimum")


def maximum(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    mask = a.data >= b.data

    def backward(g):
        ga = _unbroadcast(g * mask, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(g * ~mask, b.data.shape) if b.requires_grad else None
        return (ga, gb)

    return _make(np.maximum(a.data, b.data), (a, b), backward, "maximum")


def clip(a, lo: float, hi: float) -> Tensor:
    a = _as_tensor(a)
    mask = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: (g * mask,), "clip")
