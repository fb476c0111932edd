"""Tape and op contracts, each differentiable op cross-checked against the
central finite-difference oracle."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moerl import tensor as T
from moerl.fdcheck import central_difference, compare_gradients, scale_relative_error
from moerl.tensor import Tape, Tensor


def taped_value_and_grads(build, arrays):
    """Run build on requires_grad tensors under a tape; return value and grads."""
    leaves = [Tensor(a, requires_grad=True) for a in arrays]
    with Tape() as tape:
        out = build(leaves)
    grads = tape.gradients(out)
    return out.item(), [grads.get(id(p), np.zeros_like(p.data)) for p in leaves]


def fd_error(build, arrays, h=1e-5):
    """Worst scale-relative error between tape gradients and the FD oracle."""

    def f(arrs):
        return build([Tensor(a) for a in arrs]).item()

    _, analytic = taped_value_and_grads(build, arrays)
    return compare_gradients(f, arrays, analytic, h=h)


def weighted_sum(t, w):
    """Reduce any tensor to a scalar with fixed weights so FD has one output."""
    return T.reduce_sum(T.mul(t, Tensor(w)))


def test_relu_backward_subgradient_zero_at_origin():
    x = Tensor(np.array([-1.0, 0.0, 2.0]), requires_grad=True)
    with Tape() as tape:
        y = T.reduce_sum(T.relu(x))
    g = tape.gradients(y)[id(x)]
    assert g.tolist() == [0.0, 0.0, 1.0]


def test_matmul_gradient_matches_central_differences():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((4, 2))
    w = rng.standard_normal((3, 2))
    err = fd_error(lambda p: weighted_sum(T.matmul(p[0], p[1]), w), [a, b])
    assert err < 1e-6


def test_softmax_slices_sum_to_one():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((5, 7)) * 10.0
    for axis in (0, 1):
        y = T.softmax(Tensor(x), axis=axis).data
        sums = y.sum(axis=axis)
        assert np.abs(sums - 1.0).max() <= 1e-12
        assert (y >= 0.0).all()


def test_softmax_shift_invariance():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((4, 6))
    y0 = T.softmax(Tensor(x), axis=1).data
    y1 = T.softmax(Tensor(x + 123.456), axis=1).data
    assert np.abs(y0 - y1).max() < 1e-12


@settings(deadline=None, max_examples=40)
@given(st.lists(st.floats(-60.0, 60.0), min_size=2, max_size=9))
def test_softmax_sum_property(vals):
    y = T.softmax(Tensor(np.array(vals)), axis=0).data
    assert y.sum() == pytest.approx(1.0, abs=1e-12)


def test_gradcheck_elementwise_and_reduction_ops():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((4, 5)) + 3.5  # keep log inputs positive
    w = rng.standard_normal((4, 5))
    cases = {
        "exp": lambda p: weighted_sum(T.exp(p[0]), w),
        "log": lambda p: weighted_sum(T.log(p[0]), w),
        "neg": lambda p: weighted_sum(T.neg(p[0]), w),
        "relu": lambda p: weighted_sum(T.relu(p[0]), w),
        "sum_axis0": lambda p: weighted_sum(T.reduce_sum(p[0], axis=0), w[0]),
        "sum_keepdims": lambda p: weighted_sum(T.reduce_sum(p[0], axis=1, keepdims=True), w[:, :1]),
        "mean_axis1": lambda p: weighted_sum(T.reduce_mean(p[0], axis=1), w[:, 0]),
        "mean_all": lambda p: T.reduce_mean(p[0]),
        "softmax0": lambda p: weighted_sum(T.softmax(p[0], axis=0), w),
        "softmax1": lambda p: weighted_sum(T.softmax(p[0], axis=1), w),
        "log_softmax": lambda p: weighted_sum(T.log_softmax(p[0], axis=1), w),
        "reshape": lambda p: weighted_sum(T.reshape(p[0], (2, 10)), w.reshape(2, 10)),
        "transpose": lambda p: weighted_sum(T.transpose2d(p[0]), w.T),
        "slice_rows": lambda p: weighted_sum(T.slice_rows(p[0], 1, 3), w[1:3]),
        "clip": lambda p: weighted_sum(T.clip(p[0], -0.8, 0.9), w),
    }
    for name, build in cases.items():
        err = fd_error(build, [x])
        assert err < 1e-5, f"{name}: rel err {err:.3e}"


def test_gradcheck_binary_ops_with_broadcasting():
    rng = np.random.default_rng(12)
    a = rng.standard_normal((4, 5))
    b = rng.standard_normal((4, 5)) + 0.05  # keep away from min/max ties
    col = rng.standard_normal((4, 1))
    row = rng.standard_normal(5)
    w = rng.standard_normal((4, 5))
    cases = {
        "add": ([a, b], lambda p: weighted_sum(T.add(p[0], p[1]), w)),
        "sub": ([a, b], lambda p: weighted_sum(T.sub(p[0], p[1]), w)),
        "mul": ([a, b], lambda p: weighted_sum(T.mul(p[0], p[1]), w)),
        "minimum": ([a, b], lambda p: weighted_sum(T.minimum(p[0], p[1]), w)),
        "maximum": ([a, b], lambda p: weighted_sum(T.maximum(p[0], p[1]), w)),
        "add_row_bias": ([a, row], lambda p: weighted_sum(T.add(p[0], p[1]), w)),
        "mul_col": ([a, col], lambda p: weighted_sum(T.mul(p[0], p[1]), w)),
    }
    for name, (arrays, build) in cases.items():
        err = fd_error(build, arrays)
        assert err < 1e-5, f"{name}: rel err {err:.3e}"


def test_gradcheck_take_per_row_and_concat():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((6, 4))
    y = rng.standard_normal((6, 3))
    idx = rng.integers(0, 4, size=6)
    wv = rng.standard_normal(6)
    wc = rng.standard_normal((6, 7))
    err = fd_error(lambda p: weighted_sum(T.take_per_row(p[0], idx), wv), [x])
    assert err < 1e-5
    err = fd_error(lambda p: weighted_sum(T.concat([p[0], p[1]], axis=1), wc), [x, y])
    assert err < 1e-5


def test_diamond_graph_accumulates_exactly():
    # z = (x + x) * (x + x) = 4 x^2, dz/dx = 8 x
    x = Tensor(np.array(1.5), requires_grad=True)
    with Tape() as tape:
        y = T.add(x, x)
        z = T.mul(y, y)
    g = tape.gradients(z)[id(x)]
    assert float(g) == 12.0


def test_backward_visits_each_recorded_op_exactly_once():
    rng = np.random.default_rng(5)
    x = Tensor(rng.standard_normal((3, 3)), requires_grad=True)
    with Tape() as tape:
        h = T.relu(T.matmul(x, x))
        out = T.reduce_sum(h)
    visits = []
    wrapped = []
    for node_out, inputs, backward in tape._ops:
        def make(bfn, k):
            def counting(g):
                visits.append(k)
                return bfn(g)
            return counting
        wrapped.append((node_out, inputs, make(backward, len(wrapped))))
    tape._ops = wrapped
    tape.gradients(out)
    assert sorted(visits) == list(range(len(wrapped)))
    assert len(visits) == len(set(visits))


def test_ops_outside_tape_do_not_record():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    y = T.relu(T.matmul(x, x))
    assert y.requires_grad is False
    with Tape() as tape:
        pass
    assert len(tape) == 0


def test_constant_only_subgraphs_not_recorded():
    with Tape() as tape:
        c = T.add(Tensor(np.ones(3)), Tensor(np.ones(3)))
    assert len(tape) == 0
    assert c.requires_grad is False


def test_loss_must_be_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = T.relu(x)
    with pytest.raises(ValueError):
        tape.gradients(y)


def test_non_finite_values_raise_at_op_boundary():
    with pytest.raises(T.FiniteError):
        Tensor(np.array([1.0, np.inf]))
    with pytest.raises(T.FiniteError):
        T.log(Tensor(np.array([-1.0])))


def test_finite_difference_oracle_on_known_polynomial():
    # f(x) = sum(x^3): exact gradient 3 x^2
    x = np.array([0.5, -1.25, 2.0])
    (g,) = central_difference(lambda arrs: float((arrs[0] ** 3).sum()), [x])
    assert scale_relative_error(3.0 * x**2, g) < 1e-9
