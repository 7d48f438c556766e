"""Backward-pass contracts: analytic cases, finite differences, Adam, tape rules."""

import numpy as np
import pytest

from swagan import tensor as T
from swagan.errors import ContractError
from swagan.gradcheck import finite_diff_check
from swagan.optim import AdamState, adam_step
from swagan.tensor import Tape, Tensor, backward


def _param(data, name):
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True, name=name)


class TestBackwardBasics:
    def test_sum_gradient_is_ones(self):
        x = _param(np.zeros((2, 2)), "x")
        with Tape() as tape:
            loss = x.sum()
        grads = backward(tape, loss)
        np.testing.assert_array_equal(grads["x"].data, np.ones((2, 2)))

    def test_quadratic_gradient(self):
        x = _param([1.0, 2.0], "x")
        with Tape() as tape:
            loss = T.mul(x, x).sum()
        grads = backward(tape, loss)
        np.testing.assert_allclose(grads["x"].data, [2.0, 4.0], rtol=1e-12)

    def test_unreachable_parameter_gets_zero(self):
        x = _param([1.0, 2.0], "x")
        y = _param([3.0], "y")
        with Tape() as tape:
            _ = T.scale(y, 2.0)       # y participates but never reaches the loss
            loss = x.sum()
        grads = backward(tape, loss)
        np.testing.assert_array_equal(grads["y"].data, [0.0])

    def test_non_scalar_loss_rejected(self):
        x = _param([1.0, 2.0], "x")
        with Tape() as tape:
            y = T.scale(x, 1.0)
        with pytest.raises(ContractError):
            backward(tape, y)

    def test_loss_outside_tape_rejected(self):
        x = _param([1.0], "x")
        loss = x.sum()  # no tape active
        with pytest.raises(ContractError):
            backward(Tape(), loss)

    def test_fanout_accumulates(self):
        x = _param([3.0], "x")
        with Tape() as tape:
            y = T.add(T.scale(x, 2.0), T.scale(x, 5.0))
            loss = y.sum()
        grads = backward(tape, loss)
        np.testing.assert_allclose(grads["x"].data, [7.0])

    def test_composite_conv_graph_fd(self):
        rng = np.random.default_rng(0)
        params = {
            "w": _param(rng.normal(size=(3, 2, 3, 3)) * 0.5, "w"),
            "b": _param(rng.normal(size=3), "b"),
        }
        x = Tensor(rng.normal(size=(1, 2, 5, 5)))

        def f(p):
            return T.mul(T.leaky_relu(T.conv2d(x, p["w"], p["b"])),
                         T.leaky_relu(T.conv2d(x, p["w"], p["b"]))).sum()

        assert finite_diff_check(f, params) <= 1e-3

    def test_leaky_relu_grad_at_negative(self):
        x = _param([-3.0], "x")
        with Tape() as tape:
            loss = T.leaky_relu(x).sum()
        grads = backward(tape, loss)
        assert abs(grads["x"].data[0] - 0.2) < 1e-12
        h = 1e-4
        fd = (0.2 * (-3 + h) - 0.2 * (-3 - h)) / (2 * h)
        assert abs(grads["x"].data[0] - fd) / abs(fd) <= 1e-4


OP_CASES = {
    "conv2d_s1": lambda p, x: T.conv2d(x, p["w"], p["b"]),
    "conv2d_s2": lambda p, x: T.conv2d(x, p["w"], p["b"], stride=2),
    "leaky_relu": lambda p, x: T.leaky_relu(T.conv2d(x, p["w"], p["b"])),
    "softplus": lambda p, x: T.softplus(T.conv2d(x, p["w"], p["b"])),
    "up2": lambda p, x: T.bilinear_resize(T.conv2d(x, p["w"], p["b"]), 2),
    "down2": lambda p, x: T.bilinear_resize(T.conv2d(x, p["w"], p["b"]), 0.5),
    "dwt2": lambda p, x: T.dwt2(T.conv2d(x, p["w"], p["b"])),
    "iwt2": lambda p, x: T.iwt2(T.dwt2(T.conv2d(x, p["w"], p["b"]))),
}


@pytest.mark.parametrize("name", sorted(OP_CASES))
def test_per_op_finite_difference(name):
    """Every differentiable op, reached through conv parameters, matches
    central differences in 64-bit mode."""
    rng = np.random.default_rng(42)
    params = {
        "w": _param(rng.normal(size=(4, 2, 3, 3)) * 0.4, "w"),
        "b": _param(rng.normal(size=4) * 0.3, "b"),
    }
    x = Tensor(rng.normal(size=(2, 2, 6, 6)))
    op = OP_CASES[name]

    def f(p):
        y = op(p, x)
        return T.mul(y, y).sum()

    assert finite_diff_check(f, params, max_coords=40) <= 1e-3


def test_linear_and_matmul_fd():
    rng = np.random.default_rng(1)
    params = {
        "w": _param(rng.normal(size=(3, 5)), "w"),
        "b": _param(rng.normal(size=3), "b"),
    }
    x = Tensor(rng.normal(size=(4, 5)))

    def f(p):
        y = T.leaky_relu(T.linear(x, p["w"], p["b"]))
        return T.mul(y, y).sum()

    assert finite_diff_check(f, params) <= 1e-3


def test_quadratic_fd_tight():
    params = {"x": _param([0.3, -1.2, 2.0], "x")}

    def f(p):
        return T.mul(p["x"], p["x"]).sum()

    assert finite_diff_check(f, params) <= 1e-6


class TestAdam:
    def test_first_step_bias_corrected(self):
        p = {"t": Tensor(np.zeros(1, np.float32), requires_grad=True, name="t")}
        st = AdamState.for_params(p)
        adam_step(p, {"t": np.ones(1, np.float32)}, st, lr=0.01, beta1=0.0,
                  beta2=0.99, eps=1e-8)
        assert abs(p["t"].data[0] + 0.01) < 1e-7
        assert st.t == 1

    def test_zero_gradient_keeps_params(self):
        p = {"t": Tensor(np.full(3, 1.5, np.float32), requires_grad=True, name="t")}
        st = AdamState.for_params(p)
        adam_step(p, {"t": np.zeros(3, np.float32)}, st)
        np.testing.assert_array_equal(p["t"].data, np.full(3, 1.5, np.float32))

    def test_two_steps_match_hand_unrolled(self):
        lr, b1, b2, eps = 0.01, 0.9, 0.99, 1e-8
        p = {"t": Tensor(np.zeros(1, np.float64), requires_grad=True, name="t")}
        st = AdamState.for_params(p)
        adam_step(p, {"t": np.ones(1)}, st, lr, b1, b2, eps)
        adam_step(p, {"t": np.ones(1)}, st, lr, b1, b2, eps)

        theta, m, v = 0.0, 0.0, 0.0
        for t in (1, 2):
            m = b1 * m + (1 - b1) * 1.0
            v = b2 * v + (1 - b2) * 1.0
            mhat = m / (1 - b1 ** t)
            vhat = v / (1 - b2 ** t)
            theta -= lr * mhat / (np.sqrt(vhat) + eps)
        assert abs(p["t"].data[0] - theta) < 1e-7
        assert st.t == 2

    def test_second_moment_nonnegative(self):
        rng = np.random.default_rng(0)
        p = {"t": Tensor(np.zeros(8, np.float32), requires_grad=True, name="t")}
        st = AdamState.for_params(p)
        for _ in range(5):
            adam_step(p, {"t": rng.normal(size=8).astype(np.float32)}, st)
        assert np.all(st.v["t"] >= 0)


class TestDoubleBackward:
    def test_grad_of_grad_quadratic(self):
        # f = sum(x^2); g = df/dx = 2x; h = sum(g^2) = 4 sum(x^2); dh/dx = 8x
        x = _param([1.0, -2.0], "x")
        tape = Tape()
        with tape:
            f = T.mul(x, x).sum()
            (g,) = backward(tape, f, wrt=[x], create_graph=True)
            h = T.mul(g, g).sum()
        grads = backward(tape, h)
        np.testing.assert_allclose(grads["x"].data, [8.0, -16.0], rtol=1e-10)

    def test_grad_of_input_grad_through_conv(self):
        # s(x) = sum(conv(x, w)); penalty = ||ds/dx||^2 depends on w only
        rng = np.random.default_rng(3)
        w = _param(rng.normal(size=(2, 1, 3, 3)), "w")
        x = Tensor(rng.normal(size=(1, 1, 4, 4)), requires_grad=True, name="x")
        tape = Tape()
        with tape:
            s = T.conv2d_raw(x, w).sum()
            (gx,) = backward(tape, s, wrt=[x], create_graph=True)
            pen = T.mul(gx, gx).sum()
        grads = backward(tape, pen)
        an = grads["w"].data

        def pen_value(wd):
            hld = Tensor(np.asarray(wd))
            t2 = Tape()
            xx = Tensor(x.data, requires_grad=True)
            with t2:
                s2 = T.conv2d_raw(xx, hld).sum()
                (g2,) = backward(t2, s2, wrt=[xx], create_graph=True)
                return float(T.mul(g2, g2).sum().data)

        h = 1e-5
        flat = w.data.reshape(-1)
        for i in [0, 5, 11, 17]:
            keep = flat[i]
            flat[i] = keep + h
            fp = pen_value(w.data)
            flat[i] = keep - h
            fm = pen_value(w.data)
            flat[i] = keep
            fd = (fp - fm) / (2 * h)
            assert abs(fd - an.reshape(-1)[i]) / max(abs(fd), 1e-8) < 1e-5


def test_backward_accumulation_is_deterministic():
    rng = np.random.default_rng(4)
    x = Tensor(rng.normal(size=(1, 2, 8, 8)).astype(np.float32))
    runs = []
    for _ in range(2):
        p = Tensor(np.ones((2, 2, 3, 3), np.float32) * 0.1, requires_grad=True,
                   name="p")
        tape = Tape()
        with tape:
            y = T.leaky_relu(T.conv2d_raw(x, p))
            loss = T.mul(y, y).sum()
        runs.append(backward(tape, loss)["p"].data.tobytes())
    assert runs[0] == runs[1]
