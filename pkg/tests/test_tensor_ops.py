"""Forward-path contracts of the tensor core, checked against naive oracles."""

import numpy as np
import pytest

from swagan import tensor as T
from swagan.errors import ContractError, DimensionError
from swagan.tensor import Tensor


def naive_conv2d(x, w, b, stride, pad):
    """O(N*Cout*Cin*k^2*H*W) sliding-window reference."""
    N, Cin, H, W = x.shape
    Cout, _, k, _ = w.shape
    Ho = (H + 2 * pad - k) // stride + 1
    Wo = (W + 2 * pad - k) // stride + 1
    xp = np.zeros((N, Cin, H + 2 * pad, W + 2 * pad), dtype=np.float64)
    xp[:, :, pad:pad + H, pad:pad + W] = x
    y = np.zeros((N, Cout, Ho, Wo), dtype=np.float64)
    for n in range(N):
        for co in range(Cout):
            for oy in range(Ho):
                for ox in range(Wo):
                    acc = 0.0
                    for ci in range(Cin):
                        for ky in range(k):
                            for kx in range(k):
                                acc += (w[co, ci, ky, kx]
                                        * xp[n, ci, oy * stride + ky, ox * stride + kx])
                    y[n, co, oy, ox] = acc + b[co]
    return y


class TestConv2d:
    def test_identity_kernel(self):
        x = Tensor(np.arange(9, dtype=np.float32).reshape(1, 1, 3, 3))
        w = np.zeros((1, 1, 3, 3), dtype=np.float32)
        w[0, 0, 1, 1] = 1.0
        y = T.conv2d(x, Tensor(w), Tensor(np.zeros(1, np.float32)))
        np.testing.assert_array_equal(y.data, x.data)

    def test_zero_weight_constant_bias(self):
        x = Tensor(np.random.default_rng(0).normal(size=(2, 3, 6, 6)).astype(np.float32))
        w = Tensor(np.zeros((4, 3, 3, 3), dtype=np.float32))
        y = T.conv2d(x, w, Tensor(np.full(4, 1.25, dtype=np.float32)))
        assert np.all(y.data == 1.25)

    @pytest.mark.parametrize("stride", [1, 2])
    @pytest.mark.parametrize("k", [1, 3])
    def test_matches_naive_oracle(self, stride, k):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(1, 2, 5, 5)) if stride == 1 else rng.normal(size=(1, 2, 6, 6))
        w = rng.normal(size=(3, 2, k, k))
        b = rng.normal(size=3)
        got = T.conv2d(Tensor(x.astype(np.float32)), Tensor(w.astype(np.float32)),
                       Tensor(b.astype(np.float32)), stride=stride)
        want = naive_conv2d(x, w, b, stride, k // 2)
        assert got.shape == want.shape
        np.testing.assert_allclose(got.data, want, atol=1e-5)

    def test_shape_errors_name_axis(self):
        x = Tensor(np.zeros((1, 2, 4, 4), np.float32))
        w = Tensor(np.zeros((3, 5, 3, 3), np.float32))
        with pytest.raises(DimensionError, match="channel"):
            T.conv2d(x, w)
        with pytest.raises(ContractError):
            T.conv2d(x, Tensor(np.zeros((3, 2, 3, 3), np.float32)), stride=3)


class TestBilinearResize:
    def test_constant_preserved_up(self):
        x = Tensor(np.full((1, 2, 4, 4), 0.7, dtype=np.float32))
        y = T.bilinear_resize(x, 2)
        assert y.shape == (1, 2, 8, 8)
        np.testing.assert_allclose(y.data, 0.7, rtol=1e-6)

    def test_hand_evaluated_rows(self):
        # [[0,1],[0,1]] upsampled: every row becomes [0, 0.25, 0.75, 1]
        x = Tensor(np.array([[0.0, 1.0], [0.0, 1.0]], np.float32).reshape(1, 1, 2, 2))
        y = T.bilinear_resize(x, 2)
        want = np.array([0.0, 0.25, 0.75, 1.0], np.float32)
        for row in y.data[0, 0]:
            np.testing.assert_allclose(row, want, atol=1e-6)

    def test_scalar_reference_resampler(self):
        # independent per-pixel evaluation of the coordinate formula
        rng = np.random.default_rng(3)
        x = rng.normal(size=(1, 1, 4, 6)).astype(np.float32)
        y = T.bilinear_resize(Tensor(x), 2).data[0, 0]

        def sample(img, fy, fx):
            fy = min(max(fy, 0.0), img.shape[0] - 1.0)
            fx = min(max(fx, 0.0), img.shape[1] - 1.0)
            y0, x0 = int(np.floor(fy)), int(np.floor(fx))
            y1, x1 = min(y0 + 1, img.shape[0] - 1), min(x0 + 1, img.shape[1] - 1)
            ay, ax = fy - y0, fx - x0
            return ((1 - ay) * (1 - ax) * img[y0, x0] + (1 - ay) * ax * img[y0, x1]
                    + ay * (1 - ax) * img[y1, x0] + ay * ax * img[y1, x1])

        for i in range(8):
            for j in range(12):
                want = sample(x[0, 0], (i + 0.5) / 2 - 0.5, (j + 0.5) / 2 - 0.5)
                assert abs(y[i, j] - want) < 1e-6

    def test_down_then_up_constant_identity(self):
        x = Tensor(np.full((1, 1, 8, 8), -0.3, dtype=np.float32))
        y = T.bilinear_resize(T.bilinear_resize(x, 0.5), 2)
        np.testing.assert_allclose(y.data, x.data, atol=1e-7)

    def test_down_is_block_average(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(2, 3, 6, 8)).astype(np.float32)
        y = T.bilinear_resize(Tensor(x), 0.5).data
        want = 0.25 * (x[:, :, 0::2, 0::2] + x[:, :, 0::2, 1::2]
                       + x[:, :, 1::2, 0::2] + x[:, :, 1::2, 1::2])
        np.testing.assert_allclose(y, want, rtol=1e-6)

    def test_odd_dimension_rejected(self):
        with pytest.raises(DimensionError):
            T.bilinear_resize(Tensor(np.zeros((1, 1, 5, 4), np.float32)), 0.5)


class TestActivations:
    def test_leaky_relu_values(self):
        x = Tensor(np.array([1.0, -1.0, 0.0], np.float32))
        y = T.leaky_relu(x)
        np.testing.assert_allclose(y.data, [1.0, -0.2, 0.0], atol=1e-7)

    def test_softplus_values(self):
        y = T.softplus(Tensor(np.array([0.0, 100.0, -100.0], np.float64)))
        assert abs(y.data[0] - np.log(2.0)) < 1e-9
        assert abs(y.data[1] - 100.0) < 1e-6
        assert abs(y.data[2] - 3.7200759760208356e-44) < 1e-45
        assert np.isfinite(y.data).all()

    @pytest.mark.parametrize("fn", [T.leaky_relu, T.softplus])
    def test_monotone_nondecreasing(self, fn):
        for seed in range(3):
            v = np.sort(np.random.default_rng(seed).normal(scale=5, size=200))
            out = fn(Tensor(v.astype(np.float64))).data
            assert np.all(np.diff(out) >= 0)


class TestLinear:
    def test_identity(self):
        x = Tensor(np.random.default_rng(0).normal(size=(3, 4)).astype(np.float32))
        y = T.linear(x, Tensor(np.eye(4, dtype=np.float32)),
                     Tensor(np.zeros(4, np.float32)))
        np.testing.assert_allclose(y.data, x.data, rtol=1e-6)

    def test_zero_weight_gives_bias_rows(self):
        x = Tensor(np.ones((5, 3), np.float32))
        b = np.array([1.0, -2.0], np.float32)
        y = T.linear(x, Tensor(np.zeros((2, 3), np.float32)), Tensor(b))
        for row in y.data:
            np.testing.assert_array_equal(row, b)

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(2, 3))
        w = rng.normal(size=(4, 3))
        b = rng.normal(size=4)
        got = T.linear(Tensor(x), Tensor(w), Tensor(b)).data
        want = np.zeros((2, 4))
        for i in range(2):
            for j in range(4):
                acc = b[j]
                for k in range(3):
                    acc += x[i, k] * w[j, k]
                want[i, j] = acc
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            T.linear(Tensor(np.zeros((2, 3), np.float32)),
                     Tensor(np.zeros((4, 5), np.float32)))


class TestHaarPrimitives:
    def test_no_nans_on_finite_inputs(self):
        rng = np.random.default_rng(2)
        x = Tensor(rng.normal(scale=10, size=(2, 3, 16, 16)).astype(np.float32))
        for out in (T.dwt2(x), T.iwt2(T.dwt2(x)), T.bilinear_resize(x, 2),
                    T.leaky_relu(x), T.softplus(x)):
            assert np.isfinite(out.data).all()


def test_determinism_same_inputs_bitwise():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(2, 4, 12, 12)).astype(np.float32)
    w = rng.normal(size=(4, 4, 3, 3)).astype(np.float32)
    a = T.conv2d(Tensor(x), Tensor(w)).data
    b = T.conv2d(Tensor(x), Tensor(w)).data
    assert a.tobytes() == b.tobytes()
