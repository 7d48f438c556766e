"""Pure-NumPy convolution kernels; fallback when the C extension is absent.

Same contracts as the compiled module: cross-correlation over NCHW input
with OIkk weights, zero padding, fixed accumulation order per call.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _window_view(xp, k, stride, Ho, Wo):
    n, c = xp.shape[0], xp.shape[1]
    s = xp.strides
    return as_strided(
        xp,
        (n, c, Ho, Wo, k, k),
        (s[0], s[1], s[2] * stride, s[3] * stride, s[2], s[3]),
        writeable=False,
    )


def conv2d_forward(x, w, stride, pad):
    N, Cin, H, W = x.shape
    k = w.shape[2]
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    Ho = (H + 2 * pad - k) // stride + 1
    Wo = (W + 2 * pad - k) // stride + 1
    v = _window_view(x, k, stride, Ho, Wo)
    y = np.tensordot(v, w, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2))


def conv2d_grad_input(gy, w, stride, pad, H, W):
    N, Cout, Ho, Wo = gy.shape
    Cin, k = w.shape[1], w.shape[2]
    gxp = np.zeros((N, Cin, H + 2 * pad, W + 2 * pad), dtype=gy.dtype)
    for ky in range(k):
        for kx in range(k):
            # [N,Ho,Wo,Cin] contribution of this kernel tap
            t = np.tensordot(gy, w[:, :, ky, kx], axes=(1, 0))
            gxp[:, :, ky:ky + Ho * stride:stride, kx:kx + Wo * stride:stride] += (
                t.transpose(0, 3, 1, 2)
            )
    if pad:
        return np.ascontiguousarray(gxp[:, :, pad:pad + H, pad:pad + W])
    return gxp


def conv2d_grad_weight(x, gy, stride, pad, k):
    H, W = x.shape[2], x.shape[3]
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    Ho, Wo = gy.shape[2], gy.shape[3]
    v = _window_view(x, k, stride, Ho, Wo)
    gw = np.tensordot(gy, v, axes=([0, 2, 3], [0, 2, 3]))
    return np.ascontiguousarray(gw)
