"""Generator and discriminator architectures.

Generator layout (all variants): a learned 4x4 constant feeds ``n_blocks``
blocks of two 3x3 convolutions (modulated by per-layer styles unless
``style_enabled`` is off).  The first block keeps the 4x4 resolution; every
later block doubles it with a bilinear upsample.  A 1x1 skip head per block
emits either wavelet coefficients (12 channels) or RGB (3 channels), and the
skip stream is carried upward between blocks:

* swagan-bi     coefficient skips, combined via IWT -> bilinear x2 -> DWT
* swagan-nu     coefficient skips, combined via bilinear x2 on the 12
                channels followed by a learned 3x3 conv (12 -> 12)
* wavelet-final RGB skips everywhere; the last block adds an IWT of a
                coefficient head on top of the upsampled RGB stream
* pixel         RGB skips; every block upsamples, so block k runs at twice
                the spatial size of the matching wavelet-variant block

Wavelet variants synthesize the output image by applying the IWT to the
final skip decomposition, which doubles resolution once more; both families
therefore emit 4 * 2**n_blocks pixels for the same ``n_blocks``.

The wavelet-skip discriminator mirrors this: an image side path is decomposed
at every scale, mapped through 1x1 coefficient-to-feature convs, and summed
into a feature stream that halves between blocks down to 4x4.  The
residual-pixel variant is the standard residual topology (single fRGB entry,
1/sqrt(2)-scaled skips).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError
from .tensor import Tensor
from .wavelet import WaveletDecomp, wavelet_upsample

SWAGAN_BI = "swagan-bi"
SWAGAN_NU = "swagan-nu"
WAVELET_FINAL = "wavelet-final"
PIXEL = "pixel"
GEN_VARIANTS = (SWAGAN_BI, SWAGAN_NU, WAVELET_FINAL, PIXEL)

WAVELET_SKIP = "wavelet-skip"
RESIDUAL_PIXEL = "residual-pixel"
DISC_VARIANTS = (WAVELET_SKIP, RESIDUAL_PIXEL)


@dataclass
class GeneratorSpec:
    variant: str = SWAGAN_BI
    n_blocks: int = 4
    latent_dim: int = 64
    mapping_layers: int = 4
    channels: tuple = (64, 64, 32, 16)
    style_enabled: bool = True

    def __post_init__(self):
        if self.variant not in GEN_VARIANTS:
            raise ContractError(f"unknown generator variant {self.variant!r}")
        self.channels = tuple(int(c) for c in self.channels)
        if len(self.channels) != self.n_blocks:
            raise ContractError(
                f"channels list length {len(self.channels)} != n_blocks {self.n_blocks}")
        if self.n_blocks < 1:
            raise ContractError("n_blocks must be >= 1")

    @property
    def resolution(self):
        return 4 * 2 ** self.n_blocks

    @property
    def skip_channels(self):
        return 3 if self.variant == PIXEL else 12


@dataclass
class DiscriminatorSpec:
    variant: str = WAVELET_SKIP
    n_blocks: int = 4
    channels: tuple = (16, 32, 64, 64)

    def __post_init__(self):
        if self.variant not in DISC_VARIANTS:
            raise ContractError(f"unknown discriminator variant {self.variant!r}")
        self.channels = tuple(int(c) for c in self.channels)
        if len(self.channels) != self.n_blocks:
            raise ContractError(
                f"channels list length {len(self.channels)} != n_blocks {self.n_blocks}")

    @property
    def resolution(self):
        return 4 * 2 ** self.n_blocks


def _init_conv(rng, cout, cin, k, dtype):
    fan_in = cin * k * k
    return (rng.standard_normal((cout, cin, k, k)) / np.sqrt(fan_in)).astype(dtype)


def _init_linear(rng, dout, din, dtype):
    return (rng.standard_normal((dout, din)) / np.sqrt(din)).astype(dtype)


class _ParamBuilder:
    def __init__(self, seed, dtype):
        self.rng = np.random.default_rng(seed)
        self.dtype = dtype
        self.params = {}

    def conv(self, name, cout, cin, k, bias=True):
        self._add(f"{name}.weight", _init_conv(self.rng, cout, cin, k, self.dtype))
        if bias:
            self._add(f"{name}.bias", np.zeros(cout, dtype=self.dtype))

    def lin(self, name, dout, din, bias=True):
        self._add(f"{name}.weight", _init_linear(self.rng, dout, din, self.dtype))
        if bias:
            self._add(f"{name}.bias", np.zeros(dout, dtype=self.dtype))

    def _add(self, name, data, requires_grad=True):
        if name in self.params:
            raise ContractError(f"duplicate parameter name {name!r}")
        self.params[name] = Tensor(data, requires_grad=requires_grad, name=name)


def build_generator(spec, seed, dtype=np.float32):
    """Initialize generator parameters: N(0, 1/sqrt(fan_in)) weights, zero
    biases, all-ones 4x4 constant, zero w_avg.  Deterministic in ``seed``."""
    b = _ParamBuilder(seed, dtype)
    for i in range(spec.mapping_layers):
        b.lin(f"mapping.{i}", spec.latent_dim, spec.latent_dim)
    b._add("const", np.ones((spec.channels[0], 4, 4), dtype=dtype))
    head = "twav" if spec.variant != PIXEL else "trgb"
    for k in range(spec.n_blocks):
        cin = spec.channels[k - 1] if k else spec.channels[0]
        cout = spec.channels[k]
        b.conv(f"blocks.{k}.conv0", cout, cin, 3)
        b.conv(f"blocks.{k}.conv1", cout, cout, 3)
        if spec.style_enabled:
            b.lin(f"blocks.{k}.affine0", cin, spec.latent_dim)
            b.lin(f"blocks.{k}.affine1", cout, spec.latent_dim)
        if spec.variant == WAVELET_FINAL:
            b.conv(f"blocks.{k}.trgb", 3, cout, 1)
        else:
            b.conv(f"blocks.{k}.{head}", spec.skip_channels, cout, 1)
        if spec.variant == SWAGAN_NU and k > 0:
            b.conv(f"nu.{k}", 12, 12, 3)
    if spec.variant == WAVELET_FINAL:
        b.conv("head.twav", 12, spec.channels[-1], 1)
    wavg = Tensor(np.zeros(spec.latent_dim, dtype=dtype), name="w_avg")
    b.params["w_avg"] = wavg
    return b.params


def build_discriminator(spec, seed, dtype=np.float32):
    b = _ParamBuilder(seed, dtype)
    ch = spec.channels
    if spec.variant == WAVELET_SKIP:
        for k in range(spec.n_blocks):
            cin = ch[k - 1] if k else ch[0]
            b.conv(f"fwav.{k}", cin, 12, 1)
            b.conv(f"blocks.{k}.conv0", ch[k], cin, 3)
            b.conv(f"blocks.{k}.conv1", ch[k], ch[k], 3)
    else:
        b.conv("frgb", ch[0], 3, 1)
        for k in range(spec.n_blocks):
            cin = ch[k - 1] if k else ch[0]
            b.conv(f"blocks.{k}.conv0", cin, cin, 3)
            b.conv(f"blocks.{k}.conv1", ch[k], cin, 3)
            b.conv(f"blocks.{k}.skip", ch[k], cin, 1, bias=False)
    b.lin("final", 1, ch[-1] * 16)
    return b.params


def param_count(params):
    return sum(p.size for name, p in params.items() if name != "w_avg")


# ---------------------------------------------------------------------------
# forward passes


def modulated_conv2d(x, weight, style_scales, demodulate, bias=None):
    """Per-sample style modulation of a shared conv weight.

    Sample n is convolved with w'[o,i,:,:] = s[n,i] * w[o,i,:,:]; with
    demodulation each output channel is divided by
    sqrt(sum_{i,k} w'^2 + 1e-8).  Implemented as channel scaling around a
    shared convolution, which is exact for cross-correlation.
    """
    if not np.isfinite(style_scales.data).all():
        raise ContractError("modulated_conv2d: non-finite style scales")
    if x.shape[1] != weight.shape[1] or style_scales.shape != (x.shape[0], x.shape[1]):
        raise DimensionError(
            f"modulated_conv2d: input {x.shape}, weight {weight.shape}, "
            f"styles {style_scales.shape}")
    y = T.conv2d_raw(T.channel_scale(x, style_scales), weight)
    if demodulate:
        q = T.sum_axes(T.mul(weight, weight), (2, 3))          # [Cout, Cin]
        d2 = T.matmul(T.mul(style_scales, style_scales), T.transpose2d(q))
        dinv = T.reciprocal(T.sqrt(T.add_scalar(d2, 1e-8)))    # [N, Cout]
        y = T.channel_scale(y, dinv)
    if bias is not None:
        y = T.bias_add(y, bias)
    return y


def mapping_forward(params, spec, z):
    w = z
    for i in range(spec.mapping_layers):
        w = T.leaky_relu(T.linear(w, params[f"mapping.{i}.weight"],
                                  params[f"mapping.{i}.bias"]))
    return w


def truncate(params, w, psi):
    if not 0.0 <= psi <= 1.0:
        warnings.warn(f"truncation psi={psi} outside [0, 1]; extrapolating")
    wav = T.broadcast_to(T.reshape(params["w_avg"], (1, -1)), w.shape)
    return T.add(wav, T.scale(T.add(w, T.scale(wav, -1.0)), psi))


def _block_conv(params, spec, name, x, w_styled):
    if spec.style_enabled:
        aff = name.replace("conv", "affine")
        s = T.linear(w_styled, params[f"{aff}.weight"], params[f"{aff}.bias"])
        return modulated_conv2d(x, params[f"{name}.weight"], s, demodulate=True,
                                bias=params[f"{name}.bias"])
    return T.conv2d(x, params[f"{name}.weight"], params[f"{name}.bias"])


def synthesis_forward(params, spec, w_styled, capture_intermediates=False):
    """Run the synthesis network from styled latents w [N, latent_dim]."""
    n = w_styled.shape[0]
    dtype = w_styled.dtype
    const = T.reshape(params["const"], (1,) + params["const"].shape)
    feat = T.broadcast_to(const, (n,) + params["const"].shape)
    if feat.dtype != dtype:
        raise ContractError("latents and parameters disagree in dtype")

    skip = None
    decomps = []
    for k in range(spec.n_blocks):
        # pixel baseline upsamples in every block; wavelet variants keep the
        # first block at 4x4 since the final IWT doubles resolution once more
        if k > 0 or spec.variant == PIXEL:
            feat = T.bilinear_resize(feat, 2)
        feat = T.leaky_relu(_block_conv(params, spec, f"blocks.{k}.conv0", feat,
                                        w_styled))
        feat = T.leaky_relu(_block_conv(params, spec, f"blocks.{k}.conv1", feat,
                                        w_styled))
        if spec.variant in (SWAGAN_BI, SWAGAN_NU):
            head = T.conv2d(feat, params[f"blocks.{k}.twav.weight"],
                            params[f"blocks.{k}.twav.bias"])
            if skip is None:
                skip = head
            elif spec.variant == SWAGAN_BI:
                skip = T.add(head, wavelet_upsample(skip))
            else:
                up = T.conv2d(T.bilinear_resize(skip, 2), params[f"nu.{k}.weight"],
                              params[f"nu.{k}.bias"])
                skip = T.add(head, up)
            decomps.append(WaveletDecomp(skip))
        else:
            head = T.conv2d(feat, params[f"blocks.{k}.trgb.weight"],
                            params[f"blocks.{k}.trgb.bias"])
            skip = head if skip is None else T.add(head, T.bilinear_resize(skip, 2))

    if spec.variant in (SWAGAN_BI, SWAGAN_NU):
        image = T.iwt2(skip)
    elif spec.variant == WAVELET_FINAL:
        coeff = T.conv2d(feat, params["head.twav.weight"], params["head.twav.bias"])
        decomps.append(WaveletDecomp(coeff))
        image = T.add(T.iwt2(coeff), T.bilinear_resize(skip, 2))
    else:
        image = skip
    if capture_intermediates:
        return image, decomps
    return image


def generator_forward(params, spec, z, psi=1.0, capture_intermediates=False):
    """Full generator: mapping -> truncation -> synthesis."""
    if not np.isfinite(z.data).all():
        raise ContractError("generator_forward: non-finite latents")
    w = mapping_forward(params, spec, z)
    return synthesis_forward(params, spec, truncate(params, w, psi),
                             capture_intermediates)


def discriminator_forward(params, spec, image):
    """Score a batch of images; differentiable with respect to the input."""
    if image.data.ndim != 4 or image.shape[1] != 3:
        raise DimensionError(f"discriminator: expected [N, 3, R, R], got {image.shape}")
    r = spec.resolution
    if image.shape[2] != r or image.shape[3] != r:
        raise DimensionError(
            f"discriminator: resolution {image.shape[2]}x{image.shape[3]} != spec {r}x{r}")
    ch = spec.channels
    if spec.variant == WAVELET_SKIP:
        side = image
        feat = None
        for k in range(spec.n_blocks):
            if k > 0:
                side = T.bilinear_resize(side, 0.5)
            injected = T.leaky_relu(T.conv2d(T.dwt2(side), params[f"fwav.{k}.weight"],
                                             params[f"fwav.{k}.bias"]))
            feat = injected if feat is None else T.add(T.bilinear_resize(feat, 0.5),
                                                       injected)
            feat = T.leaky_relu(T.conv2d(feat, params[f"blocks.{k}.conv0.weight"],
                                         params[f"blocks.{k}.conv0.bias"]))
            feat = T.leaky_relu(T.conv2d(feat, params[f"blocks.{k}.conv1.weight"],
                                         params[f"blocks.{k}.conv1.bias"]))
    else:
        feat = T.leaky_relu(T.conv2d(image, params["frgb.weight"], params["frgb.bias"]))
        inv_sqrt2 = 1.0 / np.sqrt(2.0)
        for k in range(spec.n_blocks):
            main = T.leaky_relu(T.conv2d(feat, params[f"blocks.{k}.conv0.weight"],
                                         params[f"blocks.{k}.conv0.bias"]))
            main = T.bilinear_resize(main, 0.5)
            main = T.leaky_relu(T.conv2d(main, params[f"blocks.{k}.conv1.weight"],
                                         params[f"blocks.{k}.conv1.bias"]))
            short = T.conv2d_raw(T.bilinear_resize(feat, 0.5),
                                 params[f"blocks.{k}.skip.weight"])
            feat = T.scale(T.add(main, short), inv_sqrt2)
    flat = T.reshape(feat, (feat.shape[0], ch[-1] * 16))
    return T.linear(flat, params["final.weight"], params["final.bias"])


# ---------------------------------------------------------------------------
# analytic cost model


def flop_count(spec):
    """Multiply-accumulate count of all generator conv layers per image."""
    total = 0
    res = 4
    for k in range(spec.n_blocks):
        cin = spec.channels[k - 1] if k else spec.channels[0]
        cout = spec.channels[k]
        if spec.variant == PIXEL or k > 0:
            res *= 2
        total += cout * cin * 9 * res * res
        total += cout * cout * 9 * res * res
        skip_out = 3 if spec.variant in (WAVELET_FINAL, PIXEL) else 12
        total += skip_out * cout * res * res
        if spec.variant == SWAGAN_NU and k > 0:
            total += 12 * 12 * 9 * res * res
    if spec.variant == WAVELET_FINAL:
        total += 12 * spec.channels[-1] * res * res
    return total
