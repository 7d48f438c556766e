"""Frequency-domain evaluation: FFT, radially averaged power spectra,
spectrum-gap metric, and binomial blur baselines.

Conventions (normative for this artifact):
* fft2 is the unnormalized forward DFT, computed by a radix-2
  Cooley-Tukey pass over rows then columns.
* Power spectra are |F|^2 / (H*W), so the DC bin of an image with mean
  intensity mu equals mu^2 * N^2 and Parseval reads sum(P) = sum(x^2).
* Images are converted to grayscale luminance (0.299 R + 0.587 G +
  0.114 B) before the transform.
* Radial bin r collects the mean of P over centered frequencies with
  round(sqrt(u'^2 + v'^2)) == r, for r = 0 .. N/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError
from .tensor import Tensor

LUMA = (0.299, 0.587, 0.114)


# ---------------------------------------------------------------------------
# FFT


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def _bit_reverse(n):
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    bits = n.bit_length() - 1
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _fft_rows(a):
    """In-place-style radix-2 DIT FFT over the last axis (length power of 2)."""
    n = a.shape[-1]
    a = a[..., _bit_reverse(n)]
    m = 1
    while m < n:
        step = m * 2
        tw = np.exp(-2j * np.pi * np.arange(m) / step)
        a = a.reshape(a.shape[:-1] + (n // step, step))
        even = a[..., :m]
        odd = a[..., m:] * tw
        a = np.concatenate([even + odd, even - odd], axis=-1)
        a = a.reshape(a.shape[:-2] + (n,))
        m = step
    return a


def fft2(image):
    """Unnormalized 2-D DFT of a real (or complex) power-of-two grid.

    F(u, v) = sum_{h, w} x(h, w) exp(-2 pi i (u h / H + v w / W)), evaluated
    as row FFTs followed by column FFTs.  Accepts [H, W] or batched
    [..., H, W] arrays; returns complex128.
    """
    x = image.data if isinstance(image, Tensor) else np.asarray(image)
    H, W = x.shape[-2], x.shape[-1]
    if not (_is_pow2(H) and _is_pow2(W)):
        raise DimensionError(f"fft2: dimensions {H}x{W} must be powers of two")
    a = x.astype(np.complex128)
    a = _fft_rows(a)                      # rows
    a = _fft_rows(a.swapaxes(-1, -2))     # columns
    return a.swapaxes(-1, -2)


def ifft2(freq):
    """Inverse of fft2 (normalized by 1/(H*W)); provided for testing."""
    a = np.asarray(freq, dtype=np.complex128)
    n = a.shape[-1] * a.shape[-2]
    return np.conj(fft2(np.conj(a))) / n


# ---------------------------------------------------------------------------
# radial profiles


@dataclass
class SpectrumProfile:
    """Radially averaged power spectrum; bins[r] for r = 0 .. N//2."""

    bins: np.ndarray
    n_images: int

    @property
    def n_bins(self):
        return len(self.bins)


@dataclass
class GapProfile:
    """Per-radial-frequency relative gap between two spectra."""

    bins: np.ndarray

    def top_quartile_mean(self):
        start = (3 * (len(self.bins) - 1)) // 4 + 1
        return float(self.bins[start:].mean())


_RADIAL_CACHE: dict = {}


def radial_bin_map(n):
    """(bin index grid, per-bin pixel counts) for an n x n centered spectrum.

    Frequencies beyond N/2 (grid corners) fall outside the profile and are
    marked -1.
    """
    got = _RADIAL_CACHE.get(n)
    if got is None:
        c = n // 2
        u = np.arange(n) - c
        r = np.rint(np.sqrt(u[:, None] ** 2.0 + u[None, :] ** 2.0)).astype(np.intp)
        r[r > n // 2] = -1
        counts = np.bincount(r[r >= 0].ravel(), minlength=n // 2 + 1)
        got = (r, counts)
        _RADIAL_CACHE[n] = got
    return got


def to_luminance(image):
    """[C, N, N] or [N_batch, C, N, N] -> grayscale with the same trailing dims."""
    x = image.data if isinstance(image, Tensor) else np.asarray(image)
    if x.ndim == 3:
        return LUMA[0] * x[0] + LUMA[1] * x[1] + LUMA[2] * x[2] if x.shape[0] == 3 else x[0]
    raise DimensionError(f"to_luminance: expected [C, N, N], got {x.shape}")


def _power(gray):
    n = gray.shape[-1]
    f = fft2(gray)
    p = (f.real ** 2 + f.imag ** 2) / (gray.shape[-2] * n)
    return np.fft.fftshift(p, axes=(-2, -1))


def image_power_profile(image):
    """Radial profile of one [C, N, N] image."""
    gray = to_luminance(image)
    n = gray.shape[-1]
    if gray.shape[-2] != n:
        raise DimensionError(f"radial profile requires square images, got {gray.shape}")
    if not _is_pow2(n):
        raise DimensionError(f"radial profile: size {n} must be a power of two")
    p = _power(gray)
    rmap, counts = radial_bin_map(n)
    sums = np.bincount(rmap[rmap >= 0].ravel(), weights=p[rmap >= 0].ravel(),
                       minlength=n // 2 + 1)
    return sums / counts


def radial_power_spectrum(images):
    """Mean radial power profile over a set of [C, N, N] images."""
    images = list(images)
    if not images:
        raise ContractError("radial_power_spectrum: empty image set")
    acc = None
    for img in images:
        prof = image_power_profile(img)
        acc = prof if acc is None else acc + prof
    return SpectrumProfile(bins=acc / len(images), n_images=len(images))


def spectrum_gap(model, real):
    """Per-bin relative gap |model - real| / real between two mean profiles."""
    if model.n_bins != real.n_bins:
        raise DimensionError(
            f"spectrum_gap: bin counts differ ({model.n_bins} vs {real.n_bins})")
    zero = np.nonzero(real.bins <= 0)[0]
    if zero.size:
        raise ContractError(f"spectrum_gap: real profile is zero at bin {zero[0]}")
    return GapProfile(bins=np.abs(model.bins - real.bins) / real.bins)


# ---------------------------------------------------------------------------
# blur baselines

_BLUR_1D = {3: np.array([1.0, 2.0, 1.0]) / 4.0,
            5: np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0}


def gaussian_blur(image, kernel):
    """Separable binomial blur (3 -> [1,2,1]/4, 5 -> [1,4,6,4,1]/16),
    reflect padding at borders."""
    if kernel not in _BLUR_1D:
        raise ContractError(f"gaussian_blur: kernel size {kernel} not in {{3, 5}}")
    tensor_in = isinstance(image, Tensor)
    x = image.data if tensor_in else np.asarray(image)
    k = _BLUR_1D[kernel].astype(x.dtype)
    r = kernel // 2
    pad = [(0, 0)] * (x.ndim - 2) + [(r, r), (r, r)]
    xp = np.pad(x, pad, mode="reflect")
    out = np.zeros_like(x)
    for i, kv in enumerate(k):  # vertical pass
        out += kv * xp[..., i:i + x.shape[-2], r:r + x.shape[-1]]
    xp = np.pad(out, pad, mode="reflect")
    out = np.zeros_like(x)
    for i, kv in enumerate(k):  # horizontal pass
        out += kv * xp[..., r:r + x.shape[-2], i:i + x.shape[-1]]
    return Tensor(out) if tensor_in else out


# ---------------------------------------------------------------------------
# differentiable radial profile (spectral term of the projection loss)


def radial_profile_op(gray):
    """Differentiable radial power profile of a batched [N, H, W] tensor.

    Forward matches image_power_profile bin-for-bin.  The gradient uses the
    closed form d P_b / dx = 2/(HW * count_b) Re(IDFT*[mask_b . F]), folded
    over upstream bin weights; first-order only.
    """
    x = gray.data
    if x.ndim != 3 or x.shape[-1] != x.shape[-2]:
        raise DimensionError(f"radial_profile_op: expected [N, S, S], got {x.shape}")
    n = x.shape[-1]
    rmap, counts = radial_bin_map(n)
    f = fft2(x)
    p = (f.real ** 2 + f.imag ** 2) / (n * n)
    p = np.fft.fftshift(p, axes=(-2, -1))
    valid = rmap >= 0
    prof = np.stack([
        np.bincount(rmap[valid], weights=pi[valid], minlength=n // 2 + 1) / counts
        for pi in p
    ])
    out = Tensor(prof.astype(x.dtype))

    def vjp(g, needs):
        # spread per-bin upstream weights back onto the frequency grid
        w = g.data / counts[None, :]
        grid = np.zeros_like(p)
        grid[:, valid] = w[:, rmap[valid]]
        grid = np.fft.ifftshift(grid, axes=(-2, -1))
        adj = np.conj(fft2(np.conj(grid * f))) * (2.0 / (n * n))
        return (Tensor(adj.real.astype(x.dtype)),)

    return T.record(out, (gray,), vjp, "radial_profile")


def luminance_op(image):
    """Differentiable [N, 3, H, W] -> [N, H, W] luminance conversion."""
    x = image.data
    if x.ndim != 4 or x.shape[1] != 3:
        raise DimensionError(f"luminance_op: expected [N, 3, H, W], got {x.shape}")
    out = Tensor(LUMA[0] * x[:, 0] + LUMA[1] * x[:, 1] + LUMA[2] * x[:, 2])

    def vjp(g, needs):
        gb = np.stack([w * g.data for w in LUMA], axis=1)
        return (Tensor(gb.astype(x.dtype)),)

    return T.record(out, (image,), vjp, "luminance")


# ---------------------------------------------------------------------------
# CSV wire format


def write_profile_csv(path, profile):
    _write_csv(path, "power", profile.bins)


def write_gap_csv(path, gap):
    _write_csv(path, "gap", gap.bins)


def _write_csv(path, kind, bins):
    n = len(bins) - 1
    lines = [f"bin,frequency,{kind}"]
    for r, v in enumerate(bins):
        lines.append(f"{r},{r / (2 * n):.8g},{v:.10g}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_profile_csv(path):
    """Read either profile flavor back into a bin array."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if len(header) != 3 or header[:2] != ["bin", "frequency"]:
            raise ContractError(f"unrecognized profile CSV header in {path}")
        vals = [float(line.strip().split(",")[2]) for line in fh if line.strip()]
    return np.asarray(vals)
