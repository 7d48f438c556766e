"""First-level 2-D Haar sub-band transforms and wavelet-domain resampling.

Normalization is orthonormal (each 2x2 block scaled by 1/2), so analysis
preserves energy and synthesis is its exact transpose.  Band naming follows
the directional convention used throughout this package: LH carries
horizontal content, HL vertical, HH diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import tensor as T
from .errors import DimensionError
from .tensor import Tensor

BANDS = ("LL", "LH", "HL", "HH")


@dataclass
class WaveletDecomp:
    """Four sub-bands per color channel at half the represented resolution.

    ``bands`` is (N, 4C, H, W) with channel blocks ordered [LL, LH, HL, HH];
    the represented image is (N, C, 2H, 2W).
    """

    bands: Tensor

    def __post_init__(self):
        if self.bands.data.ndim != 4 or self.bands.shape[1] % 4:
            raise DimensionError(
                f"WaveletDecomp: bands must be (N, 4C, H, W), got {self.bands.shape}")

    @property
    def colors(self):
        return self.bands.shape[1] // 4

    @property
    def represented_resolution(self):
        return (2 * self.bands.shape[2], 2 * self.bands.shape[3])

    def band(self, name):
        i = BANDS.index(name)
        c = self.colors
        return Tensor(self.bands.data[:, i * c:(i + 1) * c])


def dwt2(image):
    """Analyze (N, C, 2H, 2W) into a WaveletDecomp; differentiable."""
    return WaveletDecomp(T.dwt2(image))


def iwt2(decomp):
    """Synthesize the represented image from a decomposition (or raw bands)."""
    bands = decomp.bands if isinstance(decomp, WaveletDecomp) else decomp
    return T.iwt2(bands)


def wavelet_upsample(decomp):
    """Double the represented resolution: IWT -> bilinear x2 -> DWT."""
    bands = decomp.bands if isinstance(decomp, WaveletDecomp) else decomp
    up = T.bilinear_resize(T.iwt2(bands), 2)
    out = T.dwt2(up)
    return WaveletDecomp(out) if isinstance(decomp, WaveletDecomp) else out


def wavelet_downsample(decomp):
    """Halve the represented resolution: IWT -> bilinear x1/2 -> DWT."""
    bands = decomp.bands if isinstance(decomp, WaveletDecomp) else decomp
    down = T.bilinear_resize(T.iwt2(bands), 0.5)
    out = T.dwt2(down)
    return WaveletDecomp(out) if isinstance(decomp, WaveletDecomp) else out
