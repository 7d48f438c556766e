"""FFT correctness vs naive DFT, radial profiles, gap metric, blur baselines."""

import numpy as np
import pytest

from swagan import spectral
from swagan.data_io import DatasetDescriptor, synth_dataset
from swagan.errors import ContractError, DimensionError
from swagan.spectral import (GapProfile, SpectrumProfile, fft2, gaussian_blur,
                             ifft2, image_power_profile, radial_power_spectrum,
                             spectrum_gap)


def naive_dft_loops(x):
    """Quadruple-loop evaluation of the DFT definition (small sizes only)."""
    H, W = x.shape
    out = np.zeros((H, W), dtype=complex)
    for u in range(H):
        for v in range(W):
            acc = 0.0 + 0.0j
            for h in range(H):
                for w in range(W):
                    acc += x[h, w] * np.exp(-2j * np.pi * (u * h / H + v * w / W))
            out[u, v] = acc
    return out


def naive_dft_matrix(x):
    """Direct DFT via explicit exponential matrices (independent of radix-2)."""
    H, W = x.shape
    eh = np.exp(-2j * np.pi * np.outer(np.arange(H), np.arange(H)) / H)
    ew = np.exp(-2j * np.pi * np.outer(np.arange(W), np.arange(W)) / W)
    return eh @ x @ ew.T


class TestFft2:
    def test_impulse_is_flat(self):
        x = np.zeros((8, 8))
        x[0, 0] = 1.0
        np.testing.assert_allclose(fft2(x), np.ones((8, 8)), atol=1e-12)

    def test_constant_is_dc_only(self):
        f = fft2(np.ones((8, 8)))
        assert abs(f[0, 0] - 64.0) < 1e-6
        f[0, 0] = 0
        assert np.abs(f).max() <= 1e-6

    def test_matches_quadruple_loop_16(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(16, 16))
        got = fft2(x)
        want = naive_dft_loops(x)
        scale = np.abs(want).max()
        assert np.abs(got - want).max() / scale <= 1e-4

    @pytest.mark.parametrize("size", [2, 4, 8, 16, 32, 64])
    def test_matches_direct_dft_all_sizes(self, size):
        rng = np.random.default_rng(size)
        x = rng.normal(size=(size, size))
        got = fft2(x)
        want = naive_dft_matrix(x)
        assert np.abs(got - want).max() / np.abs(want).max() <= 1e-4

    def test_non_square_batched(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(3, 8, 16))
        got = fft2(x)
        for i in range(3):
            np.testing.assert_allclose(got[i], naive_dft_matrix(x[i]), atol=1e-8)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(DimensionError):
            fft2(np.zeros((6, 8)))

    @pytest.mark.parametrize("size", [8, 64, 512])
    def test_parseval(self, size):
        rng = np.random.default_rng(size)
        x = rng.normal(size=(size, size))
        f = fft2(x)
        lhs = float((np.abs(f) ** 2).sum())
        rhs = size * size * float((x ** 2).sum())
        assert abs(lhs - rhs) / rhs <= 1e-4

    def test_inverse_recovers(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(32, 32))
        back = ifft2(fft2(x))
        assert np.abs(back.real - x).max() <= 1e-5
        assert np.abs(back.imag).max() <= 1e-5


def _gray_image(plane):
    return np.stack([plane] * 3).astype(np.float32)


class TestRadialProfile:
    def test_cosine_lands_in_its_bin(self):
        n = 64
        w = np.arange(n)
        plane = np.cos(2 * np.pi * 8 * w / n)[None, :].repeat(n, axis=0)
        prof = image_power_profile(_gray_image(plane))
        non_dc = prof.copy()
        non_dc[0] = 0.0
        assert non_dc[8] / non_dc.sum() >= 0.99

    def test_constant_image_dc_only(self):
        prof = image_power_profile(_gray_image(np.full((32, 32), 0.5)))
        assert prof[0] > 0
        assert prof[1:].sum() <= 1e-10 * prof[0]

    def test_dc_bin_convention(self):
        # bin 0 equals (mean intensity)^2 * N^2 under the P = |F|^2 / N^2 norm
        rng = np.random.default_rng(3)
        plane = rng.uniform(0, 1, size=(32, 32))
        prof = image_power_profile(_gray_image(plane))
        mu = plane.mean()
        assert abs(prof[0] - mu * mu * 32 * 32) / (mu * mu * 32 * 32) <= 1e-5

    def test_white_noise_flat(self):
        rng = np.random.default_rng(4)
        n = 64
        imgs = [_gray_image(rng.normal(size=(n, n))) for _ in range(256)]
        prof = radial_power_spectrum(imgs)
        mid = prof.bins[4:n // 2 - 4]
        assert mid.max() / mid.min() <= 2.0
        # cross-check the same samples against the direct DFT oracle
        direct = np.zeros_like(prof.bins)
        rmap, counts = spectral.radial_bin_map(n)
        for img in imgs[:8]:
            gray = spectral.to_luminance(img)
            p = np.abs(naive_dft_matrix(gray)) ** 2 / (n * n)
            p = np.fft.fftshift(p)
            direct += np.bincount(rmap[rmap >= 0], weights=p[rmap >= 0],
                                  minlength=n // 2 + 1) / counts
        direct /= 8
        ours = radial_power_spectrum(imgs[:8]).bins
        np.testing.assert_allclose(ours, direct, rtol=1e-6)

    def test_empty_set_rejected(self):
        with pytest.raises(ContractError):
            radial_power_spectrum([])

    def test_profile_bin_count(self):
        prof = image_power_profile(_gray_image(np.zeros((64, 64)) + 0.1))
        assert prof.shape == (33,)


class TestSpectrumGap:
    def test_self_gap_zero(self):
        p = SpectrumProfile(np.linspace(1, 2, 17), 4)
        gap = spectrum_gap(p, p)
        np.testing.assert_array_equal(gap.bins, np.zeros(17))

    def test_doubled_model_gap_one(self):
        p = SpectrumProfile(np.linspace(1, 2, 17), 4)
        q = SpectrumProfile(p.bins * 2, 4)
        np.testing.assert_allclose(spectrum_gap(q, p).bins, 1.0)

    def test_asymmetry(self):
        p = SpectrumProfile(np.full(9, 1.0), 1)
        q = SpectrumProfile(np.full(9, 2.0), 1)
        assert not np.allclose(spectrum_gap(p, q).bins, spectrum_gap(q, p).bins)

    def test_zero_real_bin_rejected(self):
        p = SpectrumProfile(np.ones(9), 1)
        r = SpectrumProfile(np.ones(9), 1)
        r.bins[3] = 0.0
        with pytest.raises(ContractError, match="bin 3"):
            spectrum_gap(p, r)

    def test_top_quartile_mean(self):
        gap = GapProfile(np.arange(17.0))
        # bins 13..16 form the top quartile of a 17-bin profile
        assert gap.top_quartile_mean() == pytest.approx(np.mean([13, 14, 15, 16]))


class TestGaussianBlur:
    def test_impulse_gives_outer_product(self):
        x = np.zeros((1, 9, 9), np.float32)
        x[0, 4, 4] = 1.0
        k1 = np.array([1, 2, 1]) / 4
        want = np.outer(k1, k1)
        got = gaussian_blur(x, 3)[0, 3:6, 3:6]
        np.testing.assert_allclose(got, want, atol=1e-7)

    def test_constant_unchanged(self):
        x = np.full((3, 8, 8), 0.4, np.float32)
        for k in (3, 5):
            np.testing.assert_allclose(gaussian_blur(x, k), x, atol=1e-6)

    def test_unsupported_size(self):
        with pytest.raises(ContractError):
            gaussian_blur(np.zeros((1, 8, 8)), 7)

    def test_stronger_blur_removes_more_high_band_energy(self):
        # Reflect padding injects a tiny broadband boundary artifact, so the
        # per-image ordering is only meaningful where the top-quartile energy
        # is nonzero to begin with (block-wave stripes can have exactly none).
        rng = np.random.default_rng(5)
        images = list(synth_dataset(DatasetDescriptor(
            kind="synthetic", family="texture", count=16, seed=5, resolution=64)))
        images += [rng.normal(size=(3, 64, 64)).astype(np.float32) for _ in range(8)]
        checked = 0
        for img in images:
            p0 = image_power_profile(img)
            q = (3 * (len(p0) - 1)) // 4 + 1
            if p0[q:].sum() <= 1e-3 * p0.sum():
                continue
            p3 = image_power_profile(gaussian_blur(img, 3))
            p5 = image_power_profile(gaussian_blur(img, 5))
            assert p5[q:].sum() <= p3[q:].sum() + 1e-12
            checked += 1
        assert checked >= 12


def test_blur_monotone_gap_on_texture_set():
    """Mean top-quartile gap: 0 = gap(none) < gap(3x3) < gap(5x5)."""
    images = list(synth_dataset(DatasetDescriptor(
        kind="synthetic", family="texture", count=32, seed=11, resolution=64)))
    real = radial_power_spectrum(images)
    g0 = spectrum_gap(radial_power_spectrum(images), real).top_quartile_mean()
    g3 = spectrum_gap(radial_power_spectrum(
        [gaussian_blur(i, 3) for i in images]), real).top_quartile_mean()
    g5 = spectrum_gap(radial_power_spectrum(
        [gaussian_blur(i, 5) for i in images]), real).top_quartile_mean()
    assert g0 == 0.0
    assert g0 < g3 < g5


def test_radial_profile_op_matches_and_differentiates():
    from swagan.gradcheck import finite_diff_check
    from swagan.tensor import Tensor

    rng = np.random.default_rng(6)
    x = rng.normal(size=(2, 16, 16))
    prof_op = spectral.radial_profile_op(Tensor(x)).data
    for i in range(2):
        want = image_power_profile(np.stack([x[i]] * 3))
        # luminance of an equal-channel stack is the plane itself
        np.testing.assert_allclose(prof_op[i], want, rtol=1e-5)

    params = {"x": Tensor(rng.normal(size=(1, 8, 8)), requires_grad=True, name="x")}

    def f(p):
        prof = spectral.radial_profile_op(p["x"])
        import swagan.tensor as T
        return T.mul(prof, prof).sum()

    assert finite_diff_check(f, params, max_coords=40) <= 1e-3


def test_csv_round_trip(tmp_path):
    prof = SpectrumProfile(np.linspace(0.5, 3.0, 33), 7)
    path = tmp_path / "p.csv"
    spectral.write_profile_csv(path, prof)
    text = path.read_text()
    assert text.startswith("bin,frequency,power\n")
    assert "\r" not in text
    back = spectral.read_profile_csv(path)
    np.testing.assert_allclose(back, prof.bins, rtol=1e-9)
