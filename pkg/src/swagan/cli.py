"""Command-line entry point: ``swagan <subcommand> [--flag value]...``.

Exit codes: 0 success, 1 runtime error (message on stderr), 2 usage error.
Every randomized subcommand takes ``--seed`` and is bitwise reproducible in
single-threaded mode.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import data_io, kernels, nn, spectral, train
from .config import load_config
from .errors import SwaganError
from .tensor import Tensor
from .wavelet import BANDS

_VARIANT_ALIASES = {
    "bi": nn.SWAGAN_BI, "nu": nn.SWAGAN_NU, "final": nn.WAVELET_FINAL,
    "pixel": nn.PIXEL,
    nn.SWAGAN_BI: nn.SWAGAN_BI, nn.SWAGAN_NU: nn.SWAGAN_NU,
    nn.WAVELET_FINAL: nn.WAVELET_FINAL,
}


def _variant(name):
    try:
        return _VARIANT_ALIASES[name]
    except KeyError:
        raise SwaganError(f"unknown generator variant {name!r}") from None


def default_channels(n_blocks, cap=32):
    return tuple(min(cap, 8 * 2 ** (n_blocks - 1 - k)) for k in range(n_blocks))


def _build_parser():
    top = argparse.ArgumentParser(prog="swagan",
                                  description="wavelet-domain image synthesis")
    sub = top.add_subparsers(dest="command", required=True)

    def cmd(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--threads", type=int, default=1,
                       help="batch-parallel worker count (deterministic)")
        return p

    p = cmd("dwt", "decompose a PNG into per-band PNGs plus a min/max sidecar")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-prefix", required=True)

    p = cmd("idwt", "reassemble a PNG from per-band files written by dwt")
    p.add_argument("--in-prefix", dest="in_prefix", required=True)
    p.add_argument("--out", required=True)

    p = cmd("spectrum", "radially averaged power spectrum of a PNG directory")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = cmd("gap", "per-bin relative gap between two spectrum CSVs")
    p.add_argument("--model", required=True)
    p.add_argument("--real", required=True)
    p.add_argument("--out", required=True)

    p = cmd("train", "adversarial training from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    p = cmd("overfit", "fit a generator to one target image by MSE")
    p.add_argument("--target", required=True)
    p.add_argument("--variant", required=True,
                   choices=sorted(set(_VARIANT_ALIASES)))
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="overfit_out")

    p = cmd("sample", "draw images from a trained checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--psi", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = cmd("project", "invert a target image into W space")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--lambda-spectral", type=float, default=0.1)
    p.add_argument("--out", default="projection_out")

    p = cmd("interp", "linear interpolation between two projected latents")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--wa", required=True)
    p.add_argument("--wb", required=True)
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--out", default="interp_out")

    p = cmd("bench", "training throughput of two generator variants")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--res", type=int, required=True)
    p.add_argument("--images", type=int, required=True)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channels", default=None,
                   help="comma list of per-block widths (default: pyramid)")

    p = cmd("dump", "per-block wavelet band images of a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return top


# ---------------------------------------------------------------------------
# subcommand bodies


def _run_dwt(args):
    from .wavelet import dwt2

    image = data_io.load_png(args.input)
    dec = dwt2(Tensor(image[None]))
    pairs = []
    for band in BANDS:
        plane = dec.band(band).data[0]  # [3, h, w]
        pairs.append(data_io.save_normalized_png(f"{args.out_prefix}_{band}.png",
                                                 plane))
    data_io.write_minmax_sidecar(f"{args.out_prefix}.minmax.txt", pairs)
    return 0


def _run_idwt(args):
    from .wavelet import iwt2

    pairs = data_io.read_minmax_sidecar(f"{args.in_prefix}.minmax.txt")
    if len(pairs) != 4:
        raise SwaganError(f"{args.in_prefix}.minmax.txt must hold 4 lines")
    bands = []
    for band, (lo, hi) in zip(BANDS, pairs):
        bands.append(data_io.load_normalized_png(f"{args.in_prefix}_{band}.png",
                                                 lo, hi))
    dec = np.concatenate(bands, axis=0).astype(np.float32)
    image = iwt2(Tensor(dec[None]))
    data_io.save_png(args.out, image.data[0])
    return 0


def _run_spectrum(args):
    paths = sorted(p for p in os.listdir(args.input) if p.endswith(".png"))
    if not paths:
        raise SwaganError(f"no PNGs under {args.input}")
    images = [data_io.load_png(os.path.join(args.input, p)) for p in paths]
    profile = spectral.radial_power_spectrum(images)
    spectral.write_profile_csv(args.out, profile)
    return 0


def _run_gap(args):
    model = spectral.SpectrumProfile(spectral.read_profile_csv(args.model), 1)
    real = spectral.SpectrumProfile(spectral.read_profile_csv(args.real), 1)
    spectral.write_gap_csv(args.out, spectral.spectrum_gap(model, real))
    return 0


def _run_train(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    cfg = load_config(args.config, overrides)
    train.train_gan(cfg, log=lambda msg: print(msg, flush=True))
    print(f"checkpoint written to {os.path.join(cfg.out_dir, 'checkpoint.swgk')}")
    return 0


def _run_overfit(args):
    target = data_io.load_png(args.target)
    report, result = train.train_overfit(
        target, _variant(args.variant), args.steps, lr=args.lr, seed=args.seed,
        log=lambda msg: print(msg, flush=True))
    os.makedirs(args.out, exist_ok=True)
    report.write_csv(os.path.join(args.out, "report.csv"))
    data_io.save_png(os.path.join(args.out, "best.png"), result["best_image"])
    band = " ".join(f"{k}={v:.3e}" for k, v in result["band_mse"].items())
    print(f"best psnr {result['best_psnr']:.2f} dB; band mse: {band}")
    return 0


def _run_sample(args):
    cfg, gparams, _ = train.load_trained(args.ckpt)
    rng = np.random.default_rng(args.seed)
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.n):
        z = Tensor(rng.standard_normal((1, cfg.gen.latent_dim)).astype(np.float32))
        img = nn.generator_forward(gparams, cfg.gen, z, psi=args.psi)
        data_io.save_png(os.path.join(args.out, f"sample_{i:04d}.png"), img.data[0])
    return 0


def _run_project(args):
    cfg, gparams, _ = train.load_trained(args.ckpt)
    target = data_io.load_png(args.target)
    w, recon, psnr = train.project_latent(
        gparams, cfg.gen, target, args.steps, lr=args.lr,
        lambda_spectral=args.lambda_spectral,
        log=lambda msg: print(msg, flush=True))
    os.makedirs(args.out, exist_ok=True)
    data_io.save_checkpoint(os.path.join(args.out, "w.swgk"), "", {"w": w})
    data_io.save_png(os.path.join(args.out, "reconstruction.png"), recon)
    print(f"psnr {psnr:.2f} dB")
    return 0


def _load_w(path):
    _, tensors = data_io.load_checkpoint(path)
    if "w" not in tensors:
        raise SwaganError(f"{path} does not contain a 'w' tensor")
    return tensors["w"]


def _run_interp(args):
    cfg, gparams, _ = train.load_trained(args.ckpt)
    frames = train.interpolate_latents(gparams, cfg.gen, _load_w(args.wa),
                                       _load_w(args.wb), args.frames)
    os.makedirs(args.out, exist_ok=True)
    for i, frame in enumerate(frames):
        data_io.save_png(os.path.join(args.out, f"frame_{i:04d}.png"), frame)
    return 0


def _run_bench(args):
    n_blocks = int(np.log2(args.res / 4))
    if 4 * 2 ** n_blocks != args.res:
        raise SwaganError(f"resolution {args.res} must be 4 * 2**n")
    if args.channels:
        channels = tuple(int(c) for c in args.channels.split(","))
    else:
        channels = default_channels(n_blocks)
    results = {}
    for label, vname in (("a", args.a), ("b", args.b)):
        variant = _variant(vname)
        gen = nn.GeneratorSpec(variant=variant, n_blocks=n_blocks,
                               latent_dim=64, mapping_layers=4, channels=channels)
        disc = nn.DiscriminatorSpec(
            variant=nn.RESIDUAL_PIXEL if variant == nn.PIXEL else nn.WAVELET_SKIP,
            n_blocks=n_blocks, channels=tuple(reversed(channels)))
        r = train.bench_throughput(gen, disc, args.res, args.batch, args.images,
                                   seed=args.seed)
        results[label] = r
        print(f"{vname}: {r['seconds_per_1k']:.2f} s / 1k images "
              f"({r['images']} images, {r['flops_per_image']:.3g} MAC/image)")
    ratio = results["b"]["seconds_per_1k"] / results["a"]["seconds_per_1k"]
    flop_ratio = results["a"]["flops_per_image"] / results["b"]["flops_per_image"]
    print(f"throughput ratio (b/a): {ratio:.3f}; flop ratio (a/b): {flop_ratio:.3f}")
    return 0


def _run_dump(args):
    cfg, gparams, _ = train.load_trained(args.ckpt)
    written = data_io.dump_intermediates(gparams, cfg.gen, args.seed, args.out)
    print(f"wrote {len(written)} band images to {args.out}")
    return 0


_HANDLERS = {
    "dwt": _run_dwt, "idwt": _run_idwt, "spectrum": _run_spectrum,
    "gap": _run_gap, "train": _run_train, "overfit": _run_overfit,
    "sample": _run_sample, "project": _run_project, "interp": _run_interp,
    "bench": _run_bench, "dump": _run_dump,
}


def run(argv):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    if getattr(args, "threads", 1) > 1:
        kernels.set_threads(args.threads)
    try:
        return _HANDLERS[args.command](args)
    except (SwaganError, OSError) as exc:
        print(f"swagan {args.command}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
