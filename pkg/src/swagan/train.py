"""Losses, training loops, latent projection/interpolation, throughput bench.

Training follows the non-saturating logistic GAN objective with lazy R1
regularization (every ``r1_interval`` steps, scaled by the interval to keep
the expected penalty unchanged).  All loops are single-threaded over steps
and fully seeded: the same config and seed reproduce checkpoints bitwise.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import data_io, nn, spectral
from . import tensor as T
from .config import TrainConfig, build_config, parse_config_text
from .errors import ContractError
from .optim import AdamState, adam_step
from .tensor import Tape, Tensor, backward


@dataclass
class ReportRow:
    step: int
    images_seen: int
    wall_s: float
    g_loss: float
    d_loss: float
    psnr: float
    gap_topq: float


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)

    def add(self, **kw):
        self.rows.append(ReportRow(**kw))

    def write_csv(self, path):
        lines = ["step,images_seen,wall_s,g_loss,d_loss,psnr,gap_topq"]
        for r in self.rows:
            lines.append(f"{r.step},{r.images_seen},{r.wall_s:.3f},{r.g_loss:.8g},"
                         f"{r.d_loss:.8g},{r.psnr:.8g},{r.gap_topq:.8g}")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# losses


def gan_losses(d_real, d_fake):
    """Non-saturating logistic losses.

    g_loss = E softplus(-D(fake));  d_loss = E softplus(D(fake)) +
    E softplus(-D(real)).
    """
    g_loss = T.softplus(T.scale(d_fake, -1.0)).mean()
    d_loss = T.add(T.softplus(d_fake).mean(), T.softplus(T.scale(d_real, -1.0)).mean())
    return g_loss, d_loss


def r1_penalty(disc_spec, params, real_images, gamma):
    """(gamma/2) * E_batch ||grad_x D(x)||^2, differentiable in the
    discriminator parameters (double backward).

    Must run under an active tape; ``real_images`` may be a Tensor or array.
    """
    tape = T._tape()
    if tape is None:
        raise ContractError("r1_penalty must be called under an active tape")
    x = real_images if isinstance(real_images, Tensor) else Tensor(real_images)
    x = Tensor(x.data, requires_grad=True)
    scores = nn.discriminator_forward(params, disc_spec, x)
    (gimg,) = backward(tape, scores.sum(), wrt=[x], create_graph=True)
    return T.scale(T.mul(gimg, gimg).sum(), gamma / (2.0 * x.shape[0]))


def mse(a, b):
    d = T.add(a, T.scale(b, -1.0))
    return T.mul(d, d).mean()


def psnr_from_mse(m):
    """Peak signal-to-noise in dB for the [-1, 1] value range (peak 2)."""
    if m <= 0:
        return float("inf")
    return 10.0 * np.log10(4.0 / m)


# ---------------------------------------------------------------------------
# GAN training


def _named_grads(tape, loss, params):
    names = [n for n, p in params.items() if p.requires_grad]
    grads = backward(tape, loss, wrt=[params[n] for n in names])
    return dict(zip(names, grads))


class _GanLoop:
    """Shared machinery for train_gan and bench_throughput."""

    def __init__(self, cfg: TrainConfig, data):
        self.cfg = cfg
        self.data = data
        ss = np.random.SeedSequence(cfg.seed)
        s_g, s_d, s_data, s_z = ss.spawn(4)
        self.gparams = nn.build_generator(cfg.gen, s_g)
        self.dparams = nn.build_discriminator(cfg.disc, s_d)
        self.g_opt = AdamState.for_params(self.gparams)
        self.d_opt = AdamState.for_params(self.dparams)
        self.rng_data = np.random.default_rng(s_data)
        self.rng_z = np.random.default_rng(s_z)
        self.images_seen = 0
        self.last_r1 = float("nan")

    def _latents(self):
        z = self.rng_z.standard_normal((self.cfg.batch, self.cfg.gen.latent_dim))
        return Tensor(z.astype(np.float32))

    def _real_batch(self):
        idx = self.rng_data.integers(0, len(self.data), self.cfg.batch)
        return self.data[idx]

    def step(self, step_index):
        cfg = self.cfg
        # --- discriminator step
        real = self._real_batch()
        z = self._latents()
        fake = nn.generator_forward(self.gparams, cfg.gen, z, psi=1.0)
        tape = Tape()
        with tape:
            d_real = nn.discriminator_forward(self.dparams, cfg.disc, Tensor(real))
            d_fake = nn.discriminator_forward(self.dparams, cfg.disc,
                                              Tensor(fake.data))
            _, d_loss = gan_losses(d_real, d_fake)
            total = d_loss
            if cfg.gamma > 0 and step_index % cfg.r1_interval == 0:
                pen = r1_penalty(cfg.disc, self.dparams, real, cfg.gamma)
                self.last_r1 = float(pen.data)
                total = T.add(total, T.scale(pen, float(cfg.r1_interval)))
        d_loss_v = float(d_loss.data)
        grads = _named_grads(tape, total, self.dparams)
        adam_step(self.dparams, grads, self.d_opt, cfg.lr, cfg.beta1, cfg.beta2,
                  cfg.eps)
        self.images_seen += cfg.batch

        # --- generator step
        z = self._latents()
        tape = Tape()
        with tape:
            w = nn.mapping_forward(self.gparams, cfg.gen, z)
            img = nn.synthesis_forward(self.gparams, cfg.gen,
                                       nn.truncate(self.gparams, w, 1.0))
            scores = nn.discriminator_forward(self.dparams, cfg.disc, img)
            g_loss = T.softplus(T.scale(scores, -1.0)).mean()
        g_loss_v = float(g_loss.data)
        grads = _named_grads(tape, g_loss, self.gparams)
        adam_step(self.gparams, grads, self.g_opt, cfg.lr, cfg.beta1, cfg.beta2,
                  cfg.eps)
        wavg = self.gparams["w_avg"].data
        wavg *= cfg.w_avg_decay
        wavg += (1.0 - cfg.w_avg_decay) * w.data.mean(axis=0)
        return g_loss_v, d_loss_v

    def checkpoint_tensors(self):
        out = {}
        for prefix, params, opt in (("g", self.gparams, self.g_opt),
                                    ("d", self.dparams, self.d_opt)):
            for name, p in params.items():
                out[f"{prefix}.{name}"] = p.data
            for name, m in opt.m.items():
                out[f"adam.{prefix}.{name}.m"] = m
            for name, v in opt.v.items():
                out[f"adam.{prefix}.{name}.v"] = v
            out[f"adam.{prefix}.t"] = np.asarray(float(opt.t), dtype=np.float32)
        return out


def _sample_images(gparams, gen_spec, n, psi, rng):
    imgs = []
    for i in range(n):
        z = Tensor(rng.standard_normal((1, gen_spec.latent_dim)).astype(np.float32))
        img = nn.generator_forward(gparams, gen_spec, z, psi=psi)
        imgs.append(img.data[0])
    return imgs


def _gap_topq(model_images, real_profile):
    prof = spectral.radial_power_spectrum(model_images)
    gap = spectral.spectrum_gap(prof, real_profile)
    return gap.top_quartile_mean()


def train_gan(cfg: TrainConfig, log=None):
    """Alternating D/G Adam training; returns (checkpoint tensor dict, report).

    Writes ``checkpoint.swgk`` and ``report.csv`` under ``cfg.out_dir``.  On a
    non-finite loss the loop aborts, writing the last evaluated parameters to
    ``checkpoint_abort.swgk`` with a diagnostic.
    """
    data = data_io.load_dataset(cfg.dataset)
    if len(data) == 0:
        raise ContractError("train_gan: empty dataset")
    loop = _GanLoop(cfg, data)
    rng_eval = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(5)[4])
    real_profile = spectral.radial_power_spectrum(list(data))
    report = ExperimentReport()
    os.makedirs(cfg.out_dir, exist_ok=True)
    t0 = time.perf_counter()
    last_good = loop.checkpoint_tensors()
    g_loss_v = d_loss_v = float("nan")
    for step in range(cfg.steps):
        g_loss_v, d_loss_v = loop.step(step)
        if not (np.isfinite(g_loss_v) and np.isfinite(d_loss_v)):
            path = os.path.join(cfg.out_dir, "checkpoint_abort.swgk")
            data_io.save_checkpoint(path, cfg.to_text(), last_good)
            raise ContractError(
                f"non-finite loss at step {step} (g={g_loss_v}, d={d_loss_v}); "
                f"last good checkpoint written to {path}")
        if (step + 1) % cfg.eval_interval == 0 or step + 1 == cfg.steps:
            samples = _sample_images(loop.gparams, cfg.gen, cfg.eval_samples,
                                     cfg.psi_eval, rng_eval)
            gap = _gap_topq(samples, real_profile)
            report.add(step=step + 1, images_seen=loop.images_seen,
                       wall_s=time.perf_counter() - t0, g_loss=g_loss_v,
                       d_loss=d_loss_v, psnr=float("nan"), gap_topq=gap)
            last_good = loop.checkpoint_tensors()
            if log:
                log(f"step {step + 1}/{cfg.steps} g={g_loss_v:.4f} "
                    f"d={d_loss_v:.4f} gap_topq={gap:.4f}")
    tensors = loop.checkpoint_tensors()
    data_io.save_checkpoint(os.path.join(cfg.out_dir, "checkpoint.swgk"),
                            cfg.to_text(), tensors)
    report.write_csv(os.path.join(cfg.out_dir, "report.csv"))
    return tensors, report


def load_trained(path):
    """Load a training checkpoint into (config, gen params, disc params)."""
    cfg_text, tensors = data_io.load_checkpoint(path)
    cfg = build_config(parse_config_text(cfg_text))
    gparams = nn.build_generator(cfg.gen, 0)
    dparams = nn.build_discriminator(cfg.disc, 0)
    for name, p in gparams.items():
        p.data = tensors[f"g.{name}"].copy()
    for name, p in dparams.items():
        p.data = tensors[f"d.{name}"].copy()
    return cfg, gparams, dparams


# ---------------------------------------------------------------------------
# single-image overfit (spectral-bias probe)


def default_overfit_channels(n_blocks):
    """Pyramid widths, capped at 64: deepest block is narrowest."""
    return tuple(min(64, 8 * 2 ** (n_blocks - 1 - k)) for k in range(n_blocks))


def band_errors(image, target):
    """Per-band mean squared error between Haar decompositions."""
    from .wavelet import BANDS, dwt2
    di = dwt2(Tensor(image[None] if image.ndim == 3 else image))
    dt = dwt2(Tensor(target[None] if target.ndim == 3 else target))
    return {b: float(np.mean((di.band(b).data - dt.band(b).data) ** 2))
            for b in BANDS}


def train_overfit(target_image, variant, steps, lr=2e-3, seed=0, channels=None,
                  eval_interval=100, log=None):
    """Fit a generator to a single target from a fixed latent by MSE.

    Returns (report, result dict) where the result carries the best
    parameters, best mse/psnr, and per-band errors of the best output.
    """
    target = np.asarray(target_image, dtype=np.float32)
    if target.ndim != 3 or target.shape[1] != target.shape[2]:
        raise ContractError(f"overfit target must be [3, R, R], got {target.shape}")
    res = target.shape[1]
    n_blocks = int(np.log2(res / 4))
    if 4 * 2 ** n_blocks != res:
        raise ContractError(f"overfit target resolution {res} must be 4 * 2**n")
    spec = nn.GeneratorSpec(
        variant=variant, n_blocks=n_blocks, latent_dim=64, mapping_layers=4,
        channels=tuple(channels) if channels else default_overfit_channels(n_blocks),
    )
    ss = np.random.SeedSequence(seed)
    s_init, s_z = ss.spawn(2)
    params = nn.build_generator(spec, s_init)
    opt = AdamState.for_params(params)
    z = Tensor(np.random.default_rng(s_z)
               .standard_normal((1, spec.latent_dim)).astype(np.float32))
    tgt = Tensor(target[None])

    report = ExperimentReport()
    best = {"mse": float("inf"), "params": None, "image": None}
    t0 = time.perf_counter()
    for step in range(steps + 1):
        tape = Tape()
        with tape:
            img = nn.generator_forward(params, spec, z, psi=1.0)
            loss = mse(img, tgt)
        m = float(loss.data)
        if not np.isfinite(m):
            raise ContractError(f"overfit loss diverged at step {step}")
        if m < best["mse"]:
            best = {"mse": m,
                    "params": {n: p.data.copy() for n, p in params.items()},
                    "image": img.data[0].copy()}
        if step % eval_interval == 0 or step == steps:
            report.add(step=step, images_seen=step, wall_s=time.perf_counter() - t0,
                       g_loss=m, d_loss=float("nan"),
                       psnr=psnr_from_mse(best["mse"]), gap_topq=float("nan"))
            if log:
                log(f"overfit[{variant}] step {step}/{steps} mse={m:.3e} "
                    f"psnr={psnr_from_mse(best['mse']):.2f}dB")
        if step == steps:
            break
        grads = _named_grads(tape, loss, params)
        adam_step(params, grads, opt, lr)

    result = {
        "spec": spec,
        "best_mse": best["mse"],
        "best_psnr": psnr_from_mse(best["mse"]),
        "best_params": best["params"],
        "best_image": best["image"],
        "band_mse": band_errors(best["image"], target),
        "param_count": nn.param_count(params),
    }
    return report, result


# ---------------------------------------------------------------------------
# latent projection and interpolation


def project_latent(gparams, gen_spec, target_image, steps, lr=0.05,
                   lambda_spectral=0.1, log=None):
    """Invert an image into W space by Adam on pixel MSE plus a spectral term.

    The spectral term is the mean squared difference of radial power
    profiles over the top-quartile frequency bins.  Returns
    (w [latent_dim], reconstruction [3, R, R], psnr dB) of the best iterate.
    """
    target = np.asarray(target_image, dtype=np.float32)
    res = gen_spec.resolution
    if target.shape != (3, res, res):
        raise ContractError(f"projection target must be [3, {res}, {res}], "
                            f"got {target.shape}")
    tprof = spectral.image_power_profile(target).astype(np.float32)
    n_bins = tprof.size
    topq = np.zeros(n_bins, dtype=np.float32)
    topq[(3 * (n_bins - 1)) // 4 + 1:] = 1.0
    n_topq = float(topq.sum())
    tgt = Tensor(target[None])
    tprof_t = Tensor(tprof[None])

    w = Tensor(gparams["w_avg"].data.reshape(1, -1).copy(), requires_grad=True,
               name="w")
    opt = AdamState.for_params({"w": w})
    best = {"psnr": -float("inf"), "w": w.data.copy(), "image": None}
    for step in range(steps + 1):
        tape = Tape()
        with tape:
            img = nn.synthesis_forward(gparams, gen_spec, w)
            pixel = mse(img, tgt)
            loss = pixel
            if lambda_spectral > 0:
                prof = spectral.radial_profile_op(spectral.luminance_op(img))
                dp = T.add(prof, T.scale(tprof_t, -1.0))
                sq = T.cmul(T.mul(dp, dp), topq[None, :])
                loss = T.add(loss, T.scale(sq.sum(),
                                           lambda_spectral / n_topq))
        p = psnr_from_mse(float(pixel.data))
        if p > best["psnr"]:
            best = {"psnr": p, "w": w.data[0].copy(), "image": img.data[0].copy()}
        if step == steps:
            break
        grads = _named_grads(tape, loss, {"w": w})
        adam_step({"w": w}, grads, opt, lr)
        if log and step % max(1, steps // 10) == 0:
            log(f"project step {step}/{steps} psnr={p:.2f}dB")
    if best["image"] is None:
        best["image"] = nn.synthesis_forward(gparams, gen_spec, w).data[0]
    return best["w"], best["image"], best["psnr"]


def interpolate_latents(gparams, gen_spec, w_a, w_b, n_steps):
    """Images along the straight path w(t) = (1-t) w_a + t w_b."""
    w_a = np.asarray(w_a, dtype=np.float32).reshape(-1)
    w_b = np.asarray(w_b, dtype=np.float32).reshape(-1)
    if w_a.shape != w_b.shape:
        raise ContractError("interpolate_latents: latent dims differ")
    ts = [0.0] if n_steps == 1 else [i / (n_steps - 1) for i in range(n_steps)]
    frames = []
    for t in ts:
        w = Tensor(((1.0 - t) * w_a + t * w_b)[None])
        frames.append(nn.synthesis_forward(gparams, gen_spec, w).data[0])
    return frames


# ---------------------------------------------------------------------------
# throughput benchmark


def bench_throughput(gen_spec, disc_spec, resolution, batch, n_images, seed=0,
                     gamma=1.0, r1_interval=16):
    """Wall-time of full training iterations normalized to 1000 images.

    Uses seeded noise images as the dataset; excludes evaluation entirely.
    Returns a dict with seconds-per-1000-images and the analytic per-image
    generator MAC count.
    """
    if n_images < 1000:
        raise ContractError("bench_throughput requires n_images >= 1000")
    if gen_spec.resolution != resolution or disc_spec.resolution != resolution:
        raise ContractError("bench_throughput: spec resolution mismatch")
    rng = np.random.default_rng(seed)
    data = rng.uniform(-1, 1, size=(max(2 * batch, 16), 3, resolution,
                                    resolution)).astype(np.float32)
    cfg_pairs = {
        "variant": gen_spec.variant, "d_variant": disc_spec.variant,
        "resolution": str(resolution), "n_blocks": str(gen_spec.n_blocks),
        "channels": ",".join(str(c) for c in gen_spec.channels),
        "d_channels": ",".join(str(c) for c in disc_spec.channels),
        "latent_dim": str(gen_spec.latent_dim),
        "mapping_layers": str(gen_spec.mapping_layers),
        "lr": "2e-3", "gamma": str(gamma), "r1_interval": str(r1_interval),
        "batch": str(batch), "steps": "1", "seed": str(seed),
        "dataset": "synthetic:texture:1:0", "out_dir": ".",
    }
    cfg = build_config(cfg_pairs)
    loop = _GanLoop(cfg, data)
    loop.step(0)  # warm-up iteration outside the timed region
    steps = (n_images + batch - 1) // batch
    t0 = time.perf_counter()
    for s in range(steps):
        loop.step(s + 1)
    wall = time.perf_counter() - t0
    processed = steps * batch
    return {
        "seconds_per_1k": wall * 1000.0 / processed,
        "wall_s": wall,
        "images": processed,
        "flops_per_image": nn.flop_count(gen_spec),
    }
