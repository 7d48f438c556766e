"""Experiment configuration: ``key = value`` text files with ``#`` comments.

Required keys: variant, d_variant, resolution, n_blocks, channels,
latent_dim, lr, gamma, batch, steps, seed, dataset, out_dir.  The rest carry
defaults.  ``channels`` is a comma list of per-block generator widths; the
discriminator mirrors it in reverse unless ``d_channels`` is given.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .data_io import DatasetDescriptor
from .errors import ConfigError
from .nn import DiscriminatorSpec, GeneratorSpec

REQUIRED = ("variant", "d_variant", "resolution", "n_blocks", "channels",
            "latent_dim", "lr", "gamma", "batch", "steps", "seed", "dataset",
            "out_dir")

DEFAULTS = {
    "beta1": "0.0",
    "beta2": "0.99",
    "eps": "1e-8",
    "r1_interval": "16",
    "eval_interval": "0",       # 0 -> max(1, steps // 10)
    "eval_samples": "32",
    "psi_eval": "1.0",
    "mapping_layers": "4",
    "style": "true",
    "d_channels": "",
    "w_avg_decay": "0.995",
}


@dataclass
class TrainConfig:
    gen: GeneratorSpec
    disc: DiscriminatorSpec
    lr: float
    beta1: float
    beta2: float
    eps: float
    gamma: float
    r1_interval: int
    batch: int
    steps: int
    seed: int
    dataset: DatasetDescriptor
    resolution: int
    eval_interval: int
    eval_samples: int
    psi_eval: float
    w_avg_decay: float
    out_dir: str
    raw: dict = field(default_factory=dict)

    def to_text(self):
        return "".join(f"{k} = {v}\n" for k, v in self.raw.items())


def parse_config_text(text):
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _to_bool(v):
    if v.lower() in ("true", "1", "yes"):
        return True
    if v.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected boolean, got {v!r}")


def build_config(pairs, overrides=None):
    """Merge defaults, file pairs, and CLI overrides (overrides win)."""
    merged = dict(DEFAULTS)
    merged.update(pairs)
    if overrides:
        merged.update({k: str(v) for k, v in overrides.items() if v is not None})
    missing = [k for k in REQUIRED if k not in merged]
    if missing:
        raise ConfigError(f"missing required config keys: {', '.join(missing)}")
    known = set(REQUIRED) | set(DEFAULTS)
    unknown = [k for k in merged if k not in known]
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    try:
        resolution = int(merged["resolution"])
        n_blocks = int(merged["n_blocks"])
        channels = tuple(int(c) for c in merged["channels"].split(",") if c.strip())
        steps = int(merged["steps"])
        batch = int(merged["batch"])
        seed = int(merged["seed"])
        gamma = float(merged["gamma"])
        r1_interval = int(merged["r1_interval"])
    except ValueError as exc:
        raise ConfigError(f"bad numeric config value: {exc}") from exc
    if steps <= 0:
        raise ConfigError("steps must be > 0")
    if gamma < 0:
        raise ConfigError("gamma must be >= 0")
    if r1_interval < 1:
        raise ConfigError("r1_interval must be >= 1")
    if batch < 1:
        raise ConfigError("batch must be >= 1")
    if resolution != 4 * 2 ** n_blocks:
        raise ConfigError(
            f"resolution {resolution} inconsistent with n_blocks {n_blocks} "
            f"(need 4 * 2**n_blocks = {4 * 2 ** n_blocks})")

    gen = GeneratorSpec(
        variant=merged["variant"],
        n_blocks=n_blocks,
        latent_dim=int(merged["latent_dim"]),
        mapping_layers=int(merged["mapping_layers"]),
        channels=channels,
        style_enabled=_to_bool(merged["style"]),
    )
    d_channels = merged["d_channels"].strip()
    disc = DiscriminatorSpec(
        variant=merged["d_variant"],
        n_blocks=n_blocks,
        channels=(tuple(int(c) for c in d_channels.split(","))
                  if d_channels else tuple(reversed(channels))),
    )
    eval_interval = int(merged["eval_interval"]) or max(1, steps // 10)
    dataset = DatasetDescriptor.parse(merged["dataset"], resolution)

    return TrainConfig(
        gen=gen, disc=disc,
        lr=float(merged["lr"]), beta1=float(merged["beta1"]),
        beta2=float(merged["beta2"]), eps=float(merged["eps"]),
        gamma=gamma, r1_interval=r1_interval, batch=batch, steps=steps,
        seed=seed, dataset=dataset, resolution=resolution,
        eval_interval=eval_interval, eval_samples=int(merged["eval_samples"]),
        psi_eval=float(merged["psi_eval"]),
        w_avg_decay=float(merged["w_avg_decay"]),
        out_dir=merged["out_dir"], raw=dict(merged),
    )


def load_config(path, overrides=None):
    with open(path, "r", encoding="utf-8") as fh:
        return build_config(parse_config_text(fh.read()), overrides)
