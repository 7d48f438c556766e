"""Image codec, synthetic datasets, checkpoint serialization, and dumps.

The PNG codec is self-contained (zlib + struct): it writes non-interlaced
truecolor files at 8 or 16 bits and reads back any non-interlaced truecolor
PNG (all five row filters).  Everything else is rejected with a format
error, which keeps the artifact's pixel mapping exactly specified.

Checkpoint container (little-endian throughout):

    magic "SWGK" | version u32 | config_len u32 | config utf-8 |
    tensor_count u32 | per tensor: name_len u32, name utf-8, ndim u32,
    dims u32 * ndim, payload float32

Optimizer state rides along under names prefixed ``adam.``.
"""

from __future__ import annotations

import os
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, FormatError

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


# ---------------------------------------------------------------------------
# PNG codec


def _chunk(tag, payload):
    return (struct.pack(">I", len(payload)) + tag + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF))


def write_png_array(path, arr):
    """Write an [H, W, 3] uint8 or uint16 array as a truecolor PNG."""
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise FormatError(f"write_png_array: expected [H, W, 3], got {arr.shape}")
    if arr.dtype == np.uint8:
        depth, payload = 8, arr
    elif arr.dtype == np.uint16:
        depth, payload = 16, arr.astype(">u2")
    else:
        raise FormatError(f"write_png_array: unsupported dtype {arr.dtype}")
    h, w = arr.shape[:2]
    ihdr = struct.pack(">IIBBBBB", w, h, depth, 2, 0, 0, 0)
    rows = payload.reshape(h, -1).view(np.uint8).reshape(h, -1)
    raw = b"".join(b"\x00" + rows[y].tobytes() for y in range(h))
    data = _PNG_SIG + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", zlib.compress(raw, 6)) \
        + _chunk(b"IEND", b"")
    _atomic_write(path, data)


def _paeth(a, b, c):
    p = a.astype(np.int16) + b - c
    pa, pb, pc = np.abs(p - a), np.abs(p - b), np.abs(p - c)
    return np.where((pa <= pb) & (pa <= pc), a, np.where(pb <= pc, b, c))


def _unfilter(raw, h, w, bpp):
    stride = w * bpp
    out = np.zeros((h, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.uint8)
    pos = 0
    for y in range(h):
        ftype = raw[pos]
        row = np.frombuffer(raw, np.uint8, stride, pos + 1).copy()
        pos += 1 + stride
        if ftype == 0:
            cur = row
        elif ftype == 2:
            cur = row + prev
        elif ftype in (1, 3, 4):
            cur = row.reshape(w, bpp)
            up = prev.reshape(w, bpp)
            left = np.zeros(bpp, dtype=np.uint8)
            ul = np.zeros(bpp, dtype=np.uint8)
            for x in range(w):
                if ftype == 1:
                    cur[x] += left
                elif ftype == 3:
                    cur[x] += ((left.astype(np.uint16) + up[x]) // 2).astype(np.uint8)
                else:
                    cur[x] += _paeth(left, up[x], ul).astype(np.uint8)
                left = cur[x]
                ul = up[x]
            cur = cur.reshape(-1)
        else:
            raise FormatError(f"unknown PNG row filter {ftype}")
        out[y] = cur
        prev = cur
    return out


def read_png_array(path):
    """Read a non-interlaced truecolor PNG into [H, W, 3] uint8 or uint16."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if not blob.startswith(_PNG_SIG):
        raise FormatError(f"{path}: not a PNG file")
    pos = len(_PNG_SIG)
    ihdr = None
    idat = []
    while pos + 8 <= len(blob):
        length, tag = struct.unpack(">I4s", blob[pos:pos + 8])
        payload = blob[pos + 8:pos + 8 + length]
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", payload)
        elif tag == b"IDAT":
            idat.append(payload)
        elif tag == b"IEND":
            break
    if ihdr is None:
        raise FormatError(f"{path}: missing IHDR")
    w, h, depth, ctype, comp, filt, interlace = ihdr
    if ctype != 2:
        raise FormatError(f"{path}: unsupported color type {ctype} (need truecolor)")
    if depth not in (8, 16):
        raise FormatError(f"{path}: unsupported bit depth {depth}")
    if interlace:
        raise FormatError(f"{path}: interlaced PNGs are not supported")
    raw = zlib.decompress(b"".join(idat))
    bpp = 3 * (depth // 8)
    if len(raw) != h * (w * bpp + 1):
        raise FormatError(f"{path}: IDAT length {len(raw)} does not match geometry")
    flat = _unfilter(raw, h, w, bpp)
    if depth == 8:
        return flat.reshape(h, w, 3)
    return flat.reshape(h, w, 3, 2).view(">u2")[..., 0].astype(np.uint16)


def load_png(path):
    """8-bit RGB PNG -> float32 [3, H, W] in [-1, 1] via b -> b/127.5 - 1."""
    arr = read_png_array(path)
    if arr.dtype != np.uint8:
        raise FormatError(f"{path}: expected 8-bit RGB")
    return (arr.astype(np.float32) / 127.5 - 1.0).transpose(2, 0, 1)


def save_png(path, image):
    """float [3, H, W] -> 8-bit RGB PNG; clamps to [-1, 1], rounds half up."""
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != 3:
        raise FormatError(f"save_png: expected [3, H, W], got {x.shape}")
    b = np.floor((np.clip(x, -1.0, 1.0) + 1.0) * 127.5 + 0.5)
    write_png_array(path, np.clip(b, 0, 255).astype(np.uint8).transpose(1, 2, 0))


# normalized band files: value -> [0, 255] scale stored with 16-bit precision
_BAND_SCALE = 257.0  # 65535 / 255


def save_normalized_png(path, plane_or_rgb):
    """Affinely map to [0, 255], store at 16-bit precision; returns (min, max)."""
    x = np.asarray(plane_or_rgb, dtype=np.float64)
    if x.ndim == 2:
        x = np.stack([x] * 3, axis=-1)
    elif x.ndim == 3 and x.shape[0] == 3:
        x = x.transpose(1, 2, 0)
    lo, hi = float(x.min()), float(x.max())
    span = hi - lo if hi > lo else 1.0
    norm = (x - lo) / span * 255.0
    write_png_array(path, np.rint(norm * _BAND_SCALE).astype(np.uint16))
    return lo, hi


def load_normalized_png(path, lo, hi):
    """Invert save_normalized_png given the sidecar (min, max)."""
    arr = read_png_array(path)
    if arr.dtype != np.uint16:
        raise FormatError(f"{path}: expected a 16-bit normalized PNG")
    norm = arr.astype(np.float64) / _BAND_SCALE / 255.0
    span = hi - lo if hi > lo else 1.0
    return (norm * span + lo).transpose(2, 0, 1)


def write_minmax_sidecar(path, pairs):
    lines = [f"{lo:.17g} {hi:.17g}" for lo, hi in pairs]
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_minmax_sidecar(path):
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            a, b = line.split()
            pairs.append((float(a), float(b)))
    return pairs


# ---------------------------------------------------------------------------
# synthetic datasets


@dataclass
class DatasetDescriptor:
    """kind: single_image(path) | synthetic(family, count, seed) | directory(path)."""

    kind: str
    path: str = ""
    family: str = ""
    count: int = 1
    seed: int = 0
    resolution: int = 64

    @classmethod
    def parse(cls, text, resolution):
        parts = text.split(":")
        if parts[0] == "single_image" and len(parts) == 2:
            return cls(kind="single_image", path=parts[1], resolution=resolution)
        if parts[0] == "directory" and len(parts) == 2:
            return cls(kind="directory", path=parts[1], resolution=resolution)
        if parts[0] == "synthetic" and len(parts) == 4:
            return cls(kind="synthetic", family=parts[1], count=int(parts[2]),
                       seed=int(parts[3]), resolution=resolution)
        raise ConfigError(f"cannot parse dataset descriptor {text!r}")


def checkerboard(res, period, phase=(0, 0)):
    """+-1 checkerboard with squares of side period//2, shifted by phase."""
    h = period // 2
    y = (np.arange(res)[:, None] + phase[0]) // h
    x = (np.arange(res)[None, :] + phase[1]) // h
    return np.where((y + x) % 2 == 0, 1.0, -1.0).astype(np.float32)


def stripes(res, period, orientation, phase=0):
    """+-1 stripe pattern; horizontal stripes vary along the vertical axis."""
    y, x = np.meshgrid(np.arange(res), np.arange(res), indexing="ij")
    if orientation == "horizontal":
        t = y
    elif orientation == "vertical":
        t = x
    elif orientation == "diagonal":
        t = x + y
    else:
        raise ConfigError(f"unknown stripe orientation {orientation!r}")
    return np.where((t + phase) % period < period // 2, 1.0, -1.0).astype(np.float32)


def gabor_texture(res, rng):
    """Sum of a few windowed oriented sinusoids, normalized into [-1, 1]."""
    y, x = np.meshgrid(np.arange(res, dtype=np.float64),
                       np.arange(res, dtype=np.float64), indexing="ij")
    out = np.zeros((res, res))
    for _ in range(int(rng.integers(2, 5))):
        theta = rng.uniform(0, np.pi)
        freq = rng.uniform(4.0, res / 4.0) / res
        phase = rng.uniform(0, 2 * np.pi)
        cy, cx = rng.uniform(0, res, size=2)
        sigma = rng.uniform(res / 8.0, res / 3.0)
        carrier = np.cos(2 * np.pi * freq * (x * np.cos(theta) + y * np.sin(theta))
                         + phase)
        window = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * sigma * sigma))
        out += rng.uniform(0.5, 1.0) * carrier * window
    peak = np.abs(out).max()
    if peak > 0:
        out = out / peak * 0.95
    return out.astype(np.float32)


_FAMILIES = ("checkerboard", "stripes", "gabor", "texture")

# Synthetic images carry seeded grain so their spectra are dense like natural
# photographs; pure lattice patterns leave most radial bins empty, which makes
# real-normalized gap metrics ill-conditioned.
_GRAIN = 0.15


def _synth_one(family, res, rng):
    if family == "checkerboard":
        period = int(rng.choice([2, 4, 8]))
        phase = tuple(int(v) for v in rng.integers(0, period, size=2))
        plane = checkerboard(res, period, phase)
        img = np.stack([plane] * 3)
    elif family == "stripes":
        orientation = str(rng.choice(["horizontal", "vertical", "diagonal"]))
        period = int(rng.choice([2, 4, 8, 16]))
        phase = int(rng.integers(0, period))
        plane = stripes(res, period, orientation, phase)
        img = np.stack([plane] * 3)
    elif family == "gabor":
        img = np.stack([gabor_texture(res, rng) for _ in range(3)])
    else:
        raise ConfigError(f"unknown synthetic family {family!r}")
    grain = rng.uniform(-1.0, 1.0, size=img.shape).astype(np.float32)
    return (1.0 - _GRAIN) * img + _GRAIN * grain


def synth_dataset(descriptor):
    """Deterministic synthetic image set [count, 3, R, R] in [-1, 1]."""
    if descriptor.kind != "synthetic":
        raise ConfigError(f"synth_dataset needs a synthetic descriptor, "
                          f"got {descriptor.kind!r}")
    if descriptor.count < 1:
        raise ConfigError("dataset count must be >= 1")
    fam = descriptor.family
    if fam not in _FAMILIES:
        raise ConfigError(f"unknown synthetic family {fam!r}")
    rng = np.random.default_rng(descriptor.seed)
    rot = ("checkerboard", "stripes", "gabor")
    out = np.empty((descriptor.count, 3, descriptor.resolution, descriptor.resolution),
                   dtype=np.float32)
    for i in range(descriptor.count):
        f = rot[i % 3] if fam == "texture" else fam
        out[i] = _synth_one(f, descriptor.resolution, rng)
    return out


def load_dataset(descriptor):
    """Materialize any descriptor kind into [count, 3, R, R] float32."""
    if descriptor.kind == "synthetic":
        return synth_dataset(descriptor)
    if descriptor.kind == "single_image":
        img = load_png(descriptor.path)
        _check_res(img, descriptor)
        return img[None]
    if descriptor.kind == "directory":
        paths = sorted(p for p in os.listdir(descriptor.path) if p.endswith(".png"))
        if not paths:
            raise ConfigError(f"no PNGs under {descriptor.path}")
        imgs = [load_png(os.path.join(descriptor.path, p)) for p in paths]
        for img in imgs:
            _check_res(img, descriptor)
        return np.stack(imgs)
    raise ConfigError(f"unknown dataset kind {descriptor.kind!r}")


def _check_res(img, descriptor):
    if img.shape[1] != descriptor.resolution or img.shape[2] != descriptor.resolution:
        raise ConfigError(f"dataset image is {img.shape[1]}x{img.shape[2]}, "
                          f"config expects {descriptor.resolution}")


# ---------------------------------------------------------------------------
# checkpoint container

CHECKPOINT_MAGIC = b"SWGK"
CHECKPOINT_VERSION = 1
_MAX_DIM = 2 ** 31


def save_checkpoint(path, config_text, tensors):
    """Serialize named float32 tensors plus a config snapshot; atomic write."""
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION)]
    cfg = config_text.encode("utf-8")
    parts.append(struct.pack("<I", len(cfg)))
    parts.append(cfg)
    parts.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        data = np.asarray(arr, dtype="<f4")
        if data.ndim and not data.flags.c_contiguous:
            data = np.ascontiguousarray(data)
        nb = name.encode("utf-8")
        parts.append(struct.pack("<I", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<I", data.ndim))
        parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(data.tobytes())
    _atomic_write(path, b"".join(parts))


class _Reader:
    def __init__(self, blob, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n, what):
        if self.pos + n > len(self.blob):
            raise FormatError(f"{self.path}: truncated reading {what} "
                              f"at byte {self.pos}")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]


def load_checkpoint(path):
    """Read a checkpoint back as (config_text, dict name -> float32 array)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob, path)
    if r.take(4, "magic") != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic at byte 0")
    version = r.u32("version")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unknown checkpoint version {version}")
    cfg = r.take(r.u32("config length"), "config").decode("utf-8")
    count = r.u32("tensor count")
    tensors = {}
    for _ in range(count):
        name = r.take(r.u32("name length"), "name").decode("utf-8")
        ndim = r.u32("ndim")
        if ndim > 8:
            raise FormatError(f"{path}: implausible ndim {ndim} at byte {r.pos - 4}")
        dims = struct.unpack(f"<{ndim}I", r.take(4 * ndim, "dims"))
        total = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        if total >= _MAX_DIM or any(d >= _MAX_DIM for d in dims):
            raise FormatError(f"{path}: dimension overflow at byte {r.pos}")
        payload = r.take(4 * total, f"payload of {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    return cfg, tensors


def _atomic_write(path, data):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# diagnostics: per-block band dumps


def bicubic_resize(plane, out_hw):
    """Keys bicubic (a = -0.5) resampling of a 2-D array; diagnostics only."""

    def kernel(t):
        t = np.abs(t)
        return np.where(t <= 1, 1.5 * t ** 3 - 2.5 * t ** 2 + 1,
                        np.where(t < 2, -0.5 * t ** 3 + 2.5 * t ** 2 - 4 * t + 2, 0))

    def along(d, axis, out_len):
        in_len = d.shape[axis]
        coord = (np.arange(out_len) + 0.5) * in_len / out_len - 0.5
        base = np.floor(coord).astype(int)
        acc = np.zeros(d.shape[:axis] + (out_len,) + d.shape[axis + 1:], d.dtype)
        for tap in range(-1, 3):
            idx = np.clip(base + tap, 0, in_len - 1)
            wgt = kernel(coord - (base + tap))
            sl = np.take(d, idx, axis=axis)
            shape = [1] * d.ndim
            shape[axis] = -1
            acc += sl * wgt.reshape(shape)
        return acc

    return along(along(np.asarray(plane, np.float64), 0, out_hw[0]), 1, out_hw[1])


def dump_intermediates(params, spec, seed, out_dir):
    """Write one normalized PNG per (block, band) of a generator's skip
    decompositions, upscaled to the output resolution with bicubic
    interpolation; per-file (min, max) sidecars allow exact readback."""
    from . import nn  # local import keeps module load order flexible
    from .tensor import Tensor

    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    z = Tensor(rng.standard_normal((1, spec.latent_dim)).astype(np.float32))
    _, decomps = nn.generator_forward(params, spec, z, psi=1.0,
                                      capture_intermediates=True)
    res = spec.resolution
    written = []
    for bi, dec in enumerate(decomps):
        for band in ("LL", "LH", "HL", "HH"):
            plane = dec.band(band).data[0].mean(axis=0)  # average over color
            big = bicubic_resize(plane, (res, res))
            stem = os.path.join(out_dir, f"block{bi}_{band}.png")
            lo, hi = save_normalized_png(stem, big)
            write_minmax_sidecar(f"{stem[:-4]}.minmax.txt", [(lo, hi)])
            written.append(stem)
    return written
