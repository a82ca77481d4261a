"""Synthetic dataset generation, normalization, tensor container, PNG export.

Scenes are procedural composites (band-correlated Gaussian blobs, a linear
gradient, sharp-edged rectangles with optional checkerboard fill) clipped to
[0, 1]; the shared spatial layouts with per-band mixing coefficients give the
bands realistic correlation while keeping hard edges.  Reduced-resolution
training pairs follow the Wald protocol: the scene is the ground truth, the
low-resolution input is a Gaussian blur followed by 4x4 block averaging, and
the panchromatic input is the uniform band mean.

On-disk format (PKTN, little-endian):
    magic b"PKTN" | version u8 (=1) | entry count u32
    per entry: name length u16 | UTF-8 name | rank u8 | dims u32 each
               | payload float32 row-major
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, PktnError, ShapeError, ValidationError

MAGIC = b"PKTN"
VERSION = 1
DN_MAX = 2047.0
SCALE = 4


# ---------------------------------------------------------------------------
# PKTN container

def pktn_write(path, entries) -> None:
    """Write named float arrays; entries is a sequence of (name, array)."""
    seen = set()
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<B", VERSION)
    blob += struct.pack("<I", len(entries))
    for name, arr in entries:
        if name in seen:
            raise PktnError(f"duplicate entry name {name!r}")
        seen.add(name)
        arr = np.asarray(arr)
        if arr.ndim > 4:
            raise ShapeError(f"entry {name!r} has rank {arr.ndim} > 4")
        enc = name.encode("utf-8")
        blob += struct.pack("<H", len(enc))
        blob += enc
        blob += struct.pack("<B", arr.ndim)
        for d in arr.shape:
            blob += struct.pack("<I", d)
        blob += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(blob))


def pktn_read(path):
    """Read a container back as a list of (name, float32 array)."""
    raw = Path(path).read_bytes()
    off = 0

    def take(n, what):
        nonlocal off
        if off + n > len(raw):
            raise PktnError(f"truncated while reading {what}", offset=off)
        chunk = raw[off:off + n]
        off += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise PktnError("bad magic, expected b'PKTN'", offset=0)
    version = take(1, "version")[0]
    if version != VERSION:
        raise PktnError(f"unsupported version {version}", offset=4)
    (count,) = struct.unpack("<I", take(4, "entry count"))
    entries = []
    names = set()
    for i in range(count):
        name_off = off
        (nlen,) = struct.unpack("<H", take(2, "name length"))
        name = take(nlen, "name").decode("utf-8")
        if name in names:
            raise PktnError(f"duplicate entry name {name!r}", offset=name_off)
        names.add(name)
        rank = take(1, "rank")[0]
        dims = [struct.unpack("<I", take(4, "dims"))[0] for _ in range(rank)]
        n = int(np.prod(dims)) if dims else 1
        payload = take(4 * n, f"payload of {name!r}")
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
        entries.append((name, arr))
    if off != len(raw):
        raise PktnError(f"{len(raw) - off} trailing bytes", offset=off)
    return entries


# ---------------------------------------------------------------------------
# normalization

def normalize(raw: np.ndarray) -> np.ndarray:
    """Map digital numbers in [0, 2047] onto [0, 1]."""
    raw = np.asarray(raw, dtype=np.float64)
    bad = (raw < 0.0) | (raw > DN_MAX)
    if bad.any():
        raise ValidationError(
            f"{int(bad.sum())} values outside [0, {DN_MAX:.0f}]: "
            f"min={raw.min()!r}, max={raw.max()!r}")
    return raw / DN_MAX


def denormalize(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.float64) * DN_MAX


# ---------------------------------------------------------------------------
# scene synthesis and Wald degradation

def synth_scene(seed: int, C: int, H: int, W: int) -> np.ndarray:
    """Deterministic synthetic scene [C,H,W] with values in [0, 1].

    A single latent intensity field (Gaussian blobs, sharp-edged rectangles
    with optional checkerboard fill, and a linear ramp) drives every band
    through band-specific value curves that additionally switch between two
    "material" parameter sets on sharp region masks.  The per-band curve
    deviations cancel across bands, so the band mean reproduces the latent
    field exactly: the panchromatic view carries the geometry while each
    band needs its own location-dependent nonlinear remapping.
    """
    if C < 1:
        raise ConfigError("need at least one band")
    if H % SCALE or W % SCALE or H < SCALE or W < SCALE:
        raise ConfigError(f"scene dims must be positive multiples of {SCALE}")
    rng = np.random.default_rng(np.random.SeedSequence([0x5CE, seed]))
    yy, xx = np.mgrid[0:H, 0:W].astype(np.float64)

    blobs = np.zeros((H, W))
    for _ in range(rng.integers(4, 9)):
        cy, cx = rng.uniform(0, H), rng.uniform(0, W)
        sig = rng.uniform(0.05, 0.25) * min(H, W)
        amp = rng.uniform(0.3, 1.0)
        blobs += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sig * sig))

    rects = np.zeros((H, W))
    for _ in range(rng.integers(5, 10)):
        h = int(rng.integers(H // 8, H // 2))
        w = int(rng.integers(W // 8, W // 2))
        y0 = int(rng.integers(0, H - h))
        x0 = int(rng.integers(0, W - w))
        level = rng.uniform(0.2, 1.0)
        patch = np.full((h, w), level)
        if rng.random() < 0.4:  # checkerboard fill for extra sharp texture
            cell = int(rng.integers(2, 7))
            cb = ((yy[y0:y0 + h, x0:x0 + w] // cell
                   + xx[y0:y0 + h, x0:x0 + w] // cell) % 2)
            patch = level * (0.4 + 0.6 * cb)
        rects[y0:y0 + h, x0:x0 + w] = patch

    ang = rng.uniform(0, 2 * np.pi)
    ramp = (np.cos(ang) * xx / W + np.sin(ang) * yy / H)
    ramp = (ramp - ramp.min()) / max(ramp.max() - ramp.min(), 1e-12)

    a, b, g = rng.uniform(0.4, 1.0, 3)
    latent = a * blobs + b * rects + g * ramp
    lo, hi = latent.min(), latent.max()
    latent = 0.1 + 0.8 * (latent - lo) / max(hi - lo, 1e-12)

    material = np.zeros((H, W), dtype=bool)
    for _ in range(rng.integers(2, 5)):
        h = int(rng.integers(H // 6, H // 2))
        w = int(rng.integers(W // 6, W // 2))
        y0 = int(rng.integers(0, H - h))
        x0 = int(rng.integers(0, W - w))
        material[y0:y0 + h, x0:x0 + w] = True

    # band curves f[c,m](t) = t + A sin(2 pi q t + phi), deviations centered
    # across bands per material so that mean_c f[c,m] is the identity; the
    # second material perturbs the first's parameters rather than redrawing
    # them, keeping inter-band structure consistent across region boundaries
    amp_ = np.empty((C, 2))
    freq = np.empty((C, 2))
    phase = np.empty((C, 2))
    amp_[:, 0] = rng.uniform(0.05, 0.12, C)
    freq[:, 0] = rng.uniform(0.5, 1.0, C)
    phase[:, 0] = rng.uniform(0, 2 * np.pi, C)
    amp_[:, 1] = amp_[:, 0] * rng.uniform(0.6, 1.4, C)
    freq[:, 1] = freq[:, 0]
    phase[:, 1] = phase[:, 0] + rng.uniform(-0.7, 0.7, C)
    scene = np.empty((C, H, W))
    for m in (0, 1):
        mask = material if m else ~material
        t = latent[mask]
        dev = np.stack([amp_[c, m] * np.sin(2 * np.pi * freq[c, m] * t
                                            + phase[c, m])
                        for c in range(C)])
        dev -= dev.mean(axis=0, keepdims=True)
        for c in range(C):
            scene[c, mask] = t + dev[c]
    return np.clip(scene, 0.0, 1.0)


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = int(round(4.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur of [..., H, W] with reflect padding."""
    k = gaussian_kernel1d(sigma)
    r = len(k) // 2
    # rows
    p = np.pad(img, [(0, 0)] * (img.ndim - 2) + [(r, r), (0, 0)], mode="reflect")
    out = np.zeros_like(img)
    for i, kv in enumerate(k):
        out += kv * p[..., i:i + img.shape[-2], :]
    # cols
    p = np.pad(out, [(0, 0)] * (img.ndim - 2) + [(0, 0), (r, r)], mode="reflect")
    out2 = np.zeros_like(img)
    for i, kv in enumerate(k):
        out2 += kv * p[..., :, i:i + img.shape[-1]]
    return out2


def box_downsample(img: np.ndarray, factor: int) -> np.ndarray:
    """Non-overlapping block mean over the trailing two axes."""
    *lead, H, W = img.shape
    if H % factor or W % factor:
        raise ShapeError(
            f"spatial dims {H}x{W} not divisible by factor {factor}")
    return img.reshape(*lead, H // factor, factor, W // factor, factor).mean(
        axis=(-3, -1))


def wald_degrade(gt: np.ndarray, blur_sigma: float = 1.0):
    """Reduced-resolution observation pair (lr_ms, pan) from a ground truth.

    lr_ms = 4x4 block mean of the Gaussian-blurred scene; pan = uniform band
    mean.  Both clipped to [0, 1].
    """
    gt = np.asarray(gt, dtype=np.float64)
    if gt.ndim != 3:
        raise ShapeError(f"ground truth must be [C,H,W], got {gt.shape}")
    C, H, W = gt.shape
    if H % SCALE or W % SCALE:
        raise ShapeError(
            f"ground truth dims {H}x{W} not divisible by {SCALE}")
    if blur_sigma <= 0:
        raise ConfigError("blur_sigma must be positive")
    lr = box_downsample(gaussian_blur(gt, blur_sigma), SCALE)
    pan = gt.mean(axis=0, keepdims=True)
    return np.clip(lr, 0.0, 1.0), np.clip(pan, 0.0, 1.0)


@dataclass
class SamplePair:
    """One training sample: inputs at reduced resolution plus ground truth."""

    lr_ms: np.ndarray  # [C, h, w]
    pan: np.ndarray    # [1, 4h, 4w]
    gt: np.ndarray     # [C, 4h, 4w]

    def validate(self, tol: float = 1e-6) -> None:
        C, h, w = self.lr_ms.shape
        if self.gt.shape != (C, SCALE * h, SCALE * w):
            raise ShapeError(
                f"gt shape {self.gt.shape} inconsistent with lr_ms {self.lr_ms.shape}")
        if self.pan.shape != (1, SCALE * h, SCALE * w):
            raise ShapeError(f"pan shape {self.pan.shape} must be (1, {4*h}, {4*w})")
        for name, a in (("lr_ms", self.lr_ms), ("pan", self.pan), ("gt", self.gt)):
            if a.min() < -1e-6 or a.max() > 1.0 + 1e-6:
                raise ValidationError(f"{name} values outside [0, 1]")
        lr, pan = wald_degrade(np.asarray(self.gt, dtype=np.float64))
        if (np.abs(lr - self.lr_ms).max() > tol
                or np.abs(pan - self.pan).max() > tol):
            raise ValidationError(
                "stored pair is not a Wald degradation of its ground truth")


# ---------------------------------------------------------------------------
# dataset directory layout

@dataclass
class DatasetManifest:
    root: Path
    bands: int
    seed: int
    entries: list  # of (split, sample_id, relpath)

    def paths(self, split: str):
        return [(sid, self.root / rel) for sp, sid, rel in self.entries
                if sp == split]

    def counts(self):
        out = {}
        for sp, _, _ in self.entries:
            out[sp] = out.get(sp, 0) + 1
        return out


def split_counts(count: int):
    """Deterministic train/val/test sizes: an eighth each to val and test."""
    if count < 3:
        raise ConfigError("need at least 3 scenes for train/val/test splits")
    n_val = max(1, count // 8)
    n_test = max(1, count // 8)
    return count - n_val - n_test, n_val, n_test


def make_dataset(out_dir, seed: int, count: int, bands: int,
                 height: int = 64, width: int = 64) -> DatasetManifest:
    """Generate `count` scenes, degrade them, and write the dataset layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_train, n_val, n_test = split_counts(count)
    entries = []
    lines = [f"# bands={bands} seed={seed} count={count}\n"]
    for i in range(count):
        split = ("train" if i < n_train
                 else "val" if i < n_train + n_val else "test")
        sid = f"s{i:04d}"
        gt = synth_scene(seed * 100003 + i, bands, height, width)
        lr, pan = wald_degrade(gt)
        rel = f"{sid}.pktn"
        pktn_write(out / rel, [("lr_ms", lr), ("pan", pan), ("gt", gt)])
        entries.append((split, sid, rel))
        lines.append(f"{split}\t{sid}\t{rel}\n")
    (out / "manifest.txt").write_text("".join(lines), encoding="utf-8")
    return DatasetManifest(out, bands, seed, entries)


def read_manifest(root) -> DatasetManifest:
    root = Path(root)
    path = root / "manifest.txt"
    if not path.is_file():
        raise ConfigError(f"no manifest.txt under {root}")
    bands = seed = 0
    entries = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            for item in line[1:].split():
                key, _, val = item.partition("=")
                if key == "bands":
                    bands = int(val)
                elif key == "seed":
                    seed = int(val)
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValidationError(f"malformed manifest line: {line!r}")
        split, sid, rel = parts
        if not (root / rel).is_file():
            raise ValidationError(f"manifest lists missing file {rel!r}")
        entries.append((split, sid, rel))
    return DatasetManifest(root, bands, seed, entries)


def load_pair(path) -> SamplePair:
    found = dict(pktn_read(path))
    missing = {"lr_ms", "pan", "gt"} - set(found)
    if missing:
        raise ValidationError(f"{path} misses entries {sorted(missing)}")
    return SamplePair(lr_ms=np.asarray(found["lr_ms"], dtype=np.float64),
                      pan=np.asarray(found["pan"], dtype=np.float64),
                      gt=np.asarray(found["gt"], dtype=np.float64))


# ---------------------------------------------------------------------------
# PNG export

def _stretch(band: np.ndarray) -> np.ndarray:
    lo, hi = float(band.min()), float(band.max())
    if hi - lo < 1e-12:
        return np.full(band.shape, 128, dtype=np.uint8)  # flat -> mid-gray
    return np.rint((band - lo) / (hi - lo) * 255.0).astype(np.uint8)


def export_png(x: np.ndarray, band_triplet, path) -> None:
    """8-bit RGB composite of three bands, each min-max stretched."""
    from PIL import Image

    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeError(f"export_png expects [C,H,W], got {x.shape}")
    C = x.shape[0]
    for b in band_triplet:
        if not (0 <= b < C):
            raise ConfigError(f"band index {b} out of range for {C} bands")
    rgb = np.stack([_stretch(x[b]) for b in band_triplet], axis=-1)
    Image.fromarray(rgb, mode="RGB").save(path)


def export_residual_png(residual: np.ndarray, path) -> None:
    """Signed residual map: blue (negative) - white (zero) - red (positive)."""
    from PIL import Image

    r = np.asarray(residual, dtype=np.float64)
    if r.ndim != 2:
        raise ShapeError(f"residual map must be [H,W], got {r.shape}")
    s = float(np.abs(r).max())
    rn = r / s if s > 0 else np.zeros_like(r)
    up = np.clip(rn, 0.0, 1.0)
    dn = np.clip(-rn, 0.0, 1.0)
    rgb = np.stack([
        np.rint((1.0 - dn) * 255.0),
        np.rint((1.0 - np.maximum(up, dn)) * 255.0),
        np.rint((1.0 - up) * 255.0),
    ], axis=-1).astype(np.uint8)
    Image.fromarray(rgb, mode="RGB").save(path)
