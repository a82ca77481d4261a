"""Reduced- and full-resolution pansharpening quality metrics.

Frozen conventions, applied everywhere:

* Q / Q2n statistics use non-overlapping 32x32 blocks (one block covering
  the whole image when it is smaller than the block); population moments.
* Q2n pads the band axis with zero bands to the next power of two (max 8)
  and combines block means, variances and the hypercomplex covariance with
  the scalar-Q formula using moduli; the one-band case degenerates to the
  scalar Q index with its covariance sign preserved.
* The spectral/spatial distortion indices use exponent 1; the spatial index
  degrades PAN with the same Gaussian blur + 4x block mean used by the data
  pipeline.
* PSNR uses peak 1.0 and caps at 100 dB once the MSE drops below peak^2 *
  1e-10; SAM is reported in degrees with zero-norm pixels contributing 0.
* The hybrid no-reference score is the product (1-D_lambda)(1-D_s).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import box_downsample, gaussian_blur
from .errors import ConfigError, ShapeError, ValidationError

PSNR_CAP_DB = 100.0


def _check_same_shape(x, ref, opname):
    if x.shape != ref.shape:
        raise ShapeError(f"{opname}: shapes differ, {x.shape} vs {ref.shape}")


def psnr(x: np.ndarray, ref: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB over all elements."""
    _check_same_shape(x, ref, "psnr")
    if peak <= 0:
        raise ConfigError("peak must be positive")
    mse = float(np.mean((np.asarray(x, dtype=np.float64) - ref) ** 2))
    if mse < peak * peak * 1e-10:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(peak * peak / mse))


def sam(x: np.ndarray, ref: np.ndarray) -> float:
    """Mean spectral angle in degrees between per-pixel band vectors."""
    _check_same_shape(x, ref, "sam")
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] < 2:
        raise ShapeError("sam expects [C,H,W] with at least 2 bands")
    nx = np.sqrt(np.sum(x * x, axis=0))
    nr = np.sqrt(np.sum(ref * ref, axis=0))
    ok = (nx >= 1e-12) & (nr >= 1e-12)
    # chord form 2*arcsin(|u-v|/2): exact 0 for identical vectors, accurate
    # at small angles where arccos of a near-1 cosine loses precision
    u = np.where(ok, x / np.maximum(nx, 1e-300), 0.0)
    v = np.where(ok, ref / np.maximum(nr, 1e-300), 0.0)
    chord = np.sqrt(np.sum((u - v) ** 2, axis=0))
    angles = 2.0 * np.degrees(np.arcsin(np.clip(chord * 0.5, 0.0, 1.0)))
    return float(angles.mean())  # zero-norm pixels contribute 0


def ergas(x: np.ndarray, ref: np.ndarray, ratio: int = 4) -> float:
    """Relative dimensionless global error (band-mean-normalized RMSE)."""
    _check_same_shape(x, ref, "ergas")
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError("ergas expects [C,H,W]")
    acc = 0.0
    for c in range(x.shape[0]):
        mu = float(ref[c].mean())
        if abs(mu) < 1e-12:
            raise ValidationError(f"reference band {c} has zero mean")
        rmse2 = float(np.mean((x[c] - ref[c]) ** 2))
        acc += rmse2 / (mu * mu)
    return float(100.0 / ratio * np.sqrt(acc / x.shape[0]))


# ---------------------------------------------------------------------------
# scalar Q index

def _block_slices(H: int, W: int, block: int):
    if H < block or W < block:
        yield (slice(0, H), slice(0, W))  # single block covering the image
        return
    for by in range(H // block):
        for bx in range(W // block):
            yield (slice(by * block, (by + 1) * block),
                   slice(bx * block, (bx + 1) * block))


def _q_block(a: np.ndarray, b: np.ndarray) -> float:
    """Scalar Q on one block, population moments.

    Degenerate rules: variance term zero with nonzero means -> luminance
    factor only; both terms zero -> 1; means zero with nonzero variances ->
    correlation * contrast (keeps the sign of the covariance).
    """
    mu_a, mu_b = float(a.mean()), float(b.mean())
    va = float(np.mean(a * a)) - mu_a * mu_a
    vb = float(np.mean(b * b)) - mu_b * mu_b
    cov = float(np.mean(a * b)) - mu_a * mu_b
    sterm = va + vb
    mterm = mu_a * mu_a + mu_b * mu_b
    if sterm <= 0.0:
        if mterm == 0.0:
            return 1.0
        return 2.0 * mu_a * mu_b / mterm
    if mterm == 0.0:
        return 2.0 * cov / sterm
    return 4.0 * cov * mu_a * mu_b / (sterm * mterm)


def q_index(a: np.ndarray, b: np.ndarray, block: int = 32) -> float:
    """Universal image quality index averaged over non-overlapping blocks."""
    _check_same_shape(a, b, "q_index")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError("q_index expects single-band [H,W] images")
    vals = [_q_block(a[sl], b[sl]) for sl in _block_slices(*a.shape, block)]
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# hypercomplex Q2n

def _cd_conj(z: np.ndarray) -> np.ndarray:
    out = z.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def _cd_mult(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cayley-Dickson product on the trailing axis: (a,b)(c,d) = (ac - d*b, da + bc*)."""
    D = x.shape[-1]
    if D == 1:
        return x * y
    L = D // 2
    a, b = x[..., :L], x[..., L:]
    c, d = y[..., :L], y[..., L:]
    re = _cd_mult(a, c) - _cd_mult(_cd_conj(d), b)
    im = _cd_mult(d, a) + _cd_mult(b, _cd_conj(c))
    return np.concatenate([re, im], axis=-1)


def _q2n_block(za: np.ndarray, zb: np.ndarray) -> float:
    """Hypercomplex Q on one block; za, zb are [N, D] pixel spectra."""
    mu_a = za.mean(axis=0)
    mu_b = zb.mean(axis=0)
    na2 = float(mu_a @ mu_a)
    nb2 = float(mu_b @ mu_b)
    va = float(np.mean(np.sum(za * za, axis=1))) - na2
    vb = float(np.mean(np.sum(zb * zb, axis=1))) - nb2
    cov = (np.mean(_cd_mult(za, _cd_conj(zb)), axis=0)
           - _cd_mult(mu_a, _cd_conj(mu_b)))
    sterm = va + vb
    mterm = na2 + nb2
    if sterm <= 0.0:
        if mterm == 0.0:
            return 1.0
        return 2.0 * np.sqrt(na2 * nb2) / mterm
    return float(4.0 * np.linalg.norm(cov) * np.sqrt(na2) * np.sqrt(nb2)
                 / (sterm * mterm))


def q2n(x: np.ndarray, ref: np.ndarray, block: int = 32) -> float:
    """Hypercomplex multi-band quality index (Q4/Q8 family), block-averaged."""
    _check_same_shape(x, ref, "q2n")
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.ndim != 3:
        raise ShapeError("q2n expects [C,H,W]")
    C, H, W = x.shape
    if C > 8:
        raise ConfigError("q2n supports at most 8 bands")
    D = 1
    while D < C:
        D *= 2
    if D == 1:
        return q_index(x[0], ref[0], block)  # real algebra: keep the sign
    if D > C:
        pad = np.zeros((D - C, H, W))
        x = np.concatenate([x, pad], axis=0)
        ref = np.concatenate([ref, pad], axis=0)
    vals = []
    for sl in _block_slices(H, W, block):
        za = x[(slice(None),) + sl].reshape(D, -1).T
        zb = ref[(slice(None),) + sl].reshape(D, -1).T
        vals.append(_q2n_block(za, zb))
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# full-resolution (no-reference) indices

def d_lambda(fused: np.ndarray, ms: np.ndarray, p: int = 1) -> float:
    """Spectral distortion: change of the inter-band Q matrix under fusion."""
    fused = np.asarray(fused, dtype=np.float64)
    ms = np.asarray(ms, dtype=np.float64)
    C = fused.shape[0]
    if C < 2:
        raise ConfigError("d_lambda needs at least 2 bands")
    if ms.shape[0] != C:
        raise ShapeError(f"band counts differ: fused {C}, ms {ms.shape[0]}")
    acc = 0.0
    for i in range(C):
        for j in range(C):
            if i == j:
                continue
            qf = q_index(fused[i], fused[j])
            qm = q_index(ms[i], ms[j])
            acc += abs(qf - qm) ** p
    return float((acc / (C * (C - 1))) ** (1.0 / p))


def d_s(fused: np.ndarray, ms: np.ndarray, pan: np.ndarray,
        q: int = 1) -> float:
    """Spatial distortion: band-vs-PAN Q at full scale against reduced scale."""
    fused = np.asarray(fused, dtype=np.float64)
    ms = np.asarray(ms, dtype=np.float64)
    pan = np.asarray(pan, dtype=np.float64)
    if pan.ndim == 3:
        if pan.shape[0] != 1:
            raise ShapeError("pan must be single-band")
        pan = pan[0]
    C = fused.shape[0]
    if ms.shape[0] != C:
        raise ShapeError(f"band counts differ: fused {C}, ms {ms.shape[0]}")
    if fused.shape[1:] != pan.shape:
        raise ShapeError(
            f"fused spatial dims {fused.shape[1:]} must match pan {pan.shape}")
    if (fused.shape[1] != 4 * ms.shape[1]
            or fused.shape[2] != 4 * ms.shape[2]):
        raise ShapeError("fused/ms resolution ratio must be 4")
    pan_low = box_downsample(gaussian_blur(pan, 1.0), 4)
    acc = 0.0
    for i in range(C):
        acc += abs(q_index(fused[i], pan) - q_index(ms[i], pan_low)) ** q
    return float((acc / C) ** (1.0 / q))


def hqnr(d_lambda_value: float, d_s_value: float) -> float:
    """Hybrid quality-with-no-reference score (1-D_lambda)(1-D_s)."""
    for name, v in (("d_lambda", d_lambda_value), ("d_s", d_s_value)):
        if not (0.0 <= v <= 1.0):
            raise ValidationError(f"{name} must lie in [0, 1], got {v!r}")
    return (1.0 - d_lambda_value) * (1.0 - d_s_value)


# ---------------------------------------------------------------------------
# report container

@dataclass
class MetricReport:
    """Per-sample metric values plus mean/std aggregates."""

    resolution: str  # "reduced" | "full"
    per_sample: dict = field(default_factory=dict)  # sample_id -> {metric: value}

    def add(self, sample_id: str, values: dict) -> None:
        self.per_sample[sample_id] = dict(values)

    def metric_names(self):
        names = []
        for values in self.per_sample.values():
            for name in values:
                if name not in names:
                    names.append(name)
        return names

    def aggregate(self):
        out = {}
        for name in self.metric_names():
            vals = np.asarray([v[name] for v in self.per_sample.values()])
            out[name] = (float(vals.mean()), float(vals.std()))
        return out

    def format_lines(self):
        """UTF-8 report lines: sample_id<TAB>metric<TAB>value, then aggregates.

        Floats are written with shortest round-trip formatting.
        """
        lines = []
        for sid, values in self.per_sample.items():
            for name, v in values.items():
                lines.append(f"{sid}\t{name}\t{v!r}")
        for name, (mean, std) in self.aggregate().items():
            lines.append(f"aggregate\t{name}_mean\t{mean!r}")
            lines.append(f"aggregate\t{name}_std\t{std!r}")
        return lines
