"""Deterministic pixel-space distortions applied to whole datasets.

Every random quantity is drawn from a splitmix64 stream keyed by
(seed, image_index), so a distorted dataset is a reproducible artifact:
same seed, same bytes, on any platform. Stages work on integer pixels with
half-up rounding after each step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .colorsig import HUE_BINS, rgb_to_hsv_arrays, _round_half_up
from .corpus import Dataset, ImageRecord

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

DISTORTION_KINDS = ("color", "flip", "gray", "rotate")


class SplitMix64:
    """Portable 64-bit generator (splitmix) for reproducible factor draws."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self, lo: float, hi: float) -> float:
        u = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return lo + u * (hi - lo)


def keyed_stream(seed: int, image_index: int) -> SplitMix64:
    """Independent stream per (seed, image_index)."""
    g = SplitMix64(seed)
    outer = g.next_u64()
    return SplitMix64(outer ^ ((image_index * _GAMMA) & _MASK64))


@dataclass
class JitterParams:
    """Factor ranges around 1 for brightness/contrast/saturation and a hue
    shift range on the 0..179 scale; strengths follow the +-40% / +-18 unit
    contrastive-training convention and are fully configurable."""

    brightness: tuple[float, float] = (0.6, 1.4)
    contrast: tuple[float, float] = (0.6, 1.4)
    saturation: tuple[float, float] = (0.6, 1.4)
    hue_shift: tuple[float, float] = (-18.0, 18.0)
    seed: int = 0

    def __post_init__(self):
        for name in ("brightness", "contrast", "saturation"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValueError(f"{name} range must satisfy 0 < lo <= hi")
        lo, hi = self.hue_shift
        if not (-90 <= lo <= hi <= 90):
            raise ValueError("hue_shift must lie within +-90")

    def to_dict(self) -> dict:
        return {
            "brightness": list(self.brightness),
            "contrast": list(self.contrast),
            "saturation": list(self.saturation),
            "hue_shift": list(self.hue_shift),
            "seed": self.seed,
        }


@dataclass
class RotateParams:
    """Per-image rotation angle range in degrees, counterclockwise positive."""

    degrees: tuple[float, float] = (-15.0, 15.0)
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.degrees
        if not (-180 <= lo <= hi <= 180):
            raise ValueError("degrees must lie within +-180")

    def to_dict(self) -> dict:
        return {"degrees": list(self.degrees), "seed": self.seed}


def _clamp_round(x: np.ndarray) -> np.ndarray:
    return np.clip(_round_half_up(x), 0, 255).astype(np.uint8)


def hflip(img: ImageRecord) -> ImageRecord:
    return ImageRecord(img.label, np.ascontiguousarray(img.pixels[:, :, ::-1]))


def _gray_values(pixels: np.ndarray) -> np.ndarray:
    p = pixels.astype(np.float64)
    return _clamp_round(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])


def grayscale(img: ImageRecord) -> ImageRecord:
    y = _gray_values(img.pixels)
    return ImageRecord(img.label, np.stack([y, y, y]))


def _hsv_to_rgb_arrays(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Inverse of the HSV mapping: h in [0,180) halved degrees, s/v in [0,255]."""
    h_deg = (h * 2.0) % 360.0
    sn = s / 255.0
    vn = v / 255.0
    c = vn * sn
    x = c * (1.0 - np.abs((h_deg / 60.0) % 2.0 - 1.0))
    zero = np.zeros_like(c)
    sextant = np.floor(h_deg / 60.0).astype(np.int64) % 6
    r1 = np.choose(sextant, [c, x, zero, zero, x, c])
    g1 = np.choose(sextant, [x, c, c, x, zero, zero])
    b1 = np.choose(sextant, [zero, zero, x, c, c, x])
    m = vn - c
    return np.stack([r1 + m, g1 + m, b1 + m]) * 255.0


def _shift_hue(pixels: np.ndarray, delta: float) -> np.ndarray:
    rgb = pixels.astype(np.float64) / 255.0
    h, s, v = rgb_to_hsv_arrays(rgb[0], rgb[1], rgb[2])
    h = (h + delta) % HUE_BINS
    return _clamp_round(_hsv_to_rgb_arrays(h, s, v))


def color_jitter(img: ImageRecord, p: JitterParams, image_index: int) -> ImageRecord:
    """Brightness, contrast, saturation, then hue shift, factors drawn from
    the keyed stream; bit-reproducible for a fixed (seed, image_index)."""
    gen = keyed_stream(p.seed, image_index)
    f_b = gen.uniform(*p.brightness)
    f_c = gen.uniform(*p.contrast)
    f_s = gen.uniform(*p.saturation)
    delta = gen.uniform(*p.hue_shift)

    px = img.pixels
    px = _clamp_round(px.astype(np.float64) * f_b)
    mean_gray = float(np.mean(_gray_values(px)))
    px = _clamp_round((px.astype(np.float64) - mean_gray) * f_c + mean_gray)
    y = _gray_values(px).astype(np.float64)
    px = _clamp_round(y + (px.astype(np.float64) - y) * f_s)
    px = _shift_hue(px, delta)
    return ImageRecord(img.label, px)


def rotate(img: ImageRecord, degrees: float) -> ImageRecord:
    """Nearest-neighbor rotation about the image center, counterclockwise
    for positive angles; pixels mapped from outside the frame become black."""
    if abs(degrees) > 180:
        raise ValueError(f"|degrees| must be <= 180, got {degrees}")
    side = img.pixels.shape[1]
    center = (side - 1) / 2.0
    rad = np.deg2rad(degrees)
    cos_t, sin_t = np.cos(rad), np.sin(rad)
    ys, xs = np.mgrid[0:side, 0:side]
    dx = xs - center
    dy = ys - center
    src_x = _round_half_up(cos_t * dx - sin_t * dy + center).astype(np.int64)
    src_y = _round_half_up(sin_t * dx + cos_t * dy + center).astype(np.int64)
    inside = (src_x >= 0) & (src_x < side) & (src_y >= 0) & (src_y < side)
    out = np.zeros_like(img.pixels)
    sy = np.clip(src_y, 0, side - 1)
    sx = np.clip(src_x, 0, side - 1)
    for ch in range(3):
        out[ch] = np.where(inside, img.pixels[ch][sy, sx], 0)
    return ImageRecord(img.label, out)


def distort_dataset(
    ds: Dataset,
    kind: str,
    params: JitterParams | RotateParams | None = None,
    seed: int = 0,
) -> Dataset:
    """Apply one distortion to every record; labels and ordering preserved.

    For "color" and "rotate" the per-image randomness is keyed by
    (params.seed, index); a params object overrides the bare seed argument.
    """
    if kind not in DISTORTION_KINDS:
        raise ValueError(f"unknown distortion kind {kind!r}, want one of {DISTORTION_KINDS}")
    if kind == "color":
        jp = params if isinstance(params, JitterParams) else JitterParams(seed=seed)
        records = [color_jitter(rec, jp, i) for i, rec in enumerate(ds.records)]
    elif kind == "flip":
        records = [hflip(rec) for rec in ds.records]
    elif kind == "gray":
        records = [grayscale(rec) for rec in ds.records]
    else:
        rp = params if isinstance(params, RotateParams) else RotateParams(seed=seed)
        records = []
        for i, rec in enumerate(ds.records):
            angle = keyed_stream(rp.seed, i).uniform(*rp.degrees)
            records.append(rotate(rec, angle))
    return Dataset(records, split_name=f"{ds.split_name}+{kind}" if ds.split_name else kind)


def sidecar_metadata(kind: str, params: JitterParams | RotateParams | None, seed: int) -> dict:
    """JSON-ready provenance for an emitted distorted dataset."""
    meta: dict = {"kind": kind, "seed": seed, "generator": "splitmix64"}
    if isinstance(params, (JitterParams, RotateParams)):
        meta["params"] = params.to_dict()
        meta["seed"] = params.seed
    elif kind == "color":
        meta["params"] = JitterParams(seed=seed).to_dict()
    elif kind == "rotate":
        meta["params"] = RotateParams(seed=seed).to_dict()
    else:
        meta["params"] = {}
    return meta
