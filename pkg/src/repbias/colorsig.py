"""Hue-based color signatures: RGB -> HSV, hue histogram, EMD signature.

Hue is stored on the halved 0..179 integer scale (8-bit HSV convention);
achromatic pixels carry h = 0, so fully gray images put all mass in bin 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import ImageRecord

HUE_BINS = 180


class EmptySignatureError(ValueError):
    pass


@dataclass
class HsvImage:
    """Per-pixel hue in [0,180), saturation and value in [0,255], uint8."""

    h: np.ndarray
    s: np.ndarray
    v: np.ndarray


@dataclass
class HueHistogram:
    """180 non-negative counts; bin b counts pixels with hue b."""

    bins: np.ndarray

    def total(self) -> float:
        return float(self.bins.sum())


@dataclass
class ColorSignature:
    """Sparse (weight, position) form of a histogram, positions ascending.

    Weights are normalized to unit mass; positions are real-valued bin
    indices (integers for hue signatures, arbitrary reals in general).
    """

    weights: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.positions = np.asarray(self.positions, dtype=np.float64)

    def __len__(self) -> int:
        return int(self.weights.shape[0])

    @property
    def entries(self) -> list[tuple[float, float]]:
        return list(zip(self.weights.tolist(), self.positions.tolist()))


def _round_half_up(x: np.ndarray) -> np.ndarray:
    # np.rint rounds halves to even; file-format determinism wants half-up
    return np.floor(x + 0.5)


def rgb_to_hsv_arrays(r: np.ndarray, g: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized conversion of float arrays in [0,1] to (h, s, v) arrays.

    h is in degrees-halved [0,180) before rounding; s, v scaled to [0,255].
    Returns float arrays; callers round and cast.
    """
    v = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    delta = v - mn
    safe_delta = np.where(delta == 0.0, 1.0, delta)
    h_deg = np.select(
        [delta == 0.0, v == r, v == g, v == b],
        [
            np.zeros_like(v),
            60.0 * (((g - b) / safe_delta) % 6.0),
            60.0 * ((b - r) / safe_delta + 2.0),
            60.0 * ((r - g) / safe_delta + 4.0),
        ],
    )
    safe_v = np.where(v == 0.0, 1.0, v)
    s = np.where(v == 0.0, 0.0, delta / safe_v)
    return h_deg / 2.0, s * 255.0, v * 255.0


def rgb_to_hsv(img: ImageRecord) -> HsvImage:
    """HSV form of one image; total function, rounds to nearest then clamps."""
    rgb = img.pixels.astype(np.float64) / 255.0
    h, s, v = rgb_to_hsv_arrays(rgb[0], rgb[1], rgb[2])
    h8 = np.clip(_round_half_up(h), 0, HUE_BINS - 1).astype(np.uint8)
    s8 = np.clip(_round_half_up(s), 0, 255).astype(np.uint8)
    v8 = np.clip(_round_half_up(v), 0, 255).astype(np.uint8)
    return HsvImage(h8, s8, v8)


def hue_histogram(img: HsvImage) -> HueHistogram:
    counts = np.bincount(img.h.ravel(), minlength=HUE_BINS).astype(np.float64)
    return HueHistogram(counts)


def to_signature(hist: HueHistogram) -> ColorSignature:
    """Nonzero bins as (count/total, bin) pairs, ascending bin index."""
    total = hist.bins.sum()
    if total <= 0:
        raise EmptySignatureError("histogram has no mass")
    nz = np.nonzero(hist.bins > 0)[0]
    return ColorSignature(hist.bins[nz] / total, nz.astype(np.float64))


def image_signature(img: ImageRecord) -> ColorSignature:
    """Full pipeline for one image: HSV, hue histogram, unit-mass signature."""
    return to_signature(hue_histogram(rgb_to_hsv(img)))
