"""RGB -> HSV -> chroma-vector transforms.

The hue/saturation/value convention here is the opponent-axis one: V is the
channel mean, S = 1 - min/V, and H is the two-argument arctangent of
(sqrt(3)*(G - B), (R - G) + (R - B)), giving H in (-pi, pi]. The chroma
vector (x1, x2, x3) = (S*V*cos H, S*V*sin H, V) removes the hue angle's
wrap-around discontinuity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .raster import ChromaImage, RgbImage

_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class HsvPixel:
    h: float  # radians in (-pi, pi]
    s: float  # [0, 1]
    v: float  # [0, 1]


@dataclass(frozen=True)
class ChromaVector:
    x1: float
    x2: float
    x3: float


def rgb_to_hsv(r: float, g: float, b: float) -> HsvPixel:
    """Convert one RGB triple (channels in [0, 1]) to HSV.

    Degenerate cases: V = 0 gives S = 0 and H = 0; a zero hue numerator and
    denominator give H = 0.
    """
    for name, value in (("red", r), ("green", g), ("blue", b)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} channel out of range [0, 1]: {value!r}")
    v = (r + g + b) / 3.0
    if v == 0.0:
        return HsvPixel(0.0, 0.0, 0.0)
    # min == max means min/V is exactly 1 mathematically; compute S through
    # that identity so gray pixels collapse to S = 0 without rounding residue
    s = 0.0 if r == g == b else 1.0 - min(r, g, b) / v
    num = _SQRT3 * (g - b)
    den = (r - g) + (r - b)
    h = 0.0 if num == 0.0 and den == 0.0 else math.atan2(num, den)
    return HsvPixel(h, s, v)


def hsv_to_chroma(pixel: HsvPixel) -> ChromaVector:
    sv = pixel.s * pixel.v
    return ChromaVector(sv * math.cos(pixel.h), sv * math.sin(pixel.h), pixel.v)


def transform_image(img: RgbImage) -> ChromaImage:
    """Apply rgb_to_hsv then hsv_to_chroma to every pixel of an image."""
    img.validate_range()
    r = img.pixels[:, :, 0]
    g = img.pixels[:, :, 1]
    b = img.pixels[:, :, 2]
    v = (r + g + b) / 3.0
    s = np.where(v > 0.0, 1.0 - np.min(img.pixels, axis=2) / np.where(v > 0.0, v, 1.0), 0.0)
    s[(r == g) & (g == b)] = 0.0  # same gray-collapse convention as the scalar path
    num = _SQRT3 * (g - b)
    den = (r - g) + (r - b)
    h = np.arctan2(num, den)
    h[(num == 0.0) & (den == 0.0)] = 0.0
    sv = s * v
    planes = np.stack([sv * np.cos(h), sv * np.sin(h), v])
    return ChromaImage(planes)
