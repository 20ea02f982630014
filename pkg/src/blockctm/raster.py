"""Raster image types and file codecs (PNG, binary PPM, PGM debug dumps)."""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

SEED_UNKNOWN = 0
SEED_FG = 1
SEED_BG = 2

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True)
class RgbImage:
    """Row-major RGB raster with channels as floats in [0, 1]."""

    pixels: np.ndarray  # (height, width, 3) float64

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"RGB pixel grid must have shape (H, W, 3), got {px.shape}")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def validate_range(self):
        """Raise if any channel value falls outside [0, 1], naming the pixel."""
        bad = ~((self.pixels >= 0.0) & (self.pixels <= 1.0))
        if bad.any():
            i, j, c = (int(v) for v in np.argwhere(bad)[0])
            name = "red green blue".split()[c]
            raise ValueError(
                f"{name} channel out of range [0, 1] at pixel ({i}, {j}): "
                f"{self.pixels[i, j, c]!r}"
            )


@dataclass(frozen=True)
class ChromaImage:
    """Three transformed color planes (x1, x2, x3), each the size of the source."""

    planes: np.ndarray  # (3, height, width) float64

    def __post_init__(self):
        pl = np.asarray(self.planes, dtype=np.float64)
        if pl.ndim != 3 or pl.shape[0] != 3:
            raise ValueError(f"chroma planes must have shape (3, H, W), got {pl.shape}")
        object.__setattr__(self, "planes", pl)

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def x1(self) -> np.ndarray:
        return self.planes[0]

    @property
    def x2(self) -> np.ndarray:
        return self.planes[1]

    @property
    def x3(self) -> np.ndarray:
        return self.planes[2]


@dataclass
class SeedMask:
    """Ternary per-pixel annotation: 0 unknown, 1 foreground, 2 background."""

    labels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise ValueError(f"seed mask must be 2-D, got shape {lab.shape}")
        if not np.isin(lab, (SEED_UNKNOWN, SEED_FG, SEED_BG)).all():
            raise ValueError("seed mask values must be 0 (unknown), 1 (foreground) or 2 (background)")
        self.labels = lab.astype(np.uint8)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def foreground(self) -> np.ndarray:
        return self.labels == SEED_FG

    @property
    def background(self) -> np.ndarray:
        return self.labels == SEED_BG

    def require_both_classes(self):
        for name, value in (("foreground", SEED_FG), ("background", SEED_BG)):
            if not (self.labels == value).any():
                raise ValueError(f"seed mask has no {name} pixels")


@dataclass
class SegMask:
    """Binary segmentation result plus the minimized energy it achieved."""

    foreground: np.ndarray  # (height, width) bool
    energy: float
    rounds: int = 1
    details: "object | None" = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        fg = np.asarray(self.foreground)
        if fg.ndim != 2:
            raise ValueError(f"segmentation mask must be 2-D, got shape {fg.shape}")
        self.foreground = fg.astype(bool)

    @property
    def width(self) -> int:
        return self.foreground.shape[1]

    @property
    def height(self) -> int:
        return self.foreground.shape[0]


def _parse_ppm(data: bytes) -> np.ndarray:
    """Parse a binary P6 PPM into a (H, W, 3) float64 array in [0, 1]."""
    pos = 2  # past the "P6" magic
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise ValueError("truncated PPM header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise ValueError("truncated PPM header")
            pos = nl + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            fields.append(data[pos:end])
            pos = end
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise ValueError("malformed PPM header") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ValueError(f"invalid PPM dimensions {width}x{height} maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    bytes_per = 1 if maxval < 256 else 2
    expected = width * height * 3 * bytes_per
    raw = data[pos:pos + expected]
    if len(raw) < expected:
        raise ValueError("truncated PPM pixel data")
    dtype = np.uint8 if bytes_per == 1 else np.dtype(">u2")
    arr = np.frombuffer(raw, dtype=dtype).reshape(height, width, 3)
    return arr.astype(np.float64) / maxval


def decode_image(data: bytes) -> RgbImage:
    """Decode PNG or binary PPM (P6) bytes; any other format is rejected."""
    if data.startswith(_PNG_MAGIC):
        with Image.open(io.BytesIO(data)) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        return RgbImage(arr)
    if data.startswith(b"P6"):
        return RgbImage(_parse_ppm(data))
    raise ValueError("unsupported image format (expected PNG or binary PPM)")


def read_image(path: str | Path) -> RgbImage:
    return decode_image(Path(path).read_bytes())


def encode_png_rgb(img: RgbImage) -> bytes:
    arr = np.clip(np.rint(img.pixels * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def write_image(img: RgbImage, path: str | Path):
    Path(path).write_bytes(encode_png_rgb(img))


def decode_seed_mask(data: bytes) -> SeedMask:
    """Seed mask PNG: single channel, 0 unknown / 1 foreground / 2 background."""
    if not data.startswith(_PNG_MAGIC):
        raise ValueError("seed mask must be a PNG file")
    with Image.open(io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("L"))
    return SeedMask(arr)


def read_seed_mask(path: str | Path) -> SeedMask:
    return decode_seed_mask(Path(path).read_bytes())


def encode_seed_mask_png(mask: SeedMask) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(mask.labels, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def write_seed_mask(mask: SeedMask, path: str | Path):
    Path(path).write_bytes(encode_seed_mask_png(mask))


def encode_seg_mask_png(mask: SegMask) -> bytes:
    """Segmentation PNG: 0 background, 255 foreground."""
    arr = np.where(mask.foreground, 255, 0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def decode_seg_mask(data: bytes) -> np.ndarray:
    """Read back a segmentation PNG as a boolean foreground grid."""
    if not data.startswith(_PNG_MAGIC):
        raise ValueError("segmentation mask must be a PNG file")
    with Image.open(io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("L"))
    return arr >= 128


def write_seg_mask(mask: SegMask, path: str | Path):
    """Write the mask PNG plus a sidecar JSON record (energy, rounds)."""
    path = Path(path)
    path.write_bytes(encode_seg_mask_png(mask))
    sidecar = path.with_suffix(".json")
    record = {"energy": mask.energy, "rounds": mask.rounds,
              "foreground_pixels": int(mask.foreground.sum())}
    sidecar.write_text(json.dumps(record, indent=2) + "\n")


def dump_chroma_pgm(img: ChromaImage, base: str | Path):
    """Debug dump: one 8-bit PGM per plane, affine scale recorded in a header comment.

    x1 and x2 lie in [-1, 1] and map through (v + 1) / 2 * 255; x3 lies in
    [0, 1] and maps through v * 255.
    """
    base = Path(base)
    specs = [("x1", img.x1, -1.0, 1.0), ("x2", img.x2, -1.0, 1.0), ("x3", img.x3, 0.0, 1.0)]
    paths = []
    for name, plane, lo, hi in specs:
        scaled = np.clip(np.rint((plane - lo) / (hi - lo) * 255.0), 0, 255).astype(np.uint8)
        header = (f"P5\n# plane {name}: pixel = round((value - {lo}) / {hi - lo} * 255)\n"
                  f"{img.width} {img.height}\n255\n").encode("ascii")
        out = base.parent / f"{base.name}.{name}.pgm"
        out.write_bytes(header + scaled.tobytes())
        paths.append(out)
    return paths
