"""Color texture moments: characteristic maps, masked moments, block features.

Eight fixed 3x3 templates (the real/imaginary parts of a local Fourier basis
over the ring of eight neighbours) are correlated with each chroma plane.
The first and second moments of each response map, restricted to foreground
pixels, give 16 values per channel; three channels give the 48-value
descriptor, repeated per block of the foreground bounding box.
"""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import ChromaImage

_R = np.sqrt(2.0) / 2.0

#: The eight 3x3 correlation templates. Template 0 is the all-ones ring
#: (sums to 8); templates 1-7 are zero-sum.
TEMPLATES = np.array([
    [[1, 1, 1],
     [1, 0, 1],
     [1, 1, 1]],
    [[-1, 1, -1],
     [1, 0, 1],
     [-1, 1, -1]],
    [[-_R, 0, _R],
     [-1, 0, 1],
     [-_R, 0, _R]],
    [[-_R, -1, -_R],
     [0, 0, 0],
     [_R, 1, _R]],
    [[0, -1, 0],
     [1, 0, 1],
     [0, -1, 0]],
    [[1, 0, -1],
     [0, 0, 0],
     [-1, 0, 1]],
    [[_R, 0, -_R],
     [-1, 0, 1],
     [_R, 0, -_R]],
    [[-_R, 1, -_R],
     [0, 0, 0],
     [_R, -1, _R]],
], dtype=np.float64)

N_MAPS = 8
N_CHANNELS = 3
FEATURES_PER_BLOCK = N_CHANNELS * N_MAPS * 2  # mean + stddev per map

_VALID_SIDES = (1, 2, 4, 8)
_CTMF_MAGIC = b"CTMF"
_CTMF_VERSION = 1


CHANNEL_NAMES = ("x1", "x2", "x3")


@dataclass(frozen=True)
class CharacteristicMapSet:
    """The eight filter-response maps of one chroma channel."""

    channel: str  # "x1", "x2" or "x3"
    maps: np.ndarray  # (8, H, W)


def characteristic_map_set(img: ChromaImage, channel: int | str) -> CharacteristicMapSet:
    """Apply the template bank to one chroma plane of an image."""
    if isinstance(channel, str):
        if channel not in CHANNEL_NAMES:
            raise ValueError(f"channel must be one of {CHANNEL_NAMES}, got {channel!r}")
        index = CHANNEL_NAMES.index(channel)
    else:
        if not 0 <= channel < N_CHANNELS:
            raise ValueError(f"channel index out of range: {channel}")
        index = channel
    return CharacteristicMapSet(CHANNEL_NAMES[index], apply_templates(img.planes[index]))


def apply_templates(plane: np.ndarray, bank: np.ndarray = TEMPLATES) -> np.ndarray:
    """Correlate a 2-D plane with each template under replicate-border padding.

    Templates are applied as-is (no kernel flip). Returns an (8, H, W) stack.
    """
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2 or plane.shape[0] < 1 or plane.shape[1] < 1:
        raise ValueError(f"plane must be a non-empty 2-D grid, got shape {plane.shape}")
    h, w = plane.shape
    padded = np.pad(plane, 1, mode="edge")
    shifted = [[padded[u:u + h, v:v + w] for v in range(3)] for u in range(3)]
    out = np.zeros((len(bank), h, w))
    for k, tpl in enumerate(bank):
        acc = out[k]
        for u in range(3):
            for v in range(3):
                c = tpl[u, v]
                if c != 0.0:
                    acc += c * shifted[u][v]
    return out


def masked_moments(map2d: np.ndarray, mask2d: np.ndarray) -> tuple[float, float]:
    """Mean and population standard deviation over masked-in pixels.

    An empty mask yields (0.0, 0.0); whether that counts as an empty block is
    the caller's concern.
    """
    values = np.asarray(map2d, dtype=np.float64)[np.asarray(mask2d, dtype=bool)]
    if values.size == 0:
        return 0.0, 0.0
    mean = float(values.mean())
    var = float(np.mean((values - mean) ** 2))
    return mean, np.sqrt(max(var, 0.0))


def ctm_vector(img: ChromaImage, mask: np.ndarray,
               region: tuple[int, int, int, int]) -> tuple[np.ndarray, bool]:
    """48 moment values for one rectangular region (half-open row/col bounds).

    Layout: channel (x1, x2, x3), then map 1..8, then (mean, stddev).
    Returns the vector and an empty flag; a region with no foreground pixel
    yields zeros and True.
    """
    r0, c0, r1, c1 = region
    if not (0 <= r0 <= r1 <= img.height and 0 <= c0 <= c1 <= img.width):
        raise ValueError(f"region {region} outside image bounds {img.height}x{img.width}")
    vec = np.zeros(FEATURES_PER_BLOCK)
    if r1 <= r0 or c1 <= c0:
        return vec, True
    sub_mask = np.asarray(mask, dtype=bool)[r0:r1, c0:c1]
    if not sub_mask.any():
        return vec, True
    for ch in range(N_CHANNELS):
        maps = apply_templates(img.planes[ch, r0:r1, c0:c1])
        for k in range(N_MAPS):
            mean, std = masked_moments(maps[k], sub_mask)
            vec[ch * N_MAPS * 2 + k * 2] = mean
            vec[ch * N_MAPS * 2 + k * 2 + 1] = std
    return vec, False


@dataclass(frozen=True)
class BlockScheme:
    """A g x g partition of the foreground bounding box, g in {1, 2, 4, 8}."""

    grid: int

    def __post_init__(self):
        if self.grid not in _VALID_SIDES:
            raise ValueError(f"grid side must be one of {_VALID_SIDES}, got {self.grid}")

    @classmethod
    def from_blocks(cls, blocks: int) -> "BlockScheme":
        side = {1: 1, 4: 2, 16: 4, 64: 8}.get(blocks)
        if side is None:
            raise ValueError(f"block count must be one of 1, 4, 16 or 64, got {blocks}")
        return cls(side)

    @property
    def blocks(self) -> int:
        return self.grid * self.grid

    @property
    def dimension(self) -> int:
        return FEATURES_PER_BLOCK * self.blocks

    def regions(self, bbox: tuple[int, int, int, int]) -> list[tuple[int, int, int, int]]:
        """Tile a half-open bounding box into g*g regions, row-major.

        When a side is not divisible by g the earlier blocks take the extra
        pixel; sides shorter than g produce zero-area trailing regions.
        """
        r0, c0, r1, c1 = bbox
        row_edges = _split_edges(r0, r1, self.grid)
        col_edges = _split_edges(c0, c1, self.grid)
        return [(row_edges[i], col_edges[j], row_edges[i + 1], col_edges[j + 1])
                for i in range(self.grid) for j in range(self.grid)]


def _split_edges(lo: int, hi: int, parts: int) -> list[int]:
    length = hi - lo
    base, extra = divmod(length, parts)
    edges = [lo]
    for i in range(parts):
        edges.append(edges[-1] + base + (1 if i < extra else 0))
    return edges


@dataclass(frozen=True)
class FeatureVector:
    """Concatenated block descriptors plus the per-block emptiness flags."""

    values: np.ndarray  # (48 * blocks,)
    empty_blocks: np.ndarray  # (blocks,) bool
    grid: int

    def __post_init__(self):
        expected = FEATURES_PER_BLOCK * self.grid * self.grid
        if self.values.shape != (expected,):
            raise ValueError(f"expected {expected} values for grid {self.grid}, "
                             f"got shape {self.values.shape}")


def foreground_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    """Tight half-open bounding box of the true pixels of a mask."""
    mask = np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise ValueError("mask has no foreground pixels")
    return int(rows[0]), int(cols[0]), int(rows[-1]) + 1, int(cols[-1]) + 1


def extract_block_features(img: ChromaImage, mask: np.ndarray,
                           scheme: BlockScheme) -> FeatureVector:
    """Block-partitioned CTM descriptor over the foreground bounding box."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (img.height, img.width):
        raise ValueError(f"mask shape {mask.shape} does not match image "
                         f"{img.height}x{img.width}")
    bbox = foreground_bbox(mask)
    values = np.zeros(scheme.dimension)
    empty = np.zeros(scheme.blocks, dtype=bool)
    for b, region in enumerate(scheme.regions(bbox)):
        vec, is_empty = ctm_vector(img, mask, region)
        values[b * FEATURES_PER_BLOCK:(b + 1) * FEATURES_PER_BLOCK] = vec
        empty[b] = is_empty
    return FeatureVector(values, empty, scheme.grid)


@dataclass(frozen=True)
class FeatureRecord:
    image_id: str
    label: str
    grid: int
    values: np.ndarray


def write_feature_table(records: list[FeatureRecord], path: str | Path | None = None) -> str:
    """Render feature records as CSV text: image id, class label, grid side, values."""
    if not records:
        raise ValueError("no feature records to write")
    dim = records[0].values.shape[0]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["image", "label", "grid"] + [f"f{i}" for i in range(dim)])
    for rec in records:
        if rec.values.shape[0] != dim:
            raise ValueError("feature records have mixed dimensions")
        writer.writerow([rec.image_id, rec.label, rec.grid] + [repr(float(v)) for v in rec.values])
    text = out.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_feature_table(text: str) -> list[FeatureRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:3] != ["image", "label", "grid"]:
        raise ValueError("not a feature table (missing header)")
    records = []
    for row in rows[1:]:
        if not row:
            continue
        values = np.array([float(v) for v in row[3:]])
        records.append(FeatureRecord(row[0], row[1], int(row[2]), values))
    return records


def write_features_binary(records: list[FeatureRecord], path: str | Path | None = None) -> bytes:
    """Compact binary export: CTMF magic, version, dims, little-endian float64."""
    if not records:
        raise ValueError("no feature records to write")
    dim = records[0].values.shape[0]
    grid = records[0].grid
    out = io.BytesIO()
    out.write(_CTMF_MAGIC)
    out.write(struct.pack("<HHII", _CTMF_VERSION, grid, len(records), dim))
    for rec in records:
        if rec.values.shape[0] != dim or rec.grid != grid:
            raise ValueError("feature records have mixed dimensions")
        for text in (rec.image_id, rec.label):
            raw = text.encode("utf-8")
            out.write(struct.pack("<H", len(raw)))
            out.write(raw)
        out.write(rec.values.astype("<f8").tobytes())
    data = out.getvalue()
    if path is not None:
        Path(path).write_bytes(data)
    return data


def read_features_binary(data: bytes) -> list[FeatureRecord]:
    buf = io.BytesIO(data)

    def take(n: int) -> bytes:
        raw = buf.read(n)
        if len(raw) != n:
            raise ValueError("truncated CTMF stream")
        return raw

    if take(4) != _CTMF_MAGIC:
        raise ValueError("not a CTMF stream")
    version, grid, count, dim = struct.unpack("<HHII", take(12))
    if version != _CTMF_VERSION:
        raise ValueError(f"unsupported CTMF version: {version}")
    records = []
    for _ in range(count):
        texts = []
        for _ in range(2):
            (n,) = struct.unpack("<H", take(2))
            texts.append(take(n).decode("utf-8"))
        values = np.frombuffer(take(dim * 8), dtype="<f8").astype(np.float64)
        records.append(FeatureRecord(texts[0], texts[1], grid, values))
    return records
