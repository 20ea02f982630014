"""Dataset manifests and the synthetic blob-image generator.

A manifest is a CSV with header ``image,label,seeds,mask``; the seeds and
mask columns are optional per row. Paths are resolved relative to the
manifest file. The synthetic generator paints one textured elliptical blob
per image on a noise background and writes matching ground-truth masks and
machine-made seed scribbles, giving a reproducible stand-in corpus for the
evaluation protocol.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import SEED_BG, SEED_FG, RgbImage, SeedMask, SegMask, \
    encode_seg_mask_png, write_image, write_seed_mask


@dataclass(frozen=True)
class ManifestEntry:
    image: Path
    class_name: str
    seeds: Path | None = None
    mask: Path | None = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    class_names: tuple[str, ...]  # sorted unique labels

    @property
    def labels(self) -> np.ndarray:
        index = {name: i for i, name in enumerate(self.class_names)}
        return np.array([index[e.class_name] for e in self.entries], dtype=np.int64)

    def class_index(self, name: str) -> int:
        return self.class_names.index(name)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse and validate a manifest; every path must exist and every class
    must have at least two images (otherwise no train/test split is feasible)."""
    path = Path(path)
    root = path.parent
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    if not rows:
        raise ValueError(f"manifest {path} has no entries")
    entries = []
    for i, row in enumerate(rows):
        if not row.get("image") or not row.get("label"):
            raise ValueError(f"manifest row {i + 1}: 'image' and 'label' are required")
        entry = ManifestEntry(
            image=(root / row["image"]).resolve(),
            class_name=row["label"],
            seeds=(root / row["seeds"]).resolve() if row.get("seeds") else None,
            mask=(root / row["mask"]).resolve() if row.get("mask") else None,
        )
        for kind, p in (("image", entry.image), ("seeds", entry.seeds), ("mask", entry.mask)):
            if p is not None and not p.is_file():
                raise ValueError(f"manifest row {i + 1}: {kind} file not found: {p}")
        entries.append(entry)
    counts: dict[str, int] = {}
    for e in entries:
        counts[e.class_name] = counts.get(e.class_name, 0) + 1
    starved = sorted(name for name, n in counts.items() if n < 2)
    if starved:
        raise ValueError(f"classes with fewer than 2 images: {', '.join(starved)}")
    return DatasetManifest(tuple(entries), tuple(sorted(counts)))


def write_manifest(path: str | Path, entries: list[ManifestEntry]):
    path = Path(path)
    root = path.parent

    def rel(p: Path | None) -> str:
        if p is None:
            return ""
        try:
            return p.relative_to(root).as_posix()
        except ValueError:
            return str(p)  # outside the manifest directory: keep absolute

    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image", "label", "seeds", "mask"])
        for e in entries:
            writer.writerow([rel(e.image), e.class_name, rel(e.seeds), rel(e.mask)])


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Standard hexcone HSV -> RGB, h in [0, 1), vectorized."""
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - f * s)
    t = v * (1.0 - (1.0 - f) * s)
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def _blob_mask(size: int, rng: np.random.Generator) -> tuple[np.ndarray, tuple[float, float]]:
    margin = size * 0.12
    cy = rng.uniform(size * 0.42, size * 0.58)
    cx = rng.uniform(size * 0.42, size * 0.58)
    ry = rng.uniform(size * 0.24, size * 0.32)
    rx = rng.uniform(size * 0.24, size * 0.32)
    ry = min(ry, cy - margin, size - margin - cy)
    rx = min(rx, cx - margin, size - margin - cx)
    theta = rng.uniform(0.0, np.pi)
    yy, xx = np.mgrid[0:size, 0:size]
    dy, dx = yy - cy, xx - cx
    u = dx * np.cos(theta) + dy * np.sin(theta)
    w = -dx * np.sin(theta) + dy * np.cos(theta)
    return (u / rx) ** 2 + (w / ry) ** 2 <= 1.0, (cy, cx)


def _seed_scribbles(size: int, blob: np.ndarray, center: tuple[float, float]) -> SeedMask:
    labels = np.zeros((size, size), dtype=np.uint8)
    yy, xx = np.mgrid[0:size, 0:size]
    fg_r = max(2.0, size * 0.05)
    fg = (yy - center[0]) ** 2 + (xx - center[1]) ** 2 <= fg_r ** 2
    labels[fg & blob] = SEED_FG
    border = np.zeros_like(blob)
    border[:2, :] = True
    border[-2:, :] = True
    border[:, :2] = True
    border[:, -2:] = True
    labels[border & ~blob] = SEED_BG
    return SeedMask(labels)


def _synthetic_image(size: int, class_id: int, n_classes: int,
                     rng: np.random.Generator) -> tuple[RgbImage, np.ndarray, SeedMask]:
    blob, center = _blob_mask(size, rng)
    # colour and texture are class-coded with small per-image jitter, so
    # inter-class separation dominates intra-class spread in feature space;
    # saturation and value alternate between classes, keeping hue-adjacent
    # classes far apart on the other channels
    hue = (class_id / n_classes + rng.normal(0.0, 0.01)) % 1.0
    sat = 0.55 + 0.35 * (class_id % 2) + rng.uniform(-0.03, 0.03)
    val = 0.58 + 0.12 * ((class_id // 2) % 2) + rng.uniform(-0.02, 0.02)

    yy, xx = np.mgrid[0:size, 0:size]
    freq = 2.0 + 1.5 * class_id + rng.uniform(-0.2, 0.2)
    angle = np.pi * class_id / max(n_classes, 1) + rng.normal(0.0, 0.05)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    stripes = np.sin(2.0 * np.pi * freq * (xx * np.cos(angle) + yy * np.sin(angle)) / size + phase)
    v_plane = np.clip(val * (0.85 + 0.15 * stripes), 0.0, 1.0)

    h_plane = np.full((size, size), hue)
    s_plane = np.full((size, size), sat)
    colors = _hsv_to_rgb(h_plane, s_plane, v_plane)
    background = rng.uniform(0.0, 1.0, size=(size, size, 3))
    pixels = np.where(blob[..., None], colors, background)
    return RgbImage(pixels), blob, _seed_scribbles(size, blob, center)


def generate_synthetic_dataset(out_dir: str | Path, classes: int = 5,
                               per_class: int = 40, size: int = 64,
                               seed: int = 0) -> Path:
    """Write images, masks, seeds and a manifest; returns the manifest path."""
    if classes < 1 or per_class < 2:
        raise ValueError("need at least 1 class and 2 images per class")
    out = Path(out_dir)
    for sub in ("images", "masks", "seeds"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    entries = []
    for c in range(classes):
        name = f"class{c:02d}"
        for i in range(per_class):
            rng = np.random.default_rng(np.random.SeedSequence([seed, c, i]))
            img, blob, seeds = _synthetic_image(size, c, classes, rng)
            stem = f"{name}_{i:03d}"
            image_path = out / "images" / f"{stem}.png"
            mask_path = out / "masks" / f"{stem}.png"
            seeds_path = out / "seeds" / f"{stem}.png"
            write_image(img, image_path)
            mask_path.write_bytes(encode_seg_mask_png(SegMask(blob, energy=0.0)))
            write_seed_mask(seeds, seeds_path)
            entries.append(ManifestEntry(image_path, name, seeds_path, mask_path))
    manifest_path = out / "manifest.csv"
    write_manifest(manifest_path, entries)
    return manifest_path


def two_tone_demo(out_dir: str | Path, size: int = 64) -> dict[str, Path]:
    """The two-tone segmentation demo: half red, half blue, one scribble each.

    Writes the image, the seed mask, the ground-truth mask, and a JSON file
    with the seed runs (for scripted clients). Returns the written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    half = size // 2
    pixels = np.zeros((size, size, 3))
    pixels[:, :half] = (0.85, 0.15, 0.1)
    pixels[:, half:] = (0.1, 0.2, 0.85)
    img = RgbImage(pixels)

    labels = np.zeros((size, size), dtype=np.uint8)
    row = size // 2
    fg_run = (row, size // 8, max(4, size // 4))
    bg_run = (row, half + size // 8, max(4, size // 4))
    labels[fg_run[0], fg_run[1]:fg_run[1] + fg_run[2]] = SEED_FG
    labels[bg_run[0], bg_run[1]:bg_run[1] + bg_run[2]] = SEED_BG
    seeds = SeedMask(labels)

    truth = np.zeros((size, size), dtype=bool)
    truth[:, :half] = True

    paths = {
        "image": out / "demo.png",
        "seeds": out / "demo_seeds.png",
        "truth": out / "demo_truth.png",
        "runs": out / "demo_seeds.json",
    }
    write_image(img, paths["image"])
    write_seed_mask(seeds, paths["seeds"])
    paths["truth"].write_bytes(encode_seg_mask_png(SegMask(truth, energy=0.0)))
    runs = [
        {"label": "fg", "row": fg_run[0], "col": fg_run[1], "length": fg_run[2]},
        {"label": "bg", "row": bg_run[0], "col": bg_run[1], "length": bg_run[2]},
    ]
    paths["runs"].write_text(json.dumps({"runs": runs}, indent=2) + "\n")
    return paths
