import numpy as np
import pytest

from blockctm.datasets import generate_synthetic_dataset, load_manifest, \
    two_tone_demo, write_manifest, ManifestEntry
from blockctm.raster import decode_seg_mask, read_image, read_seed_mask


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    manifest_path = generate_synthetic_dataset(out, classes=3, per_class=4,
                                               size=32, seed=7)
    return manifest_path


def test_generator_writes_consistent_manifest(small_dataset):
    manifest = load_manifest(small_dataset)
    assert len(manifest.entries) == 12
    assert manifest.class_names == ("class00", "class01", "class02")
    labels = manifest.labels
    assert [int((labels == c).sum()) for c in range(3)] == [4, 4, 4]
    for entry in manifest.entries:
        img = read_image(entry.image)
        assert (img.height, img.width) == (32, 32)
        mask = decode_seg_mask(entry.mask.read_bytes())
        assert 0 < mask.sum() < mask.size
        seeds = read_seed_mask(entry.seeds)
        assert seeds.foreground.any() and seeds.background.any()
        # machine seeds must agree with the ground truth
        assert mask[seeds.foreground].all()
        assert not mask[seeds.background].any()


def test_generator_is_deterministic(tmp_path):
    a = generate_synthetic_dataset(tmp_path / "a", classes=2, per_class=2,
                                   size=24, seed=3)
    b = generate_synthetic_dataset(tmp_path / "b", classes=2, per_class=2,
                                   size=24, seed=3)
    for entry_a, entry_b in zip(load_manifest(a).entries, load_manifest(b).entries):
        assert entry_a.image.read_bytes() == entry_b.image.read_bytes()
        assert entry_a.mask.read_bytes() == entry_b.mask.read_bytes()
        assert entry_a.seeds.read_bytes() == entry_b.seeds.read_bytes()


def test_different_seeds_differ(tmp_path):
    a = generate_synthetic_dataset(tmp_path / "a", classes=1, per_class=2,
                                   size=24, seed=1)
    b = generate_synthetic_dataset(tmp_path / "b", classes=1, per_class=2,
                                   size=24, seed=2)
    images_a = [e.image.read_bytes() for e in load_manifest(a).entries]
    images_b = [e.image.read_bytes() for e in load_manifest(b).entries]
    assert images_a != images_b


def test_manifest_missing_file_rejected(tmp_path):
    (tmp_path / "present.png").write_bytes(b"")
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("image,label,seeds,mask\nmissing.png,cat,,\n")
    with pytest.raises(ValueError, match="missing.png"):
        load_manifest(manifest)


def test_manifest_starved_class_rejected(tmp_path, small_dataset):
    src = load_manifest(small_dataset)
    entries = list(src.entries[:3])  # class00 keeps 3, but grab 1 of class01
    entries.append(src.entries[4])
    manifest = tmp_path / "manifest.csv"
    write_manifest(manifest, [ManifestEntry(e.image, e.class_name) for e in entries])
    with pytest.raises(ValueError, match="class01"):
        load_manifest(manifest)


def test_manifest_requires_image_and_label(tmp_path):
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("image,label\nsomething.png,\n")
    with pytest.raises(ValueError, match="required"):
        load_manifest(manifest)


def test_two_tone_demo(tmp_path):
    paths = two_tone_demo(tmp_path, size=64)
    img = read_image(paths["image"])
    assert (img.height, img.width) == (64, 64)
    truth = decode_seg_mask(paths["truth"].read_bytes())
    assert truth[:, :32].all() and not truth[:, 32:].any()
    seeds = read_seed_mask(paths["seeds"])
    assert truth[seeds.foreground].all()
    assert not truth[seeds.background].any()
    import json
    runs = json.loads(paths["runs"].read_text())["runs"]
    labels = np.zeros((64, 64), dtype=np.uint8)
    for run in runs:
        value = 1 if run["label"] == "fg" else 2
        labels[run["row"], run["col"]:run["col"] + run["length"]] = value
    np.testing.assert_array_equal(labels, seeds.labels)
