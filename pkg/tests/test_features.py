import math

import numpy as np
import pytest

from blockctm.features import (FEATURES_PER_BLOCK, TEMPLATES, BlockScheme,
                               FeatureRecord, apply_templates,
                               characteristic_map_set, ctm_vector,
                               extract_block_features, foreground_bbox,
                               masked_moments, read_feature_table,
                               read_features_binary, write_feature_table,
                               write_features_binary)
from blockctm.raster import ChromaImage


def naive_maps(plane, bank=TEMPLATES):
    """Reference sliding-window correlation with replicate padding."""
    h, w = plane.shape
    padded = np.pad(plane, 1, mode="edge")
    out = np.zeros((len(bank), h, w))
    for k in range(len(bank)):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for u in range(3):
                    for v in range(3):
                        acc += bank[k, u, v] * padded[i + u, j + v]
                out[k, i, j] = acc
    return out


def random_chroma(rng, h, w):
    x12 = rng.uniform(-1, 1, size=(2, h, w))
    x3 = rng.uniform(0, 1, size=(1, h, w))
    return ChromaImage(np.concatenate([x12, x3]))


def test_template_bank_shape_and_sums():
    assert TEMPLATES.shape == (8, 3, 3)
    assert TEMPLATES[0].sum() == 8.0
    for k in range(1, 8):
        assert abs(TEMPLATES[k].sum()) < 1e-12
    allowed = {0.0, 1.0, -1.0, math.sqrt(2) / 2, -math.sqrt(2) / 2}
    assert set(np.unique(TEMPLATES)) <= allowed


def test_constant_plane_responses_exact():
    # 0.375 is dyadic, so every partial sum is representable and the
    # (8c, 0, ..., 0) response pattern holds with no rounding at all
    c = 0.375
    maps = apply_templates(np.full((5, 7), c))
    np.testing.assert_array_equal(maps[0], np.full((5, 7), 8 * c))
    for k in range(1, 8):
        np.testing.assert_array_equal(maps[k], np.zeros((5, 7)))


def test_constant_plane_responses_arbitrary_value():
    c = 0.37
    maps = apply_templates(np.full((5, 7), c))
    np.testing.assert_allclose(maps[0], 8 * c, atol=1e-12)
    for k in range(1, 8):
        np.testing.assert_allclose(maps[k], 0.0, atol=1e-12)


def test_horizontal_ramp_gradient_response():
    # template 2 has a negative left column and positive right column; on
    # f(x, y) = x the interior response is (1 + sqrt(2)) * 2
    plane = np.tile(np.arange(8, dtype=float), (6, 1))
    maps = apply_templates(plane)
    expected = 2.0 * (1.0 + math.sqrt(2.0))
    interior = maps[2][1:-1, 1:-1]
    np.testing.assert_allclose(interior, expected, atol=1e-12)


def test_maps_match_naive_oracle():
    rng = np.random.default_rng(11)
    plane = rng.normal(size=(6, 6))
    fast = apply_templates(plane)
    slow = naive_maps(plane)
    np.testing.assert_allclose(fast, slow, atol=1e-12)


def test_single_pixel_plane():
    maps = apply_templates(np.array([[2.0]]))
    assert maps[0][0, 0] == 16.0  # replicate padding makes all 8 neighbours 2.0
    for k in range(1, 8):
        assert abs(maps[k][0, 0]) < 1e-12


def test_characteristic_map_set_by_name_and_index():
    rng = np.random.default_rng(61)
    img = random_chroma(rng, 5, 5)
    by_name = characteristic_map_set(img, "x2")
    by_index = characteristic_map_set(img, 1)
    assert by_name.channel == by_index.channel == "x2"
    assert by_name.maps.shape == (8, 5, 5)
    np.testing.assert_array_equal(by_name.maps, by_index.maps)
    np.testing.assert_array_equal(by_name.maps, apply_templates(img.planes[1]))
    with pytest.raises(ValueError, match="channel"):
        characteristic_map_set(img, "hue")


def test_masked_moments_constant():
    mask = np.zeros((4, 4), dtype=bool)
    mask[1:3, 1:3] = True
    assert masked_moments(np.full((4, 4), 3.25), mask) == (3.25, 0.0)


def test_masked_moments_two_point():
    values = np.array([[0.0, 2.0], [0.0, 2.0]])
    mean, std = masked_moments(values, np.ones((2, 2), dtype=bool))
    assert (mean, std) == (1.0, 1.0)


def test_masked_moments_empty():
    assert masked_moments(np.ones((3, 3)), np.zeros((3, 3), dtype=bool)) == (0.0, 0.0)


def test_masked_moments_matches_accumulation_oracle():
    rng = np.random.default_rng(21)
    values = rng.normal(size=(10, 10))
    mask = rng.uniform(size=(10, 10)) < 0.5
    mean, std = masked_moments(values, mask)
    picked = [values[i, j] for i in range(10) for j in range(10) if mask[i, j]]
    exp_mean = sum(picked) / len(picked)
    exp_var = sum((v - exp_mean) ** 2 for v in picked) / len(picked)
    assert mean == pytest.approx(exp_mean, abs=1e-10)
    assert std == pytest.approx(math.sqrt(exp_var), abs=1e-10)


def test_masked_moments_permutation_invariant():
    rng = np.random.default_rng(3)
    values = rng.normal(size=(4, 5))
    mask = np.ones((4, 5), dtype=bool)
    mean1, std1 = masked_moments(values, mask)
    shuffled = rng.permutation(values.ravel()).reshape(4, 5)
    mean2, std2 = masked_moments(shuffled, mask)
    assert mean1 == pytest.approx(mean2, abs=1e-12)
    assert std1 == pytest.approx(std2, abs=1e-12)


def test_ctm_vector_grayscale_zero_prefix():
    rng = np.random.default_rng(9)
    x3 = rng.uniform(0, 1, size=(1, 6, 6))
    img = ChromaImage(np.concatenate([np.zeros((2, 6, 6)), x3]))
    vec, empty = ctm_vector(img, np.ones((6, 6), dtype=bool), (0, 0, 6, 6))
    assert not empty
    np.testing.assert_array_equal(vec[:32], np.zeros(32))
    assert np.abs(vec[32:]).max() > 0


def test_ctm_vector_uniform_chroma():
    a, b, c = 0.2, -0.4, 0.9
    img = ChromaImage(np.stack([np.full((5, 5), a), np.full((5, 5), b),
                                np.full((5, 5), c)]))
    vec, empty = ctm_vector(img, np.ones((5, 5), dtype=bool), (0, 0, 5, 5))
    assert not empty
    for ch, value in enumerate((a, b, c)):
        seg = vec[ch * 16:(ch + 1) * 16]
        assert seg[0] == pytest.approx(8 * value, abs=1e-12)
        np.testing.assert_allclose(seg[1:], 0.0, atol=1e-12)


def test_ctm_vector_matches_composed_oracle():
    rng = np.random.default_rng(33)
    img = random_chroma(rng, 16, 16)
    mask = rng.uniform(size=(16, 16)) < 0.6
    mask[0, 0] = True
    vec, _ = ctm_vector(img, mask, (0, 0, 16, 16))
    for ch in range(3):
        maps = naive_maps(img.planes[ch])
        for k in range(8):
            vals = maps[k][mask]
            mean = vals.mean()
            std = math.sqrt(np.mean((vals - mean) ** 2))
            assert vec[ch * 16 + 2 * k] == pytest.approx(mean, abs=1e-10)
            assert vec[ch * 16 + 2 * k + 1] == pytest.approx(std, abs=1e-10)


def test_block_scheme_validation():
    for blocks, side in ((1, 1), (4, 2), (16, 4), (64, 8)):
        assert BlockScheme.from_blocks(blocks).grid == side
    with pytest.raises(ValueError):
        BlockScheme.from_blocks(9)
    with pytest.raises(ValueError):
        BlockScheme(3)


def test_block_regions_tile_exactly():
    scheme = BlockScheme(4)
    regions = scheme.regions((3, 2, 17, 13))  # 14 rows, 11 cols
    cover = np.zeros((20, 15), dtype=int)
    for r0, c0, r1, c1 in regions:
        cover[r0:r1, c0:c1] += 1
    assert cover[3:17, 2:13].min() == 1 and cover[3:17, 2:13].max() == 1
    assert cover.sum() == 14 * 11
    heights = {r1 - r0 for r0, _, r1, _ in regions}
    widths = {c1 - c0 for _, c0, _, c1 in regions}
    assert heights <= {3, 4} and widths <= {2, 3}


def test_feature_dimension_law():
    rng = np.random.default_rng(17)
    img = random_chroma(rng, 20, 20)
    mask = np.zeros((20, 20), dtype=bool)
    mask[2:18, 3:17] = True
    for blocks, dim in ((1, 48), (4, 192), (16, 768), (64, 3072)):
        fv = extract_block_features(img, mask, BlockScheme.from_blocks(blocks))
        assert fv.values.shape == (dim,)
        assert fv.empty_blocks.shape == (blocks,)


def test_single_block_equals_ctm_vector():
    rng = np.random.default_rng(8)
    img = random_chroma(rng, 12, 10)
    mask = rng.uniform(size=(12, 10)) < 0.5
    mask[4, 4] = True
    fv = extract_block_features(img, mask, BlockScheme(1))
    vec, _ = ctm_vector(img, mask, foreground_bbox(mask))
    np.testing.assert_array_equal(fv.values, vec)


def test_quadrant_blocks_are_independent():
    quads = [(0.3, -0.2, 0.5), (-0.5, 0.1, 0.9), (0.8, 0.8, 0.1), (-0.1, -0.9, 0.4)]
    planes = np.zeros((3, 8, 8))
    for q, (a, b, c) in enumerate(quads):
        r0, c0 = 4 * (q // 2), 4 * (q % 2)
        planes[0, r0:r0 + 4, c0:c0 + 4] = a
        planes[1, r0:r0 + 4, c0:c0 + 4] = b
        planes[2, r0:r0 + 4, c0:c0 + 4] = c
    img = ChromaImage(planes)
    mask = np.ones((8, 8), dtype=bool)
    fv = extract_block_features(img, mask, BlockScheme(2))
    for q in range(4):
        r0, c0 = 4 * (q // 2), 4 * (q % 2)
        single, _ = ctm_vector(img, mask, (r0, c0, r0 + 4, c0 + 4))
        np.testing.assert_array_equal(fv.values[q * 48:(q + 1) * 48], single)


def test_translation_covariance():
    rng = np.random.default_rng(55)
    img = random_chroma(rng, 9, 9)
    mask = np.zeros((9, 9), dtype=bool)
    mask[1:5, 1:6] = rng.uniform(size=(4, 5)) < 0.7
    mask[2, 2] = True
    shifted_planes = np.zeros((3, 12, 13))
    shifted_planes[:, 3:12, 2:11] = img.planes
    shifted_mask = np.zeros((12, 13), dtype=bool)
    shifted_mask[3:12, 2:11] = mask
    for scheme in (BlockScheme(1), BlockScheme(2)):
        a = extract_block_features(img, mask, scheme)
        b = extract_block_features(ChromaImage(shifted_planes), shifted_mask, scheme)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.empty_blocks, b.empty_blocks)


def test_empty_blocks_flagged_with_zeros():
    planes = np.zeros((3, 8, 8))
    planes[2] = 0.5
    img = ChromaImage(planes)
    mask = np.zeros((8, 8), dtype=bool)
    mask[0, 0] = True
    mask[7, 7] = True  # bbox is the whole grid, but off-diagonal quadrants are empty
    fv = extract_block_features(img, mask, BlockScheme(2))
    assert list(fv.empty_blocks) == [False, True, True, False]
    np.testing.assert_array_equal(fv.values[48:96], np.zeros(48))
    np.testing.assert_array_equal(fv.values[96:144], np.zeros(48))


def test_empty_mask_rejected():
    img = ChromaImage(np.zeros((3, 4, 4)))
    with pytest.raises(ValueError, match="no foreground"):
        extract_block_features(img, np.zeros((4, 4), dtype=bool), BlockScheme(1))


def test_feature_table_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    records = [FeatureRecord(f"img{i}", "cat", 2, rng.normal(size=192)) for i in range(3)]
    text = write_feature_table(records, tmp_path / "fv.csv")
    back = read_feature_table(text)
    assert [r.image_id for r in back] == ["img0", "img1", "img2"]
    for a, b in zip(records, back):
        assert a.label == b.label and a.grid == b.grid
        np.testing.assert_array_equal(a.values, b.values)


def test_features_binary_round_trip():
    rng = np.random.default_rng(4)
    records = [FeatureRecord("a.png", "dog", 1, rng.normal(size=48)),
               FeatureRecord("b.png", "cat", 1, rng.normal(size=48))]
    data = write_features_binary(records)
    assert data[:4] == b"CTMF"
    back = read_features_binary(data)
    for a, b in zip(records, back):
        assert (a.image_id, a.label, a.grid) == (b.image_id, b.label, b.grid)
        np.testing.assert_array_equal(a.values, b.values)
    with pytest.raises(ValueError, match="truncated"):
        read_features_binary(data[:-5])
