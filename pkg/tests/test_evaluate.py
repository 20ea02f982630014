from pathlib import Path

import numpy as np
import pytest

from blockctm.datasets import generate_synthetic_dataset, load_manifest
from blockctm.evaluate import (CellStats, EvalReport, SplitSpec,
                               extract_manifest_features, parse_report_csv,
                               render_report, run_experiment, stratified_split)

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("eval_synth")
    return load_manifest(generate_synthetic_dataset(out, classes=3, per_class=6,
                                                    size=32, seed=11))


def reference_table_report() -> EvalReport:
    values = {
        (1, 0.7, "pnn"): (78.09, 77.52, 77.70), (1, 0.7, "knn"): (82.70, 81.41, 82.38),
        (1, 0.5, "pnn"): (75.68, 73.31, 74.26), (1, 0.5, "knn"): (79.91, 77.83, 78.49),
        (1, 0.3, "pnn"): (69.69, 67.11, 68.52), (1, 0.3, "knn"): (74.07, 71.61, 72.69),
        (4, 0.7, "pnn"): (70.46, 70.16, 70.20), (4, 0.7, "knn"): (72.91, 72.19, 72.55),
        (4, 0.5, "pnn"): (66.56, 65.76, 66.04), (4, 0.5, "knn"): (68.79, 68.14, 68.30),
        (4, 0.3, "pnn"): (59.35, 57.92, 58.48), (4, 0.3, "knn"): (62.99, 60.19, 61.48),
    }
    cells = {k: CellStats(max=v[0], min=v[1], avg=v[2]) for k, v in values.items()}
    return EvalReport(cells, (1, 4), (0.7, 0.5, 0.3), ("pnn", "knn"), 5, 0)


class TestStratifiedSplit:
    def test_counts_at_seventy_percent(self):
        labels = np.zeros(40, dtype=int)
        train, test = stratified_split(labels, 0.7, 0)
        assert train.size == 28 and test.size == 12

    def test_counts_at_thirty_percent(self):
        labels = np.zeros(40, dtype=int)
        train, test = stratified_split(labels, 0.3, 0)
        assert train.size == 12 and test.size == 28

    def test_partition_law(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 10, size=120)
        labels[:10] = np.arange(10)
        labels[10:20] = np.arange(10)  # every class has >= 2
        for fraction in (0.3, 0.5, 0.7):
            train, test = stratified_split(labels, fraction, 42)
            combined = np.sort(np.concatenate([train, test]))
            np.testing.assert_array_equal(combined, np.arange(120))
            for c in range(10):
                n = int((labels == c).sum())
                n_train = int((labels[train] == c).sum())
                assert n_train == max(1, int(fraction * n))

    def test_determinism_and_seed_sensitivity(self):
        rng = np.random.default_rng(2)
        labels = np.repeat(np.arange(10), 8)
        a1, _ = stratified_split(labels, 0.5, 7)
        a2, _ = stratified_split(labels, 0.5, 7)
        np.testing.assert_array_equal(a1, a2)
        b1, _ = stratified_split(labels, 0.5, 8)
        assert not np.array_equal(a1, b1)
        # per-class counts match even when the draw differs
        for c in range(10):
            assert (labels[a1] == c).sum() == (labels[b1] == c).sum() == 4

    def test_infeasible_class_rejected(self):
        labels = np.array([0, 0, 1])
        with pytest.raises(ValueError, match="class 1"):
            stratified_split(labels, 0.5, 0)

    def test_fraction_bounds(self):
        with pytest.raises(ValueError, match="fraction"):
            stratified_split(np.zeros(4, dtype=int), 1.0, 0)

    def test_accepts_manifest_directly(self, manifest):
        from_manifest = stratified_split(manifest, 0.5, 17)
        from_labels = stratified_split(manifest.labels, 0.5, 17)
        np.testing.assert_array_equal(from_manifest[0], from_labels[0])
        np.testing.assert_array_equal(from_manifest[1], from_labels[1])


class TestRunExperiment:
    def test_self_test_mode_is_perfect_for_knn(self, manifest):
        spec = SplitSpec(fractions=(0.5,), runs=5, master_seed=3)
        report = run_experiment(manifest, (1,), spec, classifiers=("knn",),
                                self_test=True)
        cell = report.cell(1, 0.5, "knn")
        assert cell.max == cell.min == cell.avg == 100.0
        assert report.diagnostic_self_test

    def test_aggregation_law(self, manifest):
        spec = SplitSpec(fractions=(0.5, 0.7), runs=5, master_seed=4)
        report = run_experiment(manifest, (1, 4), spec)
        for cell in report.cells.values():
            assert cell.min <= cell.avg <= cell.max
            assert 0.0 <= cell.min and cell.max <= 100.0
            assert cell.avg == pytest.approx(np.mean(cell.per_run), abs=1e-9)
            assert len(cell.per_run) == 5
            assert cell.confusion.sum() > 0

    def test_reproducibility_and_cache_transparency(self, manifest):
        spec = SplitSpec(fractions=(0.5,), runs=5, master_seed=5)
        first = run_experiment(manifest, (1,), spec, cache={})
        shared_cache: dict = {}
        second = run_experiment(manifest, (1,), spec, cache=shared_cache)
        third = run_experiment(manifest, (1,), spec, cache=shared_cache)  # warm cache
        a = render_report(first, "csv")
        assert render_report(second, "csv") == a
        assert render_report(third, "csv") == a

    def test_confusion_diagonal_dominates_on_separable_data(self, manifest):
        spec = SplitSpec(fractions=(0.7,), runs=5, master_seed=6)
        report = run_experiment(manifest, (1,), spec, classifiers=("knn",))
        confusion = report.cell(1, 0.7, "knn").confusion
        assert np.trace(confusion) >= 0.9 * confusion.sum()

    def test_unknown_classifier_rejected(self, manifest):
        with pytest.raises(ValueError, match="svm"):
            run_experiment(manifest, (1,), SplitSpec(), classifiers=("svm",))

    def test_sigma_grid_policy_runs(self, manifest):
        spec = SplitSpec(fractions=(0.7,), runs=5, master_seed=8)
        report = run_experiment(manifest, (1,), spec, classifiers=("pnn",),
                                pnn_sigma="grid")
        assert report.cell(1, 0.7, "pnn").avg >= 0.0


class TestRendering:
    def test_table_matches_golden_file(self):
        golden = (DATA / "table2_golden.txt").read_text()
        assert render_report(reference_table_report(), "table") == golden

    def test_headline_cells_present(self):
        text = render_report(reference_table_report(), "table")
        lines = text.splitlines()
        assert lines[0].split() == ["Block", "Training", "(%)", "Accuracy", "(%)",
                                    "PNN", "KNN"]
        top = lines[1].split()
        assert top == ["1", "70", "Max", "78.09", "82.70"]

    def test_single_cell_report_has_three_stat_rows(self):
        report = EvalReport({(1, 0.7, "knn"): CellStats(90.0, 80.0, 85.0)},
                            (1,), (0.7,), ("knn",), 5, 0)
        lines = render_report(report, "table").strip().splitlines()
        assert len(lines) == 4  # header + Max/Min/Avg
        assert [ln.split()[-2] if i == 1 else ln.split()[-2]
                for i, ln in enumerate(lines[1:2])]

    def test_csv_round_trip_exact(self, manifest):
        spec = SplitSpec(fractions=(0.5,), runs=5, master_seed=9)
        report = run_experiment(manifest, (1,), spec)
        parsed = parse_report_csv(render_report(report, "csv"))
        for (b, f, clf), cell in report.cells.items():
            got = parsed[(b, f, clf)]
            assert got["max"] == cell.max
            assert got["min"] == cell.min
            assert got["avg"] == cell.avg
            for r, acc in enumerate(cell.per_run, start=1):
                assert got[f"run{r:02d}"] == acc

    def test_unknown_format(self):
        with pytest.raises(ValueError, match="format"):
            render_report(reference_table_report(), "xml")


def test_manifest_without_masks_uses_full_frame(manifest, tmp_path):
    import csv as csv_mod
    path = tmp_path / "nomask.csv"
    rows = [("image", "label")] + [(str(e.image), e.class_name)
                                   for e in manifest.entries[:4]]
    with path.open("w", newline="") as fh:
        csv_mod.writer(fh).writerows(rows)
    from blockctm.datasets import load_manifest as load
    from blockctm.colors import transform_image
    from blockctm.features import BlockScheme, extract_block_features
    from blockctm.raster import read_image
    data = load(path)
    features = extract_manifest_features(data, 1)
    chroma = transform_image(read_image(data.entries[0].image))
    full = np.ones((chroma.height, chroma.width), dtype=bool)
    expected = extract_block_features(chroma, full, BlockScheme(1)).values
    np.testing.assert_array_equal(features[0], expected)


def test_feature_extraction_failure_names_image(manifest, tmp_path):
    import csv as csv_mod
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not an image")
    rows = [("image", "label", "seeds", "mask"),
            (str(manifest.entries[0].image), "a", "", ""),
            (str(manifest.entries[1].image), "a", "", ""),
            (str(bad), "b", "", ""), (str(bad), "b", "", "")]
    path = tmp_path / "manifest.csv"
    with path.open("w", newline="") as fh:
        csv_mod.writer(fh).writerows(rows)
    data = load_manifest(path)
    with pytest.raises(RuntimeError, match="bad.png"):
        extract_manifest_features(data, 1)
