"""Repeated stratified-split evaluation with max/min/avg accuracy reporting.

Each run draws one per-class permutation from a seed derived from (master
seed, run index); every training fraction takes a prefix of it, so splits at
different fractions of the same run are nested and the whole experiment is
reproducible bit-for-bit. Features are extracted once per (image, scheme)
and cached across runs.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classify import LabeledDataset, knn_classify_batch, pnn_classify_batch, \
    train_knn, train_pnn
from .colors import transform_image
from .datasets import DatasetManifest
from .features import BlockScheme, extract_block_features
from .raster import decode_seg_mask, read_image

CLASSIFIER_NAMES = ("pnn", "knn")
SIGMA_GRID = (0.1, 0.25, 0.5, 1.0)


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, ...] = (0.3, 0.5, 0.7)
    runs: int = 5
    master_seed: int = 0

    def __post_init__(self):
        if not self.fractions:
            raise ValueError("at least one training fraction is required")
        for f in self.fractions:
            if not 0.0 < f < 1.0:
                raise ValueError(f"training fraction must be in (0, 1), got {f}")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")


def stratified_split(source, fraction: float,
                     seed) -> tuple[np.ndarray, np.ndarray]:
    """Per-class random split: floor(fraction * n) training samples, min 1.

    `source` is a DatasetManifest or a plain label array; `seed` is anything
    np.random.default_rng accepts (int or SeedSequence). Returns sorted train
    and test index arrays; together they cover every sample exactly once.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"training fraction must be in (0, 1), got {fraction}")
    labels = source.labels if isinstance(source, DatasetManifest) else source
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    train: list[np.ndarray] = []
    test: list[np.ndarray] = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        perm = rng.permutation(members)
        n_train = max(1, int(math.floor(fraction * members.size)))
        if n_train >= members.size:
            raise ValueError(f"class {c} has too few samples ({members.size}) "
                             f"for fraction {fraction}")
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass
class CellStats:
    """One (block count, fraction, classifier) cell of the report."""

    max: float
    min: float
    avg: float
    per_run: list[float] | None = None
    confusion: np.ndarray | None = None  # (C, C) int, summed over runs

    def validate(self):
        if not (self.min <= self.avg <= self.max):
            raise ValueError("cell violates min <= avg <= max")
        if self.per_run is not None:
            if abs(self.avg - float(np.mean(self.per_run))) > 1e-9:
                raise ValueError("avg does not match per-run accuracies")


@dataclass
class EvalReport:
    cells: dict[tuple[int, float, str], CellStats]
    blocks: tuple[int, ...]
    fractions: tuple[float, ...]
    classifiers: tuple[str, ...]
    runs: int
    master_seed: int
    class_names: tuple[str, ...] = ()
    diagnostic_self_test: bool = False

    def cell(self, blocks: int, fraction: float, classifier: str) -> CellStats:
        return self.cells[(blocks, fraction, classifier)]


def extract_manifest_features(manifest: DatasetManifest, blocks: int,
                              cache: dict | None = None) -> np.ndarray:
    """(N, 48*B) feature matrix for every manifest entry.

    Images without a mask path are treated as all-foreground. `cache` maps
    (image path, blocks) to a stored vector and may be shared across calls.
    """
    scheme = BlockScheme.from_blocks(blocks)
    rows = []
    for entry in manifest.entries:
        key = (str(entry.image), blocks)
        if cache is not None and key in cache:
            rows.append(cache[key])
            continue
        try:
            img = transform_image(read_image(entry.image))
            if entry.mask is not None:
                mask = decode_seg_mask(entry.mask.read_bytes())
            else:
                mask = np.ones((img.height, img.width), dtype=bool)
            vec = extract_block_features(img, mask, scheme).values
        except Exception as exc:
            raise RuntimeError(f"feature extraction failed for {entry.image}: {exc}") from exc
        if cache is not None:
            cache[key] = vec
        rows.append(vec)
    return np.vstack(rows)


def _select_pnn_sigma(train_data: LabeledDataset, seed) -> float:
    """Grid-search sigma on an internal stratified 80/20 validation split."""
    labels = train_data.labels
    try:
        fit_idx, val_idx = stratified_split(labels, 0.8, seed)
    except ValueError:
        return 0.5  # classes too small to sub-split; fall back to the default
    fit = LabeledDataset(train_data.features[fit_idx], labels[fit_idx],
                         train_data.class_names)
    best_sigma, best_acc = None, -1.0
    for sigma in SIGMA_GRID:
        model = train_pnn(fit, sigma=sigma)
        pred = pnn_classify_batch(model, train_data.features[val_idx])
        acc = float(np.mean(pred == labels[val_idx]))
        if acc > best_acc:
            best_sigma, best_acc = sigma, acc
    return best_sigma


def run_experiment(manifest: DatasetManifest, blocks: tuple[int, ...] = (1,),
                   spec: SplitSpec = SplitSpec(),
                   classifiers: tuple[str, ...] = CLASSIFIER_NAMES,
                   knn_k: int = 1, pnn_sigma: float | str = 0.5,
                   cache: dict | None = None,
                   self_test: bool = False) -> EvalReport:
    """Run the full repeated-split protocol and aggregate per-cell statistics.

    `pnn_sigma` is either a fixed value or the string "grid" for the internal
    validation search. `self_test` is the degenerate diagnostic mode where
    the test set equals the training set.
    """
    for name in classifiers:
        if name not in CLASSIFIER_NAMES:
            raise ValueError(f"unknown classifier {name!r} (expected knn or pnn)")
    if cache is None:
        cache = {}
    features = {b: extract_manifest_features(manifest, b, cache) for b in blocks}
    labels = manifest.labels
    n_classes = len(manifest.class_names)

    per_run: dict[tuple[int, float, str], list[float]] = {
        (b, f, c): [] for b in blocks for f in spec.fractions for c in classifiers}
    confusion: dict[tuple[int, float, str], np.ndarray] = {
        key: np.zeros((n_classes, n_classes), dtype=np.int64) for key in per_run}

    for run in range(1, spec.runs + 1):
        split_seed = np.random.SeedSequence([spec.master_seed, run])
        for fraction in spec.fractions:
            train_idx, test_idx = stratified_split(labels, fraction, split_seed)
            if self_test:
                test_idx = train_idx
            for b in blocks:
                train_data = LabeledDataset(features[b][train_idx], labels[train_idx],
                                            manifest.class_names)
                test_x = features[b][test_idx]
                test_y = labels[test_idx]
                for name in classifiers:
                    if name == "knn":
                        model = train_knn(train_data, k=knn_k)
                        pred = knn_classify_batch(model, test_x)
                    else:
                        if pnn_sigma == "grid":
                            sigma = _select_pnn_sigma(
                                train_data,
                                np.random.SeedSequence([spec.master_seed, run, 9901]))
                        else:
                            sigma = float(pnn_sigma)
                        model = train_pnn(train_data, sigma=sigma)
                        pred = pnn_classify_batch(model, test_x)
                    acc = 100.0 * float(np.mean(pred == test_y))
                    per_run[(b, fraction, name)].append(acc)
                    np.add.at(confusion[(b, fraction, name)], (test_y, pred), 1)

    cells = {}
    for key, accs in per_run.items():
        cells[key] = CellStats(max=max(accs), min=min(accs), avg=float(np.mean(accs)),
                               per_run=list(accs), confusion=confusion[key])
        cells[key].validate()
    return EvalReport(cells, tuple(blocks), tuple(spec.fractions), tuple(classifiers),
                      spec.runs, spec.master_seed, manifest.class_names,
                      diagnostic_self_test=self_test)


def render_report(report: EvalReport, fmt: str = "table") -> str:
    if fmt == "table":
        return _render_table(report)
    if fmt == "csv":
        return _render_csv(report)
    raise ValueError(f"unknown report format: {fmt!r} (expected table or csv)")


_STATS = ("Max", "Min", "Avg")


def _render_table(report: EvalReport) -> str:
    names = [c.upper() for c in report.classifiers]
    header = ["Block", "Training (%)", "Accuracy (%)"] + names
    rows = [header]
    for b in report.blocks:
        first_of_block = True
        for fraction in report.fractions:
            for stat in _STATS:
                row = [str(b) if first_of_block else "",
                       f"{round(fraction * 100):d}" if stat == "Max" else "",
                       stat]
                for clf in report.classifiers:
                    cell = report.cell(b, fraction, clf)
                    row.append(f"{getattr(cell, stat.lower()):.2f}")
                rows.append(row)
                first_of_block = False
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for row in rows:
        cells = [text.ljust(widths[i]) for i, text in enumerate(row[:3])]
        cells += [text.rjust(widths[3 + j]) for j, text in enumerate(row[3:])]
        lines.append("  ".join(cells).rstrip())
    if report.diagnostic_self_test:
        lines.append("")
        lines.append("note: diagnostic self-test mode (test set = training set)")
    return "\n".join(lines) + "\n"


def _render_csv(report: EvalReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["block", "training_fraction", "classifier", "statistic",
                     "accuracy_percent"])
    for b in report.blocks:
        for fraction in report.fractions:
            for clf in report.classifiers:
                cell = report.cell(b, fraction, clf)
                for stat in ("max", "min", "avg"):
                    writer.writerow([b, repr(fraction), clf, stat,
                                     repr(getattr(cell, stat))])
                if cell.per_run is not None:
                    for r, acc in enumerate(cell.per_run, start=1):
                        writer.writerow([b, repr(fraction), clf, f"run{r:02d}", repr(acc)])
    return out.getvalue()


def parse_report_csv(text: str) -> dict[tuple[int, float, str], dict[str, float]]:
    """Inverse of the CSV rendering; numeric cells round-trip exactly."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["block", "training_fraction", "classifier",
                               "statistic", "accuracy_percent"]:
        raise ValueError("not a report CSV (missing header)")
    cells: dict[tuple[int, float, str], dict[str, float]] = {}
    for row in rows[1:]:
        if not row:
            continue
        key = (int(row[0]), float(row[1]), row[2])
        cells.setdefault(key, {})[row[3]] = float(row[4])
    return cells


def save_report(report: EvalReport, path: str | Path, fmt: str = "table"):
    Path(path).write_text(render_report(report, fmt))
