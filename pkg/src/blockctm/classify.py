"""Nearest-neighbour and Gaussian kernel-density classifiers over CTM vectors.

Both classifiers work in z-scored feature space (the moments live on wildly
different scales, so raw Euclidean distance would be dominated by a handful
of dimensions). Models serialize to a small binary format for reuse by the
CLI and the HTTP service.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

STD_FLOOR = 1e-9
_MODEL_MAGIC = b"CTMM"
_MODEL_VERSION = 1
_KIND_KNN = 1
_KIND_PNN = 2

FUSION_RULES = ("knn-priority", "majority-with-knn-tiebreak")


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray  # (N, d) float64
    labels: np.ndarray  # (N,) int
    class_names: tuple[str, ...]

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise ValueError(f"features must be a non-empty (N, d) matrix, got {feats.shape}")
        if labs.shape != (feats.shape[0],):
            raise ValueError("labels must align with features")
        if labs.min() < 0 or labs.max() >= len(self.class_names):
            raise ValueError("labels must index into class_names")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    def require_all_classes(self):
        present = np.unique(self.labels)
        missing = sorted(set(range(len(self.class_names))) - set(int(c) for c in present))
        if missing:
            names = ", ".join(self.class_names[m] for m in missing)
            raise ValueError(f"training data has no samples for: {names}")


@dataclass(frozen=True)
class Normalizer:
    mean: np.ndarray  # (d,)
    scale: np.ndarray  # (d,), stddev floored at STD_FLOOR

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.scale

    def invert(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.scale + self.mean


def fit_normalizer(features: np.ndarray) -> Normalizer:
    """Per-dimension z-score parameters (population stddev, floored)."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise ValueError(f"features must be a non-empty (N, d) matrix, got {feats.shape}")
    mean = feats.mean(axis=0)
    std = np.sqrt(np.mean((feats - mean) ** 2, axis=0))
    return Normalizer(mean, np.where(std < STD_FLOOR, STD_FLOOR, std))


@dataclass(frozen=True)
class KnnModel:
    train: np.ndarray  # (N, d), normalized
    labels: np.ndarray  # (N,)
    k: int
    normalizer: Normalizer
    class_names: tuple[str, ...]
    grid: int = 0  # block-scheme side used at feature time, 0 if unspecified

    @property
    def dim(self) -> int:
        return self.train.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class PnnModel:
    train: np.ndarray
    labels: np.ndarray
    sigma: float
    normalizer: Normalizer
    class_names: tuple[str, ...]
    grid: int = 0

    @property
    def dim(self) -> int:
        return self.train.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class KnnResult:
    label: int
    nearest_distance: float
    n_classes: int


@dataclass(frozen=True)
class PnnResult:
    label: int
    densities: np.ndarray  # (n_classes,), always > 0

    @property
    def n_classes(self) -> int:
        return self.densities.shape[0]


def train_knn(data: LabeledDataset, k: int = 1, grid: int = 0) -> KnnModel:
    data.require_all_classes()
    if not 1 <= k <= data.features.shape[0]:
        raise ValueError(f"k must be in [1, {data.features.shape[0]}], got {k}")
    norm = fit_normalizer(data.features)
    return KnnModel(norm.apply(data.features), data.labels, k, norm,
                    data.class_names, grid)


def train_pnn(data: LabeledDataset, sigma: float = 0.5, grid: int = 0) -> PnnModel:
    data.require_all_classes()
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    norm = fit_normalizer(data.features)
    return PnnModel(norm.apply(data.features), data.labels, float(sigma), norm,
                    data.class_names, grid)


def _check_dim(expected: int, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (expected,):
        raise ValueError(f"feature dimension mismatch: expected {expected}, "
                         f"got {x.shape[0] if x.ndim == 1 else x.shape}")
    return x


def knn_classify(model: KnnModel, x: np.ndarray) -> KnnResult:
    """Label of the nearest training sample; ties go to the lowest index."""
    z = model.normalizer.apply(_check_dim(model.dim, x))
    d2 = ((model.train - z) ** 2).sum(axis=1)
    if model.k == 1:
        i = int(np.argmin(d2))
        return KnnResult(int(model.labels[i]), float(np.sqrt(d2[i])), model.n_classes)
    order = np.argsort(d2, kind="stable")[:model.k]
    votes = np.bincount(model.labels[order], minlength=model.n_classes)
    return KnnResult(int(np.argmax(votes)), float(np.sqrt(d2[order[0]])), model.n_classes)


def knn_classify_batch(model: KnnModel, xs: np.ndarray) -> np.ndarray:
    """Vectorized k=1 labelling of many queries (same tie rule as knn_classify)."""
    zs = model.normalizer.apply(np.asarray(xs, dtype=np.float64))
    labels = np.empty(zs.shape[0], dtype=np.int64)
    for i, z in enumerate(zs):
        d2 = ((model.train - z) ** 2).sum(axis=1)
        if model.k == 1:
            labels[i] = model.labels[int(np.argmin(d2))]
        else:
            order = np.argsort(d2, kind="stable")[:model.k]
            labels[i] = np.argmax(np.bincount(model.labels[order],
                                              minlength=model.n_classes))
    return labels


def _pnn_log_densities(model: PnnModel, z: np.ndarray) -> np.ndarray:
    d2 = ((model.train - z) ** 2).sum(axis=1)
    a = -d2 / (2.0 * model.sigma ** 2)
    logf = np.empty(model.n_classes)
    for c in range(model.n_classes):
        members = a[model.labels == c]
        logf[c] = logsumexp(members) - np.log(members.size)
    return logf


def pnn_classify(model: PnnModel, x: np.ndarray) -> PnnResult:
    """Class of highest kernel-density estimate; ties go to the lowest class id.

    Per class c the density is mean_i exp(-||z - z_i||^2 / (2 sigma^2)) over
    that class's training vectors. The argmax is taken in log space, so tiny
    sigmas stay well-defined; reported densities are floored at the smallest
    positive float to keep them strictly positive after exponentiation.
    """
    z = model.normalizer.apply(_check_dim(model.dim, x))
    logf = _pnn_log_densities(model, z)
    densities = np.maximum(np.exp(logf), np.finfo(np.float64).tiny)
    return PnnResult(int(np.argmax(logf)), densities)


def pnn_classify_batch(model: PnnModel, xs: np.ndarray) -> np.ndarray:
    zs = model.normalizer.apply(np.asarray(xs, dtype=np.float64))
    labels = np.empty(zs.shape[0], dtype=np.int64)
    for i, z in enumerate(zs):
        labels[i] = np.argmax(_pnn_log_densities(model, z))
    return labels


def fuse_decisions(knn_out: KnnResult, pnn_out: PnnResult,
                   rule: str = "knn-priority") -> int:
    """Combine the two classifier outputs under a named deterministic rule."""
    if knn_out.n_classes != pnn_out.n_classes:
        raise ValueError(f"class-set mismatch: KNN has {knn_out.n_classes} classes, "
                         f"PNN has {pnn_out.n_classes}")
    if rule == "knn-priority":
        return knn_out.label
    if rule == "majority-with-knn-tiebreak":
        if knn_out.label == pnn_out.label:
            return knn_out.label
        # two voters disagreeing is a tie; the KNN vote breaks it
        return knn_out.label
    raise ValueError(f"unknown fusion rule: {rule!r} (expected one of {FUSION_RULES})")


def _pack_str(out: io.BytesIO, text: str):
    raw = text.encode("utf-8")
    out.write(struct.pack("<H", len(raw)))
    out.write(raw)


def save_model(model: KnnModel | PnnModel) -> bytes:
    out = io.BytesIO()
    out.write(_MODEL_MAGIC)
    kind = _KIND_KNN if isinstance(model, KnnModel) else _KIND_PNN
    out.write(struct.pack("<HBH", _MODEL_VERSION, kind, model.grid))
    out.write(struct.pack("<I", model.n_classes))
    for name in model.class_names:
        _pack_str(out, name)
    n, d = model.train.shape
    out.write(struct.pack("<II", n, d))
    out.write(model.normalizer.mean.astype("<f8").tobytes())
    out.write(model.normalizer.scale.astype("<f8").tobytes())
    if kind == _KIND_KNN:
        out.write(struct.pack("<I", model.k))
    else:
        out.write(struct.pack("<d", model.sigma))
    out.write(model.labels.astype("<u4").tobytes())
    out.write(model.train.astype("<f8").tobytes())
    return out.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self._buf = io.BytesIO(data)

    def take(self, n: int) -> bytes:
        raw = self._buf.read(n)
        if len(raw) != n:
            raise ValueError("truncated model stream")
        return raw

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def text(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")


def load_model(data: bytes) -> KnnModel | PnnModel:
    r = _Reader(data)
    if r.take(4) != _MODEL_MAGIC:
        raise ValueError("not a CTMM model stream")
    version, kind, grid = r.unpack("<HBH")
    if version != _MODEL_VERSION:
        raise ValueError(f"unsupported CTMM model version: {version}")
    if kind not in (_KIND_KNN, _KIND_PNN):
        raise ValueError(f"unknown CTMM classifier kind: {kind}")
    (n_classes,) = r.unpack("<I")
    names = tuple(r.text() for _ in range(n_classes))
    n, d = r.unpack("<II")
    mean = np.frombuffer(r.take(d * 8), dtype="<f8").astype(np.float64)
    scale = np.frombuffer(r.take(d * 8), dtype="<f8").astype(np.float64)
    norm = Normalizer(mean, scale)
    if kind == _KIND_KNN:
        (k,) = r.unpack("<I")
    else:
        (sigma,) = r.unpack("<d")
    labels = np.frombuffer(r.take(n * 4), dtype="<u4").astype(np.int64)
    train = np.frombuffer(r.take(n * d * 8), dtype="<f8").astype(np.float64).reshape(n, d)
    if kind == _KIND_KNN:
        return KnnModel(train, labels, k, norm, names, grid)
    return PnnModel(train, labels, sigma, norm, names, grid)


def save_model_file(model: KnnModel | PnnModel, path: str | Path) -> None:
    Path(path).write_bytes(save_model(model))


def load_model_file(path: str | Path) -> KnnModel | PnnModel:
    return load_model(Path(path).read_bytes())
