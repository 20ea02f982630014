"""Block-based image classification toolkit.

Pipeline: seeded graph-cut segmentation -> chroma-space color texture
moments over 1/4/16/64 blocks -> KNN / PNN classification, with a
repeated-random-split evaluation harness, a CLI and an HTTP service.
"""

from .classify import (KnnModel, LabeledDataset, Normalizer, PnnModel,
                       fit_normalizer, fuse_decisions, knn_classify,
                       load_model, pnn_classify, save_model, train_knn,
                       train_pnn)
from .colors import ChromaVector, HsvPixel, hsv_to_chroma, rgb_to_hsv, transform_image
from .datasets import DatasetManifest, generate_synthetic_dataset, load_manifest, \
    two_tone_demo
from .evaluate import EvalReport, SplitSpec, render_report, run_experiment, \
    stratified_split
from .features import (TEMPLATES, BlockScheme, FeatureVector, apply_templates,
                       ctm_vector, extract_block_features, masked_moments)
from .raster import ChromaImage, RgbImage, SeedMask, SegMask, read_image, \
    read_seed_mask
from .segmentation import (AppearanceModel, PixelGraph, SegmentationParams,
                           build_energy, estimate_seed_models, max_flow_min_cut,
                           segment_iterated)

__version__ = "0.1.0"

__all__ = [
    "AppearanceModel", "BlockScheme", "ChromaImage", "ChromaVector",
    "DatasetManifest", "EvalReport", "FeatureVector", "HsvPixel", "KnnModel",
    "LabeledDataset", "Normalizer", "PixelGraph", "PnnModel", "RgbImage",
    "SeedMask", "SegMask", "SegmentationParams", "SplitSpec", "TEMPLATES",
    "apply_templates", "build_energy", "ctm_vector", "estimate_seed_models",
    "extract_block_features", "fit_normalizer", "fuse_decisions",
    "generate_synthetic_dataset", "hsv_to_chroma", "knn_classify",
    "load_manifest", "load_model", "masked_moments", "max_flow_min_cut",
    "pnn_classify", "read_image", "read_seed_mask", "render_report",
    "rgb_to_hsv", "run_experiment", "save_model", "segment_iterated",
    "stratified_split", "train_knn", "train_pnn", "transform_image",
    "two_tone_demo",
]
