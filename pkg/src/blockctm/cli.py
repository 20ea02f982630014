"""Command-line interface: one subcommand per pipeline stage.

Usage errors exit 2 (click's convention); runtime failures print a single
``error: ...`` line on stderr and exit 1.
"""
from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import classify as clf
from .colors import transform_image
from .datasets import generate_synthetic_dataset, load_manifest, two_tone_demo
from .evaluate import SplitSpec, extract_manifest_features, render_report, \
    run_experiment, save_report
from .features import BlockScheme, FeatureRecord, extract_block_features, \
    write_feature_table, write_features_binary
from .raster import decode_seg_mask, read_image, read_seed_mask, write_seg_mask
from .segmentation import SegmentationParams, segment_iterated

BLOCK_CHOICES = ("1", "4", "16", "64")


def _fail_cleanly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, RuntimeError, OSError) as exc:
            message = " ".join(str(exc).split())
            click.echo(f"error: {message}", err=True)
            sys.exit(1)
    return wrapper


@click.group()
def cli():
    """Block-based image classification toolkit."""


@cli.command()
@click.option("--image", required=True, type=click.Path(path_type=Path))
@click.option("--seeds", required=True, type=click.Path(path_type=Path),
              help="Seed PNG: 0 unknown, 1 foreground, 2 background.")
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--lam", type=float, default=1.0, show_default=True,
              help="Smoothness weight.")
@click.option("--sigma-c", type=float, default=None,
              help="Contrast scale; default is the mean neighbour colour distance.")
@click.option("--bins", type=int, default=16, show_default=True)
@click.option("--max-rounds", type=int, default=10, show_default=True)
@_fail_cleanly
def segment(image, seeds, out, lam, sigma_c, bins, max_rounds):
    """Segment an image from seed scribbles; writes mask PNG + JSON sidecar."""
    chroma = transform_image(read_image(image))
    seed_mask = read_seed_mask(seeds)
    params = SegmentationParams(lam=lam, sigma_c=sigma_c, bins=bins,
                                max_rounds=max_rounds)
    result = segment_iterated(chroma, seed_mask, params)
    write_seg_mask(result, out)
    click.echo(f"energy={result.energy!r} rounds={result.rounds} "
               f"foreground={int(result.foreground.sum())}")


@cli.command()
@click.option("--image", required=True, type=click.Path(path_type=Path))
@click.option("--mask", type=click.Path(path_type=Path), default=None,
              help="Segmentation PNG; omitted = whole image is foreground.")
@click.option("--scheme", type=click.Choice(BLOCK_CHOICES), default="1",
              show_default=True, help="Block count.")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Output file; stdout when omitted.")
@click.option("--fmt", type=click.Choice(("csv", "ctmf")), default="csv",
              show_default=True)
@click.option("--image-id", default=None, help="Record id; defaults to the file name.")
@click.option("--label", default="", help="Class label stored in the record.")
@_fail_cleanly
def extract(image, mask, scheme, out, fmt, image_id, label):
    """Extract the block CTM feature vector of one image."""
    chroma = transform_image(read_image(image))
    if mask is not None:
        fg = decode_seg_mask(Path(mask).read_bytes())
    else:
        fg = np.ones((chroma.height, chroma.width), dtype=bool)
    block_scheme = BlockScheme.from_blocks(int(scheme))
    features = extract_block_features(chroma, fg, block_scheme)
    record = FeatureRecord(image_id or Path(image).name, label,
                           block_scheme.grid, features.values)
    if fmt == "csv":
        text = write_feature_table([record], out)
        if out is None:
            click.echo(text, nl=False)
    else:
        if out is None:
            raise ValueError("--out is required for the ctmf binary format")
        write_features_binary([record], out)


@cli.command()
@click.option("--manifest", required=True, type=click.Path(path_type=Path))
@click.option("--scheme", type=click.Choice(BLOCK_CHOICES), default="1",
              show_default=True)
@click.option("--classifier", type=click.Choice(("knn", "pnn")), default="knn",
              show_default=True)
@click.option("--sigma", type=float, default=0.5, show_default=True,
              help="PNN kernel width (normalized feature space).")
@click.option("--k", type=int, default=1, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@_fail_cleanly
def train(manifest, scheme, classifier, sigma, k, out):
    """Train a classifier on every manifest entry and save the model file."""
    data = load_manifest(manifest)
    blocks = int(scheme)
    features = extract_manifest_features(data, blocks)
    dataset = clf.LabeledDataset(features, data.labels, data.class_names)
    grid = BlockScheme.from_blocks(blocks).grid
    if classifier == "knn":
        model = clf.train_knn(dataset, k=k, grid=grid)
    else:
        model = clf.train_pnn(dataset, sigma=sigma, grid=grid)
    clf.save_model_file(model, out)
    click.echo(f"trained {classifier} on {features.shape[0]} images "
               f"({len(data.class_names)} classes, dim {features.shape[1]})")


@cli.command(name="classify")
@click.option("--model", "model_path", required=True, type=click.Path(path_type=Path))
@click.option("--image", required=True, type=click.Path(path_type=Path))
@click.option("--mask", type=click.Path(path_type=Path), default=None)
@_fail_cleanly
def classify_cmd(model_path, image, mask):
    """Classify one image; prints a JSON object with label and scores."""
    model = clf.load_model_file(model_path)
    chroma = transform_image(read_image(image))
    if mask is not None:
        fg = decode_seg_mask(Path(mask).read_bytes())
    else:
        fg = np.ones((chroma.height, chroma.width), dtype=bool)
    scheme = BlockScheme(model.grid or 1)
    features = extract_block_features(chroma, fg, scheme)
    if isinstance(model, clf.KnnModel):
        result = clf.knn_classify(model, features.values)
        payload = {"label": result.label,
                   "class": model.class_names[result.label],
                   "classifier": "knn",
                   "nearest_distance": result.nearest_distance}
    else:
        result = clf.pnn_classify(model, features.values)
        payload = {"label": result.label,
                   "class": model.class_names[result.label],
                   "classifier": "pnn",
                   "densities": {name: float(result.densities[i])
                                 for i, name in enumerate(model.class_names)}}
    click.echo(json.dumps(payload))


@cli.command()
@click.option("--manifest", required=True, type=click.Path(path_type=Path))
@click.option("--scheme", "schemes", type=click.Choice(BLOCK_CHOICES),
              multiple=True, default=("1",), show_default=True,
              help="Block counts; repeat the flag for several.")
@click.option("--fractions", default="0.3,0.5,0.7", show_default=True,
              help="Comma-separated training fractions.")
@click.option("--runs", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--classifier", type=click.Choice(("knn", "pnn", "both")),
              default="both", show_default=True)
@click.option("--sigma", default="0.5", show_default=True,
              help="PNN kernel width, or 'grid' for the validation search.")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.option("--fmt", type=click.Choice(("table", "csv")), default="table",
              show_default=True)
@click.option("--self-test", is_flag=True, hidden=True,
              help="Diagnostic: evaluate on the training set.")
@_fail_cleanly
def evaluate(manifest, schemes, fractions, runs, seed, classifier, sigma, out,
             fmt, self_test):
    """Run the repeated-random-split protocol and print the accuracy report."""
    data = load_manifest(manifest)
    try:
        fracs = tuple(float(f) for f in fractions.split(","))
    except ValueError:
        raise ValueError(f"--fractions must be comma-separated numbers, got {fractions!r}")
    spec = SplitSpec(fractions=fracs, runs=runs, master_seed=seed)
    names = ("pnn", "knn") if classifier == "both" else (classifier,)
    pnn_sigma = sigma if sigma == "grid" else float(sigma)
    report = run_experiment(data, tuple(int(s) for s in schemes), spec,
                            classifiers=names, pnn_sigma=pnn_sigma,
                            self_test=self_test)
    if out is not None:
        save_report(report, out, fmt)
    else:
        click.echo(render_report(report, fmt), nl=False)


@cli.command()
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--classes", type=int, default=5, show_default=True)
@click.option("--per-class", type=int, default=40, show_default=True)
@click.option("--size", type=int, default=64, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--demo", is_flag=True,
              help="Write the two-tone segmentation demo instead of a dataset.")
@_fail_cleanly
def synth(out, classes, per_class, size, seed, demo):
    """Generate the synthetic blob dataset (or the two-tone demo pair)."""
    if demo:
        paths = two_tone_demo(out, size=size)
        click.echo("\n".join(str(p) for p in paths.values()))
    else:
        manifest = generate_synthetic_dataset(out, classes=classes,
                                              per_class=per_class, size=size,
                                              seed=seed)
        click.echo(str(manifest))


@cli.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--model-dir", type=click.Path(path_type=Path), default=None,
              help="Directory of CTMM model files (env BLOCKCTM_MODEL_DIR overrides "
                   "the ./models default).")
@click.option("--ui-dir", type=click.Path(path_type=Path), default=None,
              help="Static frontend directory; ./frontend/dist when present.")
@click.option("--capacity", type=int, default=64, show_default=True,
              help="Maximum live annotation sessions (LRU eviction).")
@_fail_cleanly
def serve(port, host, model_dir, ui_dir, capacity):
    """Start the HTTP annotation/classification service."""
    import uvicorn

    from .service.app import create_app
    app = create_app(model_dir=model_dir, session_capacity=capacity,
                     frontend_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


def main():
    cli()


if __name__ == "__main__":
    main()
