"""
Procedural fixture corpus: small synthetic "leaf" images with polygon masks,
a generated pool of diseased samples, a GAN-loss fixture and a run config.

The corpus is drawn from a seed, so it is regenerated rather than stored.
"""
import math
import os
from typing import Dict, List, Optional, Tuple

import numpy as np
from PIL import Image, ImageDraw

from config.constants import MANIFEST_SCHEMA_VERSION
from Data.io import save_json, write_png
from Data.types import ClassLabel, Origin
from utils.log import get_logger
from utils.rng import RngStream, stage_stream

logger = get_logger("fixtures")

FIXTURE_SIZE = 64
LEAF_VERTICES = 24

# Source label -> number of images (60 in total)
DEFAULT_COUNTS: Dict[str, int] = {
    "healthy": 20,
    "red_spider_mite": 8,
    "rust_level_1": 12,
    "rust_level_2": 10,
    "rust_level_3": 5,
    "rust_level_4": 5,
}
POOL_PER_CLASS = 20

RUST_SPOTS = {"rust_level_1": 2, "rust_level_2": 5, "rust_level_3": 9, "rust_level_4": 14}
# Relabeled classes map back onto one source severity for drawing pool images
POOL_SOURCE = {
    ClassLabel.RED_SPIDER_MITE: "red_spider_mite",
    ClassLabel.RUST_LEVEL_LOW: "rust_level_1",
    ClassLabel.RUST_LEVEL_MEDIUM: "rust_level_2",
    ClassLabel.RUST_LEVEL_HIGH: "rust_level_3",
}

BACKGROUND = (0.35, 0.27, 0.2)
LEAF_GREEN = (0.22, 0.55, 0.18)
RUST_ORANGE = (0.85, 0.5, 0.1)
MITE_RED = (0.6, 0.22, 0.18)


def _rgb(color: Tuple[float, float, float], jitter: float, stream: RngStream) -> Tuple[int, int, int]:
    return tuple(int(round(255 * min(1.0, max(0.0, c + stream.uniform(-jitter, jitter))))) for c in color)


def leaf_polygon(stream: RngStream, size: int = FIXTURE_SIZE) -> List[Tuple[float, float]]:
    """Rotated ellipse outline, slightly off-centre."""
    cx = size / 2 + stream.uniform(-3, 3)
    cy = size / 2 + stream.uniform(-3, 3)
    a = stream.uniform(0.34, 0.44) * size
    b = stream.uniform(0.18, 0.26) * size
    theta = stream.uniform(0, math.pi)
    points = []
    for k in range(LEAF_VERTICES):
        t = 2 * math.pi * k / LEAF_VERTICES
        x, y = a * math.cos(t), b * math.sin(t)
        points.append((round(cx + x * math.cos(theta) - y * math.sin(theta), 2),
                       round(cy + x * math.sin(theta) + y * math.cos(theta), 2)))
    return points


def _inside_point(polygon: List[Tuple[float, float]], stream: RngStream) -> Tuple[float, float]:
    cx = sum(p[0] for p in polygon) / len(polygon)
    cy = sum(p[1] for p in polygon) / len(polygon)
    vx, vy = polygon[int(stream.integers(0, len(polygon)))]
    t = stream.uniform(0.0, 0.8)
    return cx + t * (vx - cx), cy + t * (vy - cy)


def draw_leaf(source_label: str, stream: RngStream, size: int = FIXTURE_SIZE) -> Tuple[np.ndarray, List[Tuple[float, float]]]:
    """
    Draw one leaf image.

    Args:
        source_label: One of the six source labels
        stream: Random stream for shape, colour and spots

    Returns:
        (float RGB image, leaf polygon)
    """
    canvas = Image.new("RGB", (size, size), _rgb(BACKGROUND, 0.05, stream))
    draw = ImageDraw.Draw(canvas)
    polygon = leaf_polygon(stream, size)
    green = LEAF_GREEN if source_label != "red_spider_mite" else (0.45, 0.55, 0.2)
    draw.polygon(polygon, fill=_rgb(green, 0.04, stream))

    if source_label in RUST_SPOTS:
        for _ in range(RUST_SPOTS[source_label]):
            x, y = _inside_point(polygon, stream)
            r = stream.uniform(1.5, 3.5)
            draw.ellipse((x - r, y - r, x + r, y + r), fill=_rgb(RUST_ORANGE, 0.05, stream))
    elif source_label == "red_spider_mite":
        for _ in range(40):
            x, y = _inside_point(polygon, stream)
            draw.point((x, y), fill=_rgb(MITE_RED, 0.05, stream))

    return np.asarray(canvas, dtype=np.float64) / 255.0, polygon


def add_artifact(img: np.ndarray, label: ClassLabel) -> np.ndarray:
    """Stamp a class-dependent band on the top rows, like a generator's signature."""
    out = img.copy()
    level = 0.2 + 0.15 * label.index
    out[:6, :, :] = level
    return out


def _sample_record(sample_id: str, image_path: str, label: str, mask: Optional[list], origin: Origin) -> dict:
    return {"id": sample_id, "image_path": image_path, "label": label, "mask": mask,
            "origin": origin.value, "split": None}


def make_fixture(directory: str, seed: int = 0, counts: Optional[Dict[str, int]] = None,
                 pool_per_class: int = POOL_PER_CLASS, artifact: bool = True) -> Dict[str, str]:
    """
    Write a complete fixture corpus.

    Layout:
        images/*.png, annotations.json     real leaves with source labels and polygons
        pool/*.png, pool.json              synthetic diseased leaves
        gan/                               GAN-loss fixture with identity mappings
        config.json                        run configuration pointing at all of the above

    Args:
        directory: Target directory
        seed: Drives every drawing decision
        counts: Images per source label (defaults to DEFAULT_COUNTS)
        pool_per_class: Synthetic images per diseased class
        artifact: Stamp a class-correlated band on synthetic images

    Returns:
        Paths of the written manifests and config
    """
    counts = dict(DEFAULT_COUNTS if counts is None else counts)
    unknown = sorted(set(counts) - set(DEFAULT_COUNTS))
    if unknown:
        raise ValueError(f"unknown source labels: {unknown}")
    os.makedirs(directory, exist_ok=True)

    real = []
    for label_no, (label, count) in enumerate(sorted(counts.items())):
        for i in range(count):
            sample_id = f"{label}_{i:03d}"
            img, polygon = draw_leaf(label, stage_stream(seed, "fixture/real", label_no, i))
            rel = f"images/{sample_id}.png"
            write_png(os.path.join(directory, rel), img)
            real.append(_sample_record(sample_id, rel, label, [list(p) for p in polygon], Origin.REAL))

    pool = []
    for label, source in POOL_SOURCE.items():
        for i in range(pool_per_class):
            sample_id = f"syn_{label.value}_{i:03d}"
            img, polygon = draw_leaf(source, stage_stream(seed, "fixture/pool", label.index, i))
            if artifact:
                img = add_artifact(img, label)
            rel = f"pool/{sample_id}.png"
            write_png(os.path.join(directory, rel), img)
            pool.append(_sample_record(sample_id, rel, label.value, [list(p) for p in polygon], Origin.SYNTHETIC))

    annotations_path = os.path.join(directory, "annotations.json")
    pool_path = os.path.join(directory, "pool.json")
    save_json({"schema_version": MANIFEST_SCHEMA_VERSION, "samples": real}, annotations_path)
    save_json({"schema_version": MANIFEST_SCHEMA_VERSION, "samples": pool}, pool_path)
    gan_dir = make_gan_fixture(os.path.join(directory, "gan"), seed)

    config_path = os.path.join(directory, "config.json")
    save_json({
        "master_seed": seed,
        "paths": {
            "input_manifest": "annotations.json",
            "image_root": ".",
            "output_dir": "out",
            "synthetic_pool": "pool.json",
            "gan_fixture": "gan",
        },
    }, config_path)
    logger.info("Wrote fixture with %d real and %d synthetic images to %s", len(real), len(pool), directory)
    return {"annotations": annotations_path, "pool": pool_path, "gan": gan_dir, "config": config_path}


def make_gan_fixture(directory: str, seed: int = 0, size: int = 16, batch: int = 3) -> str:
    """
    GAN-loss fixture: small x/ and y/ batches, identity mappings, all-0.5
    patch maps and a pix2pix sub-fixture whose generated images equal the targets.
    """
    stream = stage_stream(seed, "fixture/gan")
    for domain in ("x", "y"):
        for i in range(batch):
            write_png(os.path.join(directory, domain, f"{i:03d}.png"), stream.random(size=(size, size, 3)))
    for i in range(batch):
        img = stream.random(size=(size, size, 3))
        write_png(os.path.join(directory, "pix2pix", "target", f"{i:03d}.png"), img)
        write_png(os.path.join(directory, "pix2pix", "generated", f"{i:03d}.png"), img)

    half = np.full((batch, 4, 4), 0.5).tolist()
    save_json({"G": "identity", "F": "identity"}, os.path.join(directory, "mappings.json"))
    save_json({"d_y_real": half, "d_y_fake": half, "d_x_real": half, "d_x_fake": half},
              os.path.join(directory, "predictions.json"))
    save_json({"d_real": half, "d_fake": half}, os.path.join(directory, "pix2pix", "predictions.json"))
    return directory
