"""
Data I/O module for leafaug.
Handles manifests (JSON), images (PNG) and tabular outputs (CSV).
"""
import json
import os
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from PIL import Image, UnidentifiedImageError

from config.constants import MANIFEST_SCHEMA_VERSION
from Data.types import ClassLabel, DatasetManifest, LabeledSample, Origin, PolygonMask, Split, as_image
from utils.errors import (
    DataError, DuplicateIdError, ManifestError, MissingImageError, SchemaError, ShapeMismatchError,
)
from utils.log import get_logger

logger = get_logger("io")

SAMPLE_FIELDS = ("id", "image_path", "label", "mask", "origin", "split")
TOP_LEVEL_FIELDS = ("schema_version", "samples")

LabelParser = Callable[[str], ClassLabel]


def _parse_enum(enum_cls, value: Any, field: str, index: int):
    try:
        return enum_cls(value)
    except ValueError:
        raise SchemaError(f"sample {index}: invalid value {value!r}", field=field) from None


def _parse_mask(raw: Any, index: int) -> Optional[PolygonMask]:
    if raw is None:
        return None
    if not isinstance(raw, list) or not all(
        isinstance(p, list) and len(p) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p)
        for p in raw
    ):
        raise SchemaError(f"sample {index}: mask must be null or a list of [x, y] pairs", field="mask")
    if len(raw) < 3:
        raise SchemaError(f"sample {index}: mask polygon needs at least 3 points", field="mask")
    return PolygonMask(tuple((float(x), float(y)) for x, y in raw))


def _parse_sample(raw: Any, index: int, label_parser: LabelParser) -> LabeledSample:
    if not isinstance(raw, dict):
        raise SchemaError(f"sample {index}: expected an object", field="samples")
    missing = [f for f in SAMPLE_FIELDS if f not in raw]
    extra = sorted(set(raw) - set(SAMPLE_FIELDS))
    if missing:
        raise SchemaError(f"sample {index}: missing field", field=missing[0])
    if extra:
        raise SchemaError(f"sample {index}: unexpected field", field=extra[0])
    for name in ("id", "image_path", "label", "origin"):
        if not isinstance(raw[name], str) or not raw[name]:
            raise SchemaError(f"sample {index}: expected a non-empty string", field=name)

    try:
        label = label_parser(raw["label"])
    except ValueError:
        raise SchemaError(f"sample {index}: unknown label {raw['label']!r}", field="label") from None
    split = None if raw["split"] is None else _parse_enum(Split, raw["split"], "split", index)
    return LabeledSample(
        id=raw["id"],
        image_path=raw["image_path"],
        label=label,
        mask=_parse_mask(raw["mask"], index),
        origin=_parse_enum(Origin, raw["origin"], "origin", index),
        split=split,
    )


def resolve_image_path(sample: LabeledSample, image_root: str) -> str:
    """Absolute path of a sample's image; relative paths are taken from image_root."""
    if os.path.isabs(sample.image_path):
        return sample.image_path
    return os.path.normpath(os.path.join(image_root, sample.image_path))


def load_manifest(path: str, image_root: Optional[str] = None, check_files: bool = True,
                  label_parser: LabelParser = ClassLabel) -> DatasetManifest:
    """
    Load and validate a manifest file.

    Args:
        path: Manifest JSON path
        image_root: Directory relative image paths resolve against
            (defaults to the manifest's directory)
        check_files: Whether every referenced image must exist
        label_parser: Maps the stored label string to a ClassLabel

    Returns:
        Validated DatasetManifest
    """
    if not os.path.isfile(path):
        raise ManifestError(f"manifest not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON ({e})") from None

    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: top level must be an object")
    for name in TOP_LEVEL_FIELDS:
        if name not in raw:
            raise SchemaError(f"{path}: missing top-level field", field=name)
    extra = sorted(set(raw) - set(TOP_LEVEL_FIELDS))
    if extra:
        raise SchemaError(f"{path}: unexpected top-level field", field=extra[0])
    if raw["schema_version"] != MANIFEST_SCHEMA_VERSION:
        raise SchemaError(f"{path}: unsupported schema version {raw['schema_version']!r}",
                          field="schema_version")
    if not isinstance(raw["samples"], list):
        raise SchemaError(f"{path}: samples must be a list", field="samples")

    samples = [_parse_sample(s, i, label_parser) for i, s in enumerate(raw["samples"])]
    seen = set()
    for sample in samples:
        if sample.id in seen:
            raise DuplicateIdError(sample.id)
        seen.add(sample.id)

    manifest = DatasetManifest(tuple(samples), raw["schema_version"])
    if check_files:
        root = image_root if image_root is not None else os.path.dirname(os.path.abspath(path))
        for sample in manifest.samples:
            image_path = resolve_image_path(sample, root)
            if not os.path.isfile(image_path):
                raise MissingImageError(sample.id, image_path)
    logger.debug("Loaded %d samples from %s", len(manifest), path)
    return manifest


def manifest_to_dict(manifest: DatasetManifest) -> Dict[str, Any]:
    return {
        "schema_version": manifest.schema_version,
        "samples": [
            {
                "id": s.id,
                "image_path": s.image_path,
                "label": s.label.value,
                "mask": None if s.mask is None else s.mask.to_list(),
                "origin": s.origin.value,
                "split": None if s.split is None else s.split.value,
            }
            for s in manifest.samples
        ],
    }


def save_manifest(manifest: DatasetManifest, path: str) -> None:
    """Write a manifest as UTF-8 JSON, samples ordered by id."""
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(manifest_to_dict(manifest), f, indent=2, ensure_ascii=False)
            f.write("\n")
    except OSError as e:
        raise ManifestError(f"cannot write manifest to {path}: {e}") from None
    logger.debug("Saved %d samples to %s", len(manifest), path)


def save_json(data: Any, path: str) -> None:
    """Save JSON data with stable key order."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def load_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: not valid JSON ({e})") from None


def read_png(path: str, sample_id: Optional[str] = None) -> np.ndarray:
    """
    Read an 8-bit PNG into a float RGB image in [0, 1].

    Args:
        path: Image file
        sample_id: Named in the error when the file is missing or cannot be decoded
    """
    owner = f"sample '{sample_id}' ({path})" if sample_id is not None else path
    try:
        with Image.open(path) as img:
            pixels = np.asarray(img.convert("RGB"), dtype=np.float64)
    except FileNotFoundError:
        if sample_id is not None:
            raise MissingImageError(sample_id, path) from None
        raise DataError(f"image not found: {path}") from None
    except (UnidentifiedImageError, OSError) as e:
        raise DataError(f"unreadable image for {owner}: {e}") from None
    return pixels / 255.0


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(np.asarray(img, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def write_png(path: str, img: np.ndarray) -> None:
    """Write a float image in [0, 1] as an 8-bit PNG (grayscale if single channel)."""
    arr = to_uint8(as_image(img))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if arr.shape[2] == 1:
        Image.fromarray(arr[:, :, 0]).save(path, format="PNG")
    else:
        Image.fromarray(arr).save(path, format="PNG")


def export_to_csv(rows: List[Dict[str, Any]], filepath: str, columns: Sequence[str]) -> None:
    """Export rows to CSV with a fixed column order and LF line endings."""
    os.makedirs(os.path.dirname(os.path.abspath(filepath)), exist_ok=True)
    frame = pd.DataFrame(rows, columns=list(columns))
    frame.to_csv(filepath, index=False, lineterminator="\n")


def read_features_csv(path: str) -> Tuple[List[str], np.ndarray]:
    """
    Read an externally computed feature file with header id,f0,f1,...

    Returns:
        (ids, features) with features as an (N, D) float array
    """
    try:
        frame = pd.read_csv(path, dtype={"id": str})
    except FileNotFoundError:
        raise DataError(f"feature file not found: {path}") from None
    if "id" not in frame.columns:
        raise SchemaError(f"{path}: missing id column", field="id")
    feature_cols = [c for c in frame.columns if c != "id"]
    expected = [f"f{i}" for i in range(len(feature_cols))]
    if not feature_cols or feature_cols != expected:
        raise SchemaError(f"{path}: feature columns must be f0..f{len(feature_cols) - 1}", field="f0")
    values = frame[feature_cols].to_numpy(dtype=np.float64)
    if not np.isfinite(values).all():
        raise ShapeMismatchError(f"{path}: features must be finite")
    return frame["id"].tolist(), values
