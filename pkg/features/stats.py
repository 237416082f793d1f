"""
Class and split statistics over manifests.
"""
from collections import Counter
from typing import Dict, Iterable, List, Optional

from Data.types import ClassLabel, DatasetManifest, LabeledSample, Origin, Split


def class_counts(samples: Iterable[LabeledSample]) -> Dict[ClassLabel, int]:
    """
    Count samples per class.

    Args:
        samples: Any iterable of samples

    Returns:
        Dictionary with every class as a key, zero included
    """
    counts = Counter(s.label for s in samples)
    return {c: counts.get(c, 0) for c in ClassLabel}


def split_table(manifest: DatasetManifest) -> Dict[str, Dict[str, int]]:
    """Per-split class counts, keyed by split name ("unassigned" for None)."""
    table: Dict[str, Dict[str, int]] = {}
    for split in (Split.TRAIN, Split.DEV, Split.TEST, None):
        members = manifest.by_split(split)
        if not members and split is None:
            continue
        key = "unassigned" if split is None else split.value
        table[key] = {c.value: n for c, n in class_counts(members).items()}
    return table


def origin_counts(manifest: DatasetManifest) -> Dict[str, int]:
    counts = Counter(s.origin for s in manifest.samples)
    return {o.value: counts.get(o, 0) for o in Origin}


def classes_missing_per_split(manifest: DatasetManifest,
                              splits: Iterable[Optional[Split]]) -> Dict[Split, List[ClassLabel]]:
    """Classes with no sample in each of the given splits."""
    missing = {}
    for split in splits:
        counts = class_counts(manifest.by_split(split))
        missing[split] = [c for c, n in counts.items() if n == 0]
    return missing
