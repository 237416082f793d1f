"""
Data package for leafaug: domain types, I/O and the fixture corpus.
"""
from .io import load_manifest, save_manifest, read_png, write_png
from .types import ClassLabel, DatasetManifest, LabeledSample, Origin, PolygonMask, Split

__all__ = [
    'load_manifest', 'save_manifest', 'read_png', 'write_png',
    'ClassLabel', 'DatasetManifest', 'LabeledSample', 'Origin', 'PolygonMask', 'Split',
]
