"""
Caching service for decoded sample images.
"""
import os
from collections import OrderedDict
from typing import Callable, Optional

import numpy as np

from Data.io import read_png, resolve_image_path
from Data.types import LabeledSample
from features.dataprep import resize_bilinear
from utils.errors import MissingImageError


class ImageCache:
    """
    Bounded in-memory cache of images keyed by resolved file path.
    The least recently used entry is evicted first.
    """

    def __init__(self, image_root: str, size: Optional[int] = None, max_entries: int = 64,
                 reader: Callable[[str], np.ndarray] = read_png):
        """
        Initialize cache.

        Args:
            image_root: Directory relative image paths resolve against
            size: If set, images are resized to size x size on load
            max_entries: Maximum number of images kept in memory
            reader: Decodes one file into a float image
        """
        if max_entries < 1:
            raise ValueError(f"max_entries must be positive, got {max_entries}")
        self._root = image_root
        self._size = size
        self._max_entries = max_entries
        self._reader = reader
        self._cache: "OrderedDict[str, np.ndarray]" = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, path: str) -> Optional[np.ndarray]:
        """
        Get a cached image.

        Returns:
            Cached image or None if not cached
        """
        if path not in self._cache:
            return None
        self._cache.move_to_end(path)
        return self._cache[path]

    def set(self, path: str, image: np.ndarray) -> None:
        """Cache an image, evicting the oldest entry when full."""
        self._cache[path] = image
        self._cache.move_to_end(path)
        while len(self._cache) > self._max_entries:
            self._cache.popitem(last=False)

    def load(self, sample: LabeledSample) -> np.ndarray:
        """Return the image of a sample, reading it on a cache miss."""
        path = resolve_image_path(sample, self._root)
        cached = self.get(path)
        if cached is not None:
            self.hits += 1
            return cached
        self.misses += 1
        if not os.path.isfile(path):
            raise MissingImageError(sample.id, path)
        image = self._reader(path)
        if self._size is not None and image.shape[:2] != (self._size, self._size):
            image = resize_bilinear(image, self._size, self._size)
        image.setflags(write=False)
        self.set(path, image)
        return image

    __call__ = load

    def __len__(self) -> int:
        return len(self._cache)

    def clear(self) -> None:
        """Clear all cached images."""
        self._cache.clear()
