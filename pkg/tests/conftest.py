"""
Shared pytest fixtures.
"""
import os
import sys

import numpy as np
import pytest

# Add the project root directory to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from Data.fixtures import make_fixture
from Data.types import ClassLabel, DatasetManifest, LabeledSample, Origin


class ScriptedStream:
    """Stream stand-in that replays fixed draws, for pinning exact code paths."""

    def __init__(self, randoms=(), uniforms=(), integers=(), gammas=(), permutations=()):
        self._randoms = list(randoms)
        self._uniforms = list(uniforms)
        self._integers = list(integers)
        self._gammas = list(gammas)
        self._permutations = list(permutations)

    def random(self, size=None):
        return self._randoms.pop(0)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._uniforms.pop(0)

    def integers(self, low, high, size=None):
        return self._integers.pop(0)

    def gamma(self, shape, size=None):
        return self._gammas.pop(0)

    def permutation(self, n):
        if self._permutations:
            return np.asarray(self._permutations.pop(0))
        return np.arange(n)


@pytest.fixture
def scripted_stream():
    return ScriptedStream


def make_samples(counts, origin=Origin.REAL, split=None, prefix=""):
    samples = []
    for label, n in counts.items():
        for i in range(n):
            samples.append(LabeledSample(
                id=f"{prefix}{label.value}_{i:03d}",
                image_path=f"images/{prefix}{label.value}_{i:03d}.png",
                label=label,
                origin=origin,
                split=split,
            ))
    return samples


@pytest.fixture
def small_manifest():
    counts = {ClassLabel.HEALTHY: 10, ClassLabel.RED_SPIDER_MITE: 4, ClassLabel.RUST_LEVEL_LOW: 5,
              ClassLabel.RUST_LEVEL_MEDIUM: 3, ClassLabel.RUST_LEVEL_HIGH: 2}
    return DatasetManifest(tuple(make_samples(counts)))


@pytest.fixture
def synthetic_pool():
    counts = {label: 12 for label in ClassLabel.diseased()}
    return DatasetManifest(tuple(make_samples(counts, origin=Origin.SYNTHETIC, prefix="syn_")))


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    """Procedural corpus written once per session; treat as read-only."""
    directory = tmp_path_factory.mktemp("corpus")
    return make_fixture(str(directory), seed=7)
