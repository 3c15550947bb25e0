"""Summation and seeding helpers shared by the sampling, sandwich and design-variance code."""
import math
from numbers import Integral

import numpy as np

SEED_MASK = 0xFFFF_FFFF_FFFF_FFFF


def seed_sequence(seed: int, spawn_key: tuple = ()) -> np.random.SeedSequence:
    """SeedSequence for any signed or unsigned 64-bit seed.

    A negative seed is taken as its two's-complement unsigned value.
    """
    return np.random.SeedSequence(int(seed) & SEED_MASK, spawn_key=tuple(spawn_key))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, Integral):
        return np.random.default_rng(seed_sequence(seed))
    return np.random.default_rng(seed)


def compensated_sum(values: np.ndarray) -> float:
    """Exactly rounded sum (Shewchuk), independent of element order."""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())


def cluster_sums(values: np.ndarray, codes: np.ndarray, cluster_count: int) -> np.ndarray:
    """Per-cluster sums with a second compensating pass.

    The first pass accumulates naively; the second sums the deviations from the
    first-pass cluster means and adds them back, which recovers the digits lost
    when a cluster holds many values of similar magnitude.
    """
    values = np.asarray(values, dtype=np.float64)
    counts = np.bincount(codes, minlength=cluster_count)
    first = np.bincount(codes, weights=values, minlength=cluster_count)
    means = np.divide(first, counts, out=np.zeros_like(first), where=counts > 0)
    correction = np.bincount(codes, weights=values - means[codes], minlength=cluster_count)
    return first + correction


def cluster_means(values: np.ndarray, codes: np.ndarray, cluster_count: int) -> np.ndarray:
    counts = np.bincount(codes, minlength=cluster_count)
    sums = cluster_sums(values, codes, cluster_count)
    return np.divide(sums, counts, out=np.full(cluster_count, np.nan), where=counts > 0)
