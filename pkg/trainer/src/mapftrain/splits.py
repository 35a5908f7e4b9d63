"""Seeded train/test partitions over manifest instance ids."""

from __future__ import annotations

import math
import pathlib
import random
from dataclasses import dataclass

from .data import Dataset, DataError, read_manifest


@dataclass(frozen=True)
class Split:
    train: tuple[str, ...]
    test: tuple[str, ...]


def make_splits(manifest, fraction: float = 0.70, count: int = 10, seed: int = 0) -> list[Split]:
    """`count` independent shuffled partitions of the manifest's instance ids.

    The train side takes floor(fraction * n) ids (clamped so both sides stay
    non-empty); one RNG drives all splits, so a fixed seed reproduces the
    whole list.
    """
    if isinstance(manifest, Dataset):
        ids = manifest.ids()
    elif isinstance(manifest, (str, pathlib.Path)):
        ids = read_manifest(manifest).ids()
    else:
        ids = list(manifest)
    if len(ids) < 2:
        raise DataError(f"need at least 2 manifest rows to split, found {len(ids)}")
    if not 0.0 < fraction < 1.0:
        raise DataError(f"split fraction must be in (0, 1), got {fraction}")
    if count < 1:
        raise DataError(f"split count must be >= 1, got {count}")
    n_train = min(max(math.floor(fraction * len(ids)), 1), len(ids) - 1)
    rng = random.Random(seed)
    splits = []
    for _ in range(count):
        shuffled = rng.sample(ids, len(ids))
        splits.append(
            Split(tuple(sorted(shuffled[:n_train])), tuple(sorted(shuffled[n_train:])))
        )
    return splits
