"""Dataset access.

The trainer talks to the benchmark engine only through files: a manifest csv
whose `# portfolio:` line records the label order, one row per instance with
an image path (relative to the manifest) and the best/worst algorithm names,
plus the PNG images themselves.
"""

from __future__ import annotations

import pathlib
from dataclasses import dataclass

import numpy as np
from PIL import Image


class DataError(RuntimeError):
    pass


@dataclass(frozen=True)
class ManifestRow:
    instance_id: str
    image: pathlib.Path
    best: str


@dataclass
class Dataset:
    portfolio: tuple[str, ...]
    rows: list[ManifestRow]

    def ids(self) -> list[str]:
        return [r.instance_id for r in self.rows]

    def label_index(self, row: ManifestRow) -> int:
        return self.portfolio.index(row.best)


def read_manifest(path) -> Dataset:
    p = pathlib.Path(path)
    if not p.exists():
        raise DataError(f"manifest not found: {p}")
    portfolio: tuple[str, ...] | None = None
    header: list[str] | None = None
    rows: list[ManifestRow] = []
    for ln, line in enumerate(p.read_text().splitlines(), start=1):
        if line.startswith("# portfolio:"):
            portfolio = tuple(n.strip() for n in line.split(":", 1)[1].split(","))
            continue
        if not line.strip() or line.startswith("#"):
            continue
        if header is None:
            header = line.split(",")
            for col in ("instance_id", "image", "best"):
                if col not in header:
                    raise DataError(f"{p}:{ln}: manifest header lacks {col!r}")
            continue
        record = dict(zip(header, line.split(",")))
        rows.append(
            ManifestRow(
                record["instance_id"],
                p.parent / record["image"],
                record["best"],
            )
        )
    if portfolio is None:
        raise DataError(f"{p}: no '# portfolio:' line; label order unknown")
    if not rows:
        raise DataError(f"{p}: no data rows")
    for row in rows:
        if row.best not in portfolio:
            raise DataError(f"{p}: label {row.best!r} for {row.instance_id} not in portfolio {portfolio}")
    return Dataset(portfolio, rows)


# ImageNet statistics; the pretrained backbones expect this normalization and
# it is harmless for the compact one.
CHANNEL_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
CHANNEL_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


def load_image(path) -> np.ndarray:
    """One image as a normalized (3, H, W) float32 array."""
    p = pathlib.Path(path)
    if not p.exists():
        raise DataError(f"image not found: {p}")
    arr = np.asarray(Image.open(p).convert("RGB"), dtype=np.float32) / 255.0
    arr = (arr - CHANNEL_MEAN) / CHANNEL_STD
    return arr.transpose(2, 0, 1)


def load_arrays(dataset: Dataset) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """All images and label indices in manifest order."""
    images = np.stack([load_image(r.image) for r in dataset.rows])
    labels = np.array([dataset.label_index(r) for r in dataset.rows], dtype=np.int64)
    return images, labels, dataset.ids()
