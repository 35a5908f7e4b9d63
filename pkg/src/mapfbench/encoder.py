"""Instance-to-image encoding and labeled dataset export.

An instance is painted at native map resolution: blocked cells white, free
cells black, then goals red, then starts green (starts win coincidences).
The painting is rescaled to 227x227 with nearest-neighbor sampling and every
pixel re-snapped to the four-color palette, so the classifier only ever sees
the semantic colors. Start/goal pairing is anonymized by construction: the
colors carry no agent identity.
"""

from __future__ import annotations

import pathlib
from typing import IO, Iterable

import numpy as np
from PIL import Image

from .grid import GridMap
from .labels import PORTFOLIO, Label, PortfolioResult
from .scenarios import ProblemInstance

SIZE = 227
WHITE = (255, 255, 255)
BLACK = (0, 0, 0)
RED = (255, 0, 0)
GREEN = (0, 255, 0)
PALETTE = np.array([WHITE, BLACK, RED, GREEN], dtype=np.int32)


def encode_native(instance: ProblemInstance, grid: GridMap) -> np.ndarray:
    """Paint the instance at map resolution; returns (height, width, 3) uint8."""
    img = np.zeros((grid.height, grid.width, 3), dtype=np.uint8)
    img[~grid.passable] = WHITE
    for _, g in instance.agents:
        img[g.y, g.x] = RED
    for s, _ in instance.agents:
        img[s.y, s.x] = GREEN
    return img


def snap_to_palette(arr: np.ndarray) -> np.ndarray:
    """Replace every pixel with the nearest palette color (exact for inputs
    already on the palette; a guard against resampling artifacts)."""
    flat = arr.reshape(-1, 3).astype(np.int32)  # squares overflow int16
    dists = ((flat[:, None, :] - PALETTE[None, :, :]) ** 2).sum(axis=2)
    snapped = PALETTE[dists.argmin(axis=1)].astype(np.uint8)
    return snapped.reshape(arr.shape)


def encode(instance: ProblemInstance, grid: GridMap) -> Image.Image:
    """Fixed-size RGB encoding of one instance."""
    native = encode_native(instance, grid)
    img = Image.fromarray(native, mode="RGB").resize((SIZE, SIZE), Image.NEAREST)
    return Image.fromarray(snap_to_palette(np.asarray(img)), mode="RGB")


MANIFEST_PORTFOLIO_LINE = "# portfolio: " + ",".join(PORTFOLIO)
MANIFEST_HEADER = "instance_id,map,type,seed,image,best,worst," + ",".join(
    f"{name}_{metric}"
    for name in ("bmaa", "far", "whca")
    for metric in ("completion_rate", "total_distance", "goal_achievement_time")
)


def export_dataset(
    instances: Iterable[ProblemInstance],
    labels: dict[str, Label],
    images: dict[str, Image.Image],
    results: dict[str, PortfolioResult],
    out_dir,
) -> pathlib.Path:
    """Write one PNG per instance plus a manifest tying ids to image paths,
    labels (as portfolio names), and the per-algorithm triples."""
    out = pathlib.Path(out_dir)
    image_dir = out / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.csv"
    with open(manifest, "w") as fh:
        fh.write(MANIFEST_PORTFOLIO_LINE + "\n")
        fh.write(MANIFEST_HEADER + "\n")
        for inst in instances:
            try:
                lab = labels[inst.id]
                img = images[inst.id]
                res = results[inst.id]
            except KeyError as exc:
                raise KeyError(f"instance {inst.id}: missing {exc} for export") from None
            rel = f"images/{inst.id}.png"
            img.save(image_dir / f"{inst.id}.png", format="PNG")
            triples = ",".join(
                f"{res.triples[name].completion_rate!r},{res.triples[name].total_distance!r},"
                f"{res.triples[name].goal_achievement_time!r}"
                for name in PORTFOLIO
            )
            fh.write(
                f"{inst.id},{inst.map_name},{inst.scenario},{inst.seed},{rel},"
                f"{lab.best_name},{lab.worst_name},{triples}\n"
            )
    return manifest


def read_manifest(path) -> tuple[list[dict[str, str]], tuple[str, ...]]:
    """Manifest rows as dicts plus the recorded portfolio order."""
    p = pathlib.Path(path)
    portfolio = PORTFOLIO
    rows: list[dict[str, str]] = []
    header: list[str] | None = None
    for line in p.read_text().splitlines():
        if line.startswith("# portfolio:"):
            portfolio = tuple(line.split(":", 1)[1].strip().split(","))
            continue
        if not line.strip() or line.startswith("#"):
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append(dict(zip(header, line.split(","))))
    return rows, portfolio
