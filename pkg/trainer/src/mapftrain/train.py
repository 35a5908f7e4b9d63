"""Backbones and the fine-tune / predict loop."""

from __future__ import annotations

import logging
import pathlib
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .data import Dataset, load_arrays, read_manifest
from .splits import Split, make_splits

log = logging.getLogger("mapftrain")

PREDICTIONS_HEADER = "instance_id,predicted_algorithm"
ACCURACY_HEADER = "split,accuracy"


class TrainError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    manifest: str
    out_dir: str = "train_out"
    fraction: float = 0.70
    splits: int = 10
    seed: int = 0
    epochs: int = 20
    lr: float = 1e-4
    backbone: str = "alexnet"
    batch_size: int = 8

    def __post_init__(self):
        if not 0.0 < self.fraction < 1.0:
            raise TrainError(f"split fraction must be in (0, 1), got {self.fraction}")
        if self.splits < 1:
            raise TrainError(f"split count must be >= 1, got {self.splits}")
        if self.epochs < 1 or self.batch_size < 1:
            raise TrainError("epochs and batch size must be >= 1")


class CompactCnn(nn.Module):
    """Small from-scratch CNN; fast enough to fine-tune on a CPU."""

    def __init__(self, n_classes: int):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 16, kernel_size=7, stride=4),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(16, 32, kernel_size=3),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(32, 64, kernel_size=3),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(4),
        )
        self.classifier = nn.Sequential(
            nn.Flatten(),
            nn.Linear(64 * 16, 128),
            nn.ReLU(inplace=True),
            nn.Linear(128, n_classes),
        )

    def forward(self, x):
        return self.classifier(self.features(x))


def load_backbone(name: str, n_classes: int) -> nn.Module:
    """A pretrained classifier with its output layer swapped for an
    `n_classes` head. When pretrained weights cannot be fetched the same
    architecture is used randomly initialized, with a warning."""
    if name == "alexnet":
        from torchvision import models as tvm

        try:
            model = tvm.alexnet(weights=tvm.AlexNet_Weights.IMAGENET1K_V1)
        except Exception as exc:  # noqa: BLE001 - any fetch/cache failure
            log.warning("pretrained alexnet weights unavailable (%s); using random init", exc)
            model = tvm.alexnet(weights=None)
        head = model.classifier[-1]
        model.classifier[-1] = nn.Linear(head.in_features, n_classes)
        return model
    if name == "compact":
        return CompactCnn(n_classes)
    raise TrainError(f"unknown backbone {name!r}; choose alexnet or compact")


@dataclass
class SplitOutcome:
    predictions: dict[str, str]
    train_accuracy: float
    test_accuracy: float


def _accuracy(model: nn.Module, images: torch.Tensor, labels: torch.Tensor, batch: int) -> float:
    model.eval()
    hits = 0
    with torch.no_grad():
        for i in range(0, len(images), batch):
            out = model(images[i : i + batch])
            hits += int((out.argmax(dim=1) == labels[i : i + batch]).sum())
    return hits / len(images)


def train_and_predict(
    cfg: TrainConfig,
    split: Split,
    split_index: int = 0,
    dataset: Dataset | None = None,
    arrays: tuple[np.ndarray, np.ndarray, list[str]] | None = None,
) -> SplitOutcome:
    """Full fine-tune on the split's train side; predictions for its test side.

    Labels index into the manifest's recorded portfolio order. `dataset` and
    `arrays` allow reusing loaded images across splits.
    """
    if dataset is None:
        dataset = read_manifest(cfg.manifest)
    if arrays is None:
        arrays = load_arrays(dataset)
    images, labels, ids = arrays
    index_of = {iid: i for i, iid in enumerate(ids)}
    unknown = [iid for iid in split.train + split.test if iid not in index_of]
    if unknown:
        raise TrainError(f"split names ids missing from the manifest: {unknown}")

    train_idx = [index_of[iid] for iid in split.train]
    test_idx = [index_of[iid] for iid in split.test]
    present = {int(v) for v in labels[train_idx]}
    absent = [name for i, name in enumerate(dataset.portfolio) if i not in present]
    if absent:
        log.warning("split %d train side has no examples of %s", split_index, absent)

    torch.manual_seed(cfg.seed * 1009 + split_index)
    model = load_backbone(cfg.backbone, len(dataset.portfolio))
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    loss_fn = nn.CrossEntropyLoss()

    x_train = torch.from_numpy(images[train_idx])
    y_train = torch.from_numpy(labels[train_idx])
    x_test = torch.from_numpy(images[test_idx])
    y_test = torch.from_numpy(labels[test_idx])

    order_rng = torch.Generator().manual_seed(cfg.seed * 9001 + split_index)
    model.train()
    for _ in range(cfg.epochs):
        perm = torch.randperm(len(x_train), generator=order_rng)
        for i in range(0, len(perm), cfg.batch_size):
            batch = perm[i : i + cfg.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(x_train[batch]), y_train[batch])
            loss.backward()
            optimizer.step()

    train_acc = _accuracy(model, x_train, y_train, cfg.batch_size)
    test_acc = _accuracy(model, x_test, y_test, cfg.batch_size)
    model.eval()
    predictions = {}
    with torch.no_grad():
        for i in range(0, len(x_test), cfg.batch_size):
            out = model(x_test[i : i + cfg.batch_size]).argmax(dim=1)
            for j, cls in enumerate(out.tolist()):
                predictions[split.test[i + j]] = dataset.portfolio[cls]
    return SplitOutcome(predictions, train_acc, test_acc)


def write_predictions(predictions: dict[str, str], fh) -> None:
    fh.write(PREDICTIONS_HEADER + "\n")
    for iid in sorted(predictions):
        fh.write(f"{iid},{predictions[iid]}\n")


def run_all(cfg: TrainConfig) -> list[tuple[int, SplitOutcome, pathlib.Path]]:
    """Split, train, and write one predictions file per split plus the
    accuracy summary; returns (index, outcome, predictions path) triples."""
    dataset = read_manifest(cfg.manifest)
    arrays = load_arrays(dataset)
    splits = make_splits(dataset, cfg.fraction, cfg.splits, cfg.seed)
    out = pathlib.Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    with open(out / "accuracy.csv", "w") as acc_fh:
        acc_fh.write(ACCURACY_HEADER + "\n")
        for k, split in enumerate(splits):
            outcome = train_and_predict(cfg, split, k, dataset, arrays)
            path = out / f"predictions_split{k}.csv"
            with open(path, "w") as fh:
                write_predictions(outcome.predictions, fh)
            acc_fh.write(f"{k},{outcome.test_accuracy!r}\n")
            results.append((k, outcome, path))
    return results
