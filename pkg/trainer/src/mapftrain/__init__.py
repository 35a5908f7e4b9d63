"""Image-classifier training for MAPF algorithm selection."""

from .data import DataError, Dataset, ManifestRow, load_arrays, read_manifest
from .splits import Split, make_splits
from .train import (
    SplitOutcome,
    TrainConfig,
    TrainError,
    load_backbone,
    run_all,
    train_and_predict,
    write_predictions,
)

__all__ = [
    "DataError",
    "Dataset",
    "ManifestRow",
    "Split",
    "SplitOutcome",
    "TrainConfig",
    "TrainError",
    "load_arrays",
    "load_backbone",
    "make_splits",
    "read_manifest",
    "run_all",
    "train_and_predict",
    "write_predictions",
]
