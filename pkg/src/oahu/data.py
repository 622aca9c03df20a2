"""Dataset ingestion, min-max feature scaling, deterministic splitting.

Datasets are plain CSV: UTF-8, comma-delimited, one header row, one named
label column, every other column numeric.  Instances get stable integer ids
from their data-row index at load time and keep them through scaling and
splitting.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetError


@dataclass(frozen=True)
class LabeledInstance:
    id: int
    features: np.ndarray
    label: str


@dataclass
class ScalingRecord:
    """Per-column min/max captured on training data, reusable on queries."""

    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, features) -> np.ndarray:
        """Scale a feature vector with the stored (training) column ranges."""
        x = np.asarray(features, dtype=float)
        span = self.maxs - self.mins
        out = np.zeros_like(x)
        nonconst = span > 0.0
        out[nonconst] = (x[nonconst] - self.mins[nonconst]) / span[nonconst]
        return out


@dataclass
class LabeledDataset:
    instances: list[LabeledInstance]
    feature_dim: int
    feature_names: list[str] = field(default_factory=list)
    label_name: str = "label"
    source: str = ""
    scaling: ScalingRecord | None = None

    def __len__(self) -> int:
        return len(self.instances)

    def labels(self) -> list[str]:
        return [inst.label for inst in self.instances]

    def classes(self) -> list[str]:
        return sorted(set(self.labels()))

    def feature_matrix(self) -> np.ndarray:
        return np.stack([inst.features for inst in self.instances])

    def by_id(self) -> dict[int, LabeledInstance]:
        return {inst.id: inst for inst in self.instances}


def load_csv(path, label_column: str = "label") -> LabeledDataset:
    """Parse a labeled CSV; errors carry row/column context."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: file is empty") from None
        if label_column not in header:
            raise DatasetError(f"{path}: no column named {label_column!r} in header")
        label_idx = header.index(label_column)
        feature_names = [name for i, name in enumerate(header) if i != label_idx]
        if not feature_names:
            raise DatasetError(f"{path}: no feature columns besides the label")

        instances = []
        for row_idx, row in enumerate(reader):
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}: row {row_idx}: expected {len(header)} columns, got {len(row)}"
                )
            values = np.empty(len(feature_names))
            col = 0
            for i, cell in enumerate(row):
                if i == label_idx:
                    continue
                try:
                    values[col] = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"{path}: row {row_idx}, column {header[i]!r}: not a number: {cell!r}"
                    ) from None
                col += 1
            if not np.all(np.isfinite(values)):
                raise DatasetError(f"{path}: row {row_idx}: non-finite feature value")
            instances.append(LabeledInstance(id=row_idx, features=values, label=row[label_idx]))

    if not instances:
        raise DatasetError(f"{path}: no data rows")
    return LabeledDataset(
        instances=instances,
        feature_dim=len(feature_names),
        feature_names=feature_names,
        label_name=label_column,
        source=str(path),
    )


def save_csv(dataset: LabeledDataset, path) -> None:
    """Write a dataset back out; float formatting round-trips exactly."""
    names = dataset.feature_names or [f"x{i}" for i in range(dataset.feature_dim)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*names, dataset.label_name])
        for inst in dataset.instances:
            writer.writerow([*(repr(float(v)) for v in inst.features), inst.label])


def scale_minmax(dataset: LabeledDataset) -> LabeledDataset:
    """Map every feature column onto [0, 1]; constant columns go to 0.

    The column ranges are kept on the returned dataset so query inputs can be
    scaled with the training statistics instead of their own.
    """
    if not dataset.instances:
        raise DatasetError("cannot scale an empty dataset")
    matrix = dataset.feature_matrix()
    record = ScalingRecord(mins=matrix.min(axis=0), maxs=matrix.max(axis=0))
    scaled = [
        LabeledInstance(id=inst.id, features=record.apply(inst.features), label=inst.label)
        for inst in dataset.instances
    ]
    return LabeledDataset(
        instances=scaled,
        feature_dim=dataset.feature_dim,
        feature_names=list(dataset.feature_names),
        label_name=dataset.label_name,
        source=dataset.source,
        scaling=record,
    )


def apply_scaling(dataset: LabeledDataset, record: ScalingRecord) -> LabeledDataset:
    """Scale a dataset with an existing record (evaluation-leak guard)."""
    scaled = [
        LabeledInstance(id=inst.id, features=record.apply(inst.features), label=inst.label)
        for inst in dataset.instances
    ]
    return LabeledDataset(
        instances=scaled,
        feature_dim=dataset.feature_dim,
        feature_names=list(dataset.feature_names),
        label_name=dataset.label_name,
        source=dataset.source,
        scaling=record,
    )


def split(dataset: LabeledDataset, ratio: float, rng_seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """Deterministic shuffle-then-partition; development gets the floor."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must lie in (0, 1), got {ratio!r}")
    order = np.random.default_rng(rng_seed).permutation(len(dataset.instances))
    n_dev = int(len(order) * ratio)

    def part(indices) -> LabeledDataset:
        return LabeledDataset(
            instances=[dataset.instances[i] for i in indices],
            feature_dim=dataset.feature_dim,
            feature_names=list(dataset.feature_names),
            label_name=dataset.label_name,
            source=dataset.source,
            scaling=dataset.scaling,
        )

    return part(order[:n_dev]), part(order[n_dev:])
