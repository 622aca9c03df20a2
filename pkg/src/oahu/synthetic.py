"""Synthetic datasets for experiments and tests."""

from __future__ import annotations

import numpy as np

from .data import LabeledDataset, LabeledInstance


def make_blobs(centers, n_per_class: int, spread: float = 1.0, rng_seed: int = 0) -> LabeledDataset:
    """Isotropic Gaussian clusters, one class per center.

    ``centers`` is (classes, dim); labels are c0, c1, ...; ids run 0..n-1 in
    class-blocked order.
    """
    centers = np.asarray(centers, dtype=float)
    if centers.ndim != 2:
        raise ValueError(f"centers must be a (classes, dim) array, got shape {centers.shape}")
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = np.random.default_rng(rng_seed)
    instances = []
    next_id = 0
    for class_idx, center in enumerate(centers):
        points = rng.normal(loc=center, scale=spread, size=(n_per_class, centers.shape[1]))
        for point in points:
            instances.append(LabeledInstance(id=next_id, features=point, label=f"c{class_idx}"))
            next_id += 1
    return LabeledDataset(
        instances=instances,
        feature_dim=centers.shape[1],
        feature_names=[f"x{i}" for i in range(centers.shape[1])],
        source="synthetic:blobs",
    )


def triangle_centers(distance: float = 6.0) -> np.ndarray:
    """Three 2-d centers at mutual distance ``distance``."""
    return np.array(
        [
            [0.0, 0.0],
            [distance, 0.0],
            [distance / 2.0, distance * np.sqrt(3.0) / 2.0],
        ]
    )
