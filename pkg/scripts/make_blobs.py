#!/usr/bin/env python3
"""Generate a synthetic Gaussian-blob CSV for experiments.

Class centers sit on a regular polygon around the origin with the requested
nearest-neighbor distance.  Centering the polygon on the origin matters: the
model has no bias terms, so it distinguishes input directions, and each
class should own its own angular sector.
"""

import argparse

import numpy as np

from oahu.data import save_csv
from oahu.synthetic import make_blobs


def polygon_centers(classes: int, distance: float) -> np.ndarray:
    if classes < 2:
        raise SystemExit("need at least 2 classes")
    radius = distance / (2.0 * np.sin(np.pi / classes))
    angles = np.pi / 2.0 + 2.0 * np.pi * np.arange(classes) / classes
    return np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--classes", type=int, default=3)
    parser.add_argument("--per-class", type=int, default=500)
    parser.add_argument("--distance", type=float, default=6.0, help="nearest-center distance")
    parser.add_argument("--spread", type=float, default=1.0, help="per-cluster standard deviation")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    dataset = make_blobs(
        polygon_centers(args.classes, args.distance),
        args.per_class,
        spread=args.spread,
        rng_seed=args.seed,
    )
    save_csv(dataset, args.out)
    print(f"wrote {len(dataset)} instances ({args.classes} classes, 2 features) to {args.out}")


if __name__ == "__main__":
    main()
