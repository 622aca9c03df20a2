#!/usr/bin/env python3
"""End-to-end synthetic experiment driven through the CLI.

Generates origin-centered Gaussian blobs, splits them 1:1, builds a mixed
seed+derived constraint stream, trains with the default hyper-parameters,
and runs all three evaluation tasks.  Artifacts (CSVs, stream, checkpoint,
logs, reports) land in --out-dir so the run can be inspected or replayed.
"""

import argparse
import json
import sys
from pathlib import Path

from oahu.cli import main as oahu_main
from oahu.data import save_csv, split
from oahu.synthetic import make_blobs

from make_blobs import polygon_centers


def run(cmd: list[str]) -> None:
    print(f"$ oahu {' '.join(cmd)}")
    rc = oahu_main(cmd)
    if rc != 0:
        sys.exit(rc)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="blob_run")
    parser.add_argument("--classes", type=int, default=3)
    parser.add_argument("--per-class", type=int, default=500)
    parser.add_argument("--distance", type=float, default=6.0)
    parser.add_argument("--n-seeds", type=int, default=1000)
    parser.add_argument("--budget", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--k", type=int, default=5)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    dataset = make_blobs(
        polygon_centers(args.classes, args.distance), args.per_class, rng_seed=args.seed
    )
    dev, test = split(dataset, 0.5, rng_seed=args.seed + 1)
    dev_csv, test_csv = out / "dev.csv", out / "test.csv"
    save_csv(dev, dev_csv)
    save_csv(test, test_csv)
    print(f"dataset: {len(dev)} development / {len(test)} test instances")

    stream = out / "stream.txt"
    run(
        ["gen-constraints", str(dev_csv), "--n-seeds", str(args.n_seeds),
         "--budget", str(args.budget), "--seed", str(args.seed + 2), "--out", str(stream)]
    )

    # the blobs carry their information in the input direction, so train on
    # raw coordinates instead of corner-anchored min-max ones
    checkpoint = out / "model.oahu"
    run(
        ["train", str(dev_csv), str(stream), "--scale", "none",
         "--seed", str(args.seed + 3), "--out", str(checkpoint)]
    )
    run(["info", str(checkpoint)])

    for task, extra in (
        ("classify", ["--k", str(args.k)]),
        ("verify", ["--pairs", "300", "--seed", str(args.seed + 4)]),
        ("retrieve", ["--recall-ks", "1,2,4,8"]),
    ):
        report_path = out / f"{task}.json"
        run(
            ["eval", task, str(checkpoint), str(dev_csv), str(test_csv), "--scale", "none",
             "--out", str(report_path), *extra]
        )

    print("\nsummary:")
    for task in ("classify", "verify", "retrieve"):
        report = json.loads((out / f"{task}.json").read_text())
        print(f"  {task}: {report['metrics']}")


if __name__ == "__main__":
    main()
