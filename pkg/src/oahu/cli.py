"""Command-line frontend wiring the modules into reproducible experiments.

Subcommands: ``gen-constraints``, ``train``, ``eval classify|verify|retrieve``,
``gradcheck``, ``info``.  Every command echoes its fully resolved
configuration into its output (stdout summary plus the written artifact), so
a run can be reproduced from the artifact alone.  Hyper-parameter precedence
is flags over config file over built-in defaults.  ``OAHU_LOG`` selects log
verbosity (debug/info/warning/error).  No command mutates its input files;
exit status is 0 exactly when everything completed and validated.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import checkpoint, constraints, data, deploy, gradcheck, metrics, model, training

LOG = logging.getLogger("oahu")

# CLI flag name -> ModelConfig field.
_FLAG_TO_FIELD = {
    "seed": "seed",
    "tau": "tau",
    "beta": "beta",
    "eta": "learning_rate",
    "smooth": "smoothing",
    "layers": "hidden_layers",
    "hidden": "hidden_units",
    "emb": "embedding_dim",
}


def _setup_logging() -> None:
    level = os.environ.get("OAHU_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(name)s: %(message)s")


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file supplying defaults for the flags below")
    parser.add_argument("--seed", type=int, help="rng seed (unsigned 64-bit)")
    parser.add_argument("--tau", type=float, help="bound-control parameter, in (0, 2/3)")
    parser.add_argument("--beta", type=float, help="weight-update discount, in (0, 1)")
    parser.add_argument("--eta", type=float, help="learning rate")
    parser.add_argument("--smooth", type=float, help="weight floor factor, in (0, 1)")
    parser.add_argument("--layers", type=int, help="hidden layer count")
    parser.add_argument("--hidden", type=int, help="units per hidden layer")
    parser.add_argument("--emb", type=int, help="embedding dimensionality")


def _resolve_model_config(args, input_dim: int, base: dict | None = None) -> model.ModelConfig:
    """Merge built-in defaults, config file, and flags into a validated config."""
    values = dict(base or {})
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - set(_FLAG_TO_FIELD)
        if unknown:
            raise ValueError(f"{config_path}: unknown config keys {sorted(unknown)}")
        for flag, field in _FLAG_TO_FIELD.items():
            if flag in file_values:
                values[field] = file_values[flag]
    for flag, field in _FLAG_TO_FIELD.items():
        flag_value = getattr(args, flag, None)
        if flag_value is not None:
            values[field] = flag_value
    return model.ModelConfig(input_dim=input_dim, **values)


def cmd_gen_constraints(args) -> int:
    dataset = data.load_csv(args.dataset, args.label_column)
    seed = args.seed if args.seed is not None else 0
    seeds = constraints.sample_seeds(dataset, args.n_seeds, seed)
    closure = (
        constraints.transitive_closure(seeds, args.budget, seed + 1)
        if seeds and args.budget > 0
        else []
    )
    exclusions = []
    if args.exclude:
        with open(args.exclude, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != 2:
                    raise ValueError(f"{args.exclude}: line {line_no}: expected 'id_a,id_b'")
                exclusions.append((int(parts[0]), int(parts[1])))

    stream = constraints.build_stream(seeds, closure, exclusions)
    constraints.write_stream(stream, args.out)
    summary = {
        "config": {
            "dataset": args.dataset,
            "label_column": args.label_column,
            "n_seeds": args.n_seeds,
            "budget": args.budget,
            "seed": seed,
            "exclude": args.exclude,
            "out": args.out,
        },
        "seeds": len(seeds),
        "derived": len(closure),
        "dropped_by_exclusion": len(seeds) + len(closure) - len(stream),
        "stream_length": len(stream),
    }
    # The stream file format is pure records, so the config echo lives in a
    # sidecar next to it.
    with open(args.out + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    print(json.dumps(summary))
    return 0


def cmd_train(args) -> int:
    dataset = data.load_csv(args.dataset, args.label_column)
    if args.scale == "minmax":
        dataset = data.scale_minmax(dataset)
    stream = constraints.read_stream(args.stream)
    triplets = constraints.resolve_triplets(dataset, stream)
    config = _resolve_model_config(args, dataset.feature_dim)
    LOG.info(
        "training on %d constraints from %s (%d instances, %d features)",
        len(triplets), args.stream, len(dataset), dataset.feature_dim,
    )
    params = model.init_model(config)
    log = training.train_stream(params, triplets, config)
    LOG.info("trained %d steps, trailing mean loss %.4f", log.step_count, log.running_mean())
    checkpoint.save_checkpoint(params, config, args.out)
    log_path = args.log or args.out + ".log.jsonl"
    log.write_jsonl(log_path, header={"config": {**config.scalars(), "scale": args.scale}})
    summary = {
        "config": {**config.scalars(), "scale": args.scale},
        "steps": log.step_count,
        "utilization": metrics.utilization(log),
        "running_mean_loss": log.running_mean(),
        "final_weights": [float(w) for w in params.depth_weights],
        "checkpoint": args.out,
        "log": log_path,
    }
    print(json.dumps(summary))
    return 0


def _sample_pairs(dataset: data.LabeledDataset, n_pairs: int, rng_seed: int):
    """Balanced same-class / different-class pairs for verification scoring."""
    by_label: dict[str, list[data.LabeledInstance]] = {}
    for inst in dataset.instances:
        by_label.setdefault(inst.label, []).append(inst)
    rich = sorted(label for label, members in by_label.items() if len(members) >= 2)
    labels = sorted(by_label)
    if not rich or len(labels) < 2:
        raise metrics.MetricError(
            "verification needs a class with >= 2 instances and at least two classes"
        )
    rng = np.random.default_rng(rng_seed)
    pairs = []
    truth = []
    for _ in range(n_pairs):
        members = by_label[rich[rng.integers(len(rich))]]
        i, j = rng.choice(len(members), size=2, replace=False)
        pairs.append((members[i], members[j]))
        truth.append(1)
    for _ in range(n_pairs):
        la, lb = rng.choice(len(labels), size=2, replace=False)
        a = by_label[labels[la]]
        b = by_label[labels[lb]]
        pairs.append((a[rng.integers(len(a))], b[rng.integers(len(b))]))
        truth.append(0)
    return pairs, truth


def _eval_classify(params, config, reference, testset, args):
    store = deploy.build_store(params, reference)
    y_true = []
    y_pred = []
    records = []
    for inst in testset.instances:
        label, scores = deploy.classify(params, store, inst.features, args.k)
        y_true.append(inst.label)
        y_pred.append(label)
        records.append({"id": inst.id, "label": label, "scores": scores})
    report = metrics.EvalReport(
        task="classify",
        metrics={
            "error_rate": metrics.error_rate(y_true, y_pred),
            "macro_f1": metrics.macro_f1(y_true, y_pred),
        },
        test_size=len(testset),
        class_count=len(testset.classes()),
        config={**config.scalars(), "k": args.k, "scale": args.scale},
    )
    return report, records, None


def _eval_verify(params, config, reference, testset, args):
    pairs, truth = _sample_pairs(testset, args.pairs, args.seed if args.seed is not None else 0)
    scores = []
    records = []
    for (a, b), label in zip(pairs, truth):
        dists = deploy.pair_distances(params, a.features, b.features)
        if args.score_mode == "continuous":
            score = deploy.continuous_similarity_score(dists, params.depth_weights)
        else:
            score, _ = deploy.similarity_from_distances(dists, params.depth_weights, args.threshold)
        scores.append(score)
        decision = "similar" if score >= 0.5 else "dissimilar"
        records.append(
            {"id_a": a.id, "id_b": b.id, "score": score, "decision": decision, "same_class": label}
        )
    points, auc = metrics.roc_auc(scores, truth)
    report = metrics.EvalReport(
        task="verify",
        metrics={"auc": auc},
        test_size=len(pairs),
        class_count=len(testset.classes()),
        config={
            **config.scalars(),
            "threshold": args.threshold,
            "pairs": args.pairs,
            "score_mode": args.score_mode,
            "scale": args.scale,
        },
    )
    return report, records, points


def _eval_retrieve(params, config, reference, testset, args):
    ks = sorted(int(k) for k in args.recall_ks.split(","))
    if not ks or ks[0] < 1:
        raise ValueError(f"--recall-ks must list integers >= 1, got {args.recall_ks!r}")
    store = deploy.build_store(params, reference)
    exclude_self = os.path.realpath(args.reference) == os.path.realpath(args.testset)
    fetch = min(ks[-1] + (1 if exclude_self else 0), len(store))
    retrieved = []
    records = []
    for inst in testset.instances:
        result = deploy.retrieve(params, store, inst.features, fetch)
        items = [(i, s) for i, s in result.items if not (exclude_self and i == inst.id)]
        items = items[: ks[-1]]
        retrieved.append([i for i, _ in items])
        records.append({"id": inst.id, "items": items})
    id_to_label = {inst.id: inst.label for inst in reference.instances}
    report = metrics.EvalReport(
        task="retrieve",
        metrics={
            f"recall@{k}": metrics.recall_at_k(testset.labels(), retrieved, id_to_label, k)
            for k in ks
        },
        test_size=len(testset),
        class_count=len(testset.classes()),
        config={**config.scalars(), "recall_ks": ks, "exclude_self": exclude_self, "scale": args.scale},
    )
    return report, records, None


def cmd_eval(args) -> int:
    params, config = checkpoint.load_checkpoint(args.checkpoint)
    reference = data.load_csv(args.reference, args.label_column)
    testset = data.load_csv(args.testset, args.label_column)
    for name, ds in (("reference", reference), ("test", testset)):
        if ds.feature_dim != config.input_dim:
            raise ValueError(
                f"{name} dataset has {ds.feature_dim} features, checkpoint expects {config.input_dim}"
            )
    if args.scale == "minmax":
        reference = data.scale_minmax(reference)
        # Queries are scaled with the reference statistics, never their own.
        testset = data.apply_scaling(testset, reference.scaling)
    LOG.info(
        "evaluating %s: %d reference / %d test instances", args.task, len(reference), len(testset)
    )

    runner = {"classify": _eval_classify, "verify": _eval_verify, "retrieve": _eval_retrieve}[args.task]
    report, records, curve = runner(params, config, reference, testset, args)
    print(report.to_json())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
        stem = os.path.splitext(args.out)[0]
        with open(stem + "_records.jsonl", "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")
        if curve is not None:
            metrics.write_curve(curve, stem + "_roc.txt")
    return 0


def cmd_gradcheck(args) -> int:
    base = {"hidden_layers": 3, "hidden_units": 8, "embedding_dim": 4}
    config = _resolve_model_config(args, args.input_dim, base=base)
    report = gradcheck.run_gradient_check(config, args.trials)
    print(
        json.dumps(
            {
                "config": config.scalars(),
                "trials": report.trials,
                "max_rel_error": report.max_rel_error,
                "tolerance": report.tolerance,
                "passed": report.passed,
            }
        )
    )
    if report.trials == 0:
        print("warning: 0 trials requested, pass is vacuous", file=sys.stderr)
    return 0 if report.passed else 1


def cmd_info(args) -> int:
    params, config = checkpoint.load_checkpoint(args.checkpoint)
    print(f"config: {json.dumps(config.scalars())}")
    print(f"depth weights: {json.dumps([float(w) for w in params.depth_weights])}")
    print(f"parameter count: {params.parameter_count()}")
    print(f"space estimate: {model.space_estimate(config)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oahu",
        description="Online adaptive metric learning from a stream of triplet constraints.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-constraints", help="sample seed triplets and derive a constraint stream")
    gen.add_argument("dataset", help="labeled CSV")
    gen.add_argument("--label-column", default="label")
    gen.add_argument("--n-seeds", type=int, default=5000)
    gen.add_argument("--budget", type=int, default=5000, help="derived constraints to add")
    gen.add_argument("--exclude", help="file of 'id_a,id_b' pairs to drop (evaluation-leak guard)")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", required=True, help="stream file to write")
    gen.set_defaults(func=cmd_gen_constraints)

    train = sub.add_parser("train", help="single online pass over a constraint stream")
    train.add_argument("dataset", help="labeled CSV the stream ids resolve against")
    train.add_argument("stream", help="constraint stream file")
    train.add_argument("--label-column", default="label")
    train.add_argument(
        "--scale", choices=["minmax", "none"], default="minmax",
        help="feature scaling applied before training",
    )
    _add_model_flags(train)
    train.add_argument("--out", required=True, help="checkpoint file to write")
    train.add_argument("--log", help="per-step JSONL log (default: <out>.log.jsonl)")
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a test set")
    ev.add_argument("task", choices=["classify", "verify", "retrieve"])
    ev.add_argument("checkpoint")
    ev.add_argument("reference", help="labeled CSV backing the reference store")
    ev.add_argument("testset", help="labeled CSV of queries")
    ev.add_argument("--label-column", default="label")
    ev.add_argument(
        "--scale", choices=["minmax", "none"], default="minmax",
        help="feature scaling, must match the training run",
    )
    ev.add_argument("--k", type=int, default=5, help="neighbors per depth (classify)")
    ev.add_argument("--threshold", type=float, default=0.5, help="similarity threshold (verify, voted mode)")
    ev.add_argument("--pairs", type=int, default=500, help="pairs per relation to sample (verify)")
    ev.add_argument(
        "--score-mode",
        choices=["continuous", "voted"],
        default="continuous",
        help="verification score fed to the ROC",
    )
    ev.add_argument("--recall-ks", default="1,2,4,8", help="comma-separated K values (retrieve)")
    ev.add_argument("--seed", type=int, default=None, help="pair-sampling seed (verify)")
    ev.add_argument("--out", help="report JSON path; also writes per-query records")
    ev.set_defaults(func=cmd_eval)

    gc = sub.add_parser("gradcheck", help="finite-difference check of the analytic gradients")
    gc.add_argument("--input-dim", type=int, default=6)
    gc.add_argument("--trials", type=int, default=10)
    _add_model_flags(gc)
    gc.set_defaults(func=cmd_gradcheck)

    info = sub.add_parser("info", help="summarize a checkpoint")
    info.add_argument("checkpoint")
    info.set_defaults(func=cmd_info)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
