"""Triplet-constraint stream construction from a labeled dataset.

Seeds are sampled directly from class labels; additional constraints are
derived by composing the seed pairs (two similar pairs sharing an endpoint
yield a similar pair; a similar and a dissimilar pair sharing an endpoint
yield a dissimilar pair) and joining the resulting pair pool back into
triplets.  Every constraint carries a monotonically increasing creation
index, and the final stream is ordered by it.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .errors import GenerationError
from .training import Triplet

SEED_SOURCE = "seed"
CLOSURE_SOURCE = "closure"

# Rejection-sampling allowance when drawing joined triplets: generous enough
# that a dense pair pool fills any sane budget, bounded so that a tiny pool
# (everything a duplicate) terminates quickly.
_ATTEMPTS_PER_TRIPLET = 50
_MIN_ATTEMPTS = 64


@dataclass(frozen=True)
class PairConstraint:
    id_a: int
    id_b: int
    relation: str  # "similar" or "dissimilar"
    created_at: int


@dataclass(frozen=True)
class TripletConstraint:
    anchor_id: int
    positive_id: int
    negative_id: int
    created_at: int
    source: str

    def key(self):
        """Dedup identity: the loss is symmetric in (anchor, positive)."""
        return (frozenset((self.anchor_id, self.positive_id)), self.negative_id)


def sample_seeds(dataset: LabeledDataset, n_seeds: int, rng_seed: int) -> list[TripletConstraint]:
    """Uniformly sample labeled triplets: anchor/positive same class, negative different."""
    if n_seeds < 0:
        raise ValueError(f"n_seeds must be >= 0, got {n_seeds}")
    by_label: dict[str, list[int]] = defaultdict(list)
    for inst in dataset.instances:
        by_label[inst.label].append(inst.id)
    labels = sorted(by_label)

    all_ids = sorted(i for ids in by_label.values() for i in ids)
    eligible_anchors = sorted(
        i
        for label in labels
        if len(by_label[label]) >= 2 and len(all_ids) > len(by_label[label])
        for i in by_label[label]
    )
    if not eligible_anchors:
        raise GenerationError(
            "dataset cannot produce any triplet: need a class with >= 2 instances "
            "plus at least one instance of another class"
        )
    others = {
        label: np.array(sorted(set(all_ids) - set(by_label[label]))) for label in labels
    }
    same = {label: np.array(sorted(by_label[label])) for label in labels}
    id_to_label = {inst.id: inst.label for inst in dataset.instances}

    rng = np.random.default_rng(rng_seed)
    seeds = []
    for created_at in range(n_seeds):
        anchor = eligible_anchors[rng.integers(len(eligible_anchors))]
        label = id_to_label[anchor]
        pool = same[label]
        positive = anchor
        while positive == anchor:
            positive = int(pool[rng.integers(len(pool))])
        negative = int(others[label][rng.integers(len(others[label]))])
        seeds.append(
            TripletConstraint(
                anchor_id=int(anchor),
                positive_id=positive,
                negative_id=negative,
                created_at=created_at,
                source=SEED_SOURCE,
            )
        )
    return seeds


def derive_pairs(
    sim_pairs: set[frozenset], dis_pairs: set[frozenset]
) -> tuple[set[frozenset], set[frozenset]]:
    """One application of the pair-composition rules over unordered pairs.

    Two similar pairs sharing an endpoint yield the similar pair of their
    other endpoints; a similar and a dissimilar pair sharing an endpoint
    yield the dissimilar pair of their other endpoints.  Pairs already in
    the inputs are not reported as new.
    """
    sim_at: dict[int, list[frozenset]] = defaultdict(list)
    dis_at: dict[int, list[frozenset]] = defaultdict(list)
    for pair in sim_pairs:
        for endpoint in pair:
            sim_at[endpoint].append(pair)
    for pair in dis_pairs:
        for endpoint in pair:
            dis_at[endpoint].append(pair)

    new_sim: set[frozenset] = set()
    for endpoint, pairs in sim_at.items():
        for i in range(len(pairs)):
            for j in range(i + 1, len(pairs)):
                (a,) = pairs[i] - {endpoint}
                (b,) = pairs[j] - {endpoint}
                if a != b:
                    derived = frozenset((a, b))
                    if derived not in sim_pairs:
                        new_sim.add(derived)

    new_dis: set[frozenset] = set()
    for endpoint, pairs in sim_at.items():
        for sim in pairs:
            for dis in dis_at.get(endpoint, ()):
                (a,) = sim - {endpoint}
                (b,) = dis - {endpoint}
                if a != b:
                    derived = frozenset((a, b))
                    if derived not in dis_pairs:
                        new_dis.add(derived)
    return new_sim, new_dis


def transitive_closure(
    seeds: list[TripletConstraint], budget: int, rng_seed: int
) -> list[TripletConstraint]:
    """Derive up to ``budget`` new triplets from the seed pair pool.

    The seed triplets are decomposed into pairs, the composition rules are
    applied once, and new triplets are assembled by joining a similar pair
    with a dissimilar pair sharing an endpoint (the shared instance becomes
    the anchor).  Output never duplicates a seed or itself and may fall
    short of the budget when the pool is too small.
    """
    if not seeds:
        raise ValueError("transitive closure needs at least one seed")
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    if budget == 0:
        return []

    seed_sim = {frozenset((t.anchor_id, t.positive_id)) for t in seeds}
    seed_dis = {frozenset((t.anchor_id, t.negative_id)) for t in seeds}
    new_sim, new_dis = derive_pairs(seed_sim, seed_dis)
    all_sim = sorted(tuple(sorted(p)) for p in seed_sim | new_sim)
    all_dis = seed_dis | new_dis

    dis_at: dict[int, list[frozenset]] = defaultdict(list)
    for pair in sorted(tuple(sorted(p)) for p in all_dis):
        dis_at[pair[0]].append(frozenset(pair))
        dis_at[pair[1]].append(frozenset(pair))

    existing = {t.key() for t in seeds}
    next_created = max(t.created_at for t in seeds) + 1
    rng = np.random.default_rng(rng_seed)
    out: list[TripletConstraint] = []
    attempts = max(_MIN_ATTEMPTS, _ATTEMPTS_PER_TRIPLET * budget)
    while len(out) < budget and attempts > 0:
        attempts -= 1
        u, v = all_sim[rng.integers(len(all_sim))]
        anchor = u if rng.integers(2) == 0 else v
        positive = v if anchor == u else u
        candidates = dis_at.get(anchor)
        if not candidates:
            continue
        dis = candidates[rng.integers(len(candidates))]
        (negative,) = dis - {anchor}
        if negative == positive:
            continue
        triplet = TripletConstraint(
            anchor_id=anchor,
            positive_id=positive,
            negative_id=negative,
            created_at=next_created,
            source=CLOSURE_SOURCE,
        )
        if triplet.key() in existing:
            continue
        existing.add(triplet.key())
        out.append(triplet)
        next_created += 1
    return out


def build_stream(
    seeds: list[TripletConstraint],
    closure: list[TripletConstraint],
    exclusions=(),
) -> list[TripletConstraint]:
    """Merge constraints into creation order, dropping any that touch an excluded pair.

    ``exclusions`` is an iterable of instance-id pairs (order-insensitive);
    a triplet is dropped when its (anchor, positive) or (anchor, negative)
    pair is excluded.  This is the guard against leaking evaluation pairs
    into training.
    """
    excluded = {frozenset(pair) for pair in exclusions}
    combined = list(seeds) + list(closure)
    created = [t.created_at for t in combined]
    if len(set(created)) != len(created):
        raise ValueError("created_at indices must be unique across the stream")
    kept = [
        t
        for t in combined
        if frozenset((t.anchor_id, t.positive_id)) not in excluded
        and frozenset((t.anchor_id, t.negative_id)) not in excluded
    ]
    return sorted(kept, key=lambda t: t.created_at)


def as_pairs(stream: list[TripletConstraint]) -> list[PairConstraint]:
    """Decompose triplets for pairwise consumers: one similar + one dissimilar pair each."""
    pairs = []
    for t in stream:
        pairs.append(PairConstraint(t.anchor_id, t.positive_id, "similar", t.created_at))
        pairs.append(PairConstraint(t.anchor_id, t.negative_id, "dissimilar", t.created_at))
    return pairs


def write_stream(stream: list[TripletConstraint], path) -> None:
    """One line per constraint: created_at, source, anchor_id, positive_id, negative_id."""
    with open(path, "w", encoding="utf-8") as fh:
        for t in stream:
            fh.write(f"{t.created_at},{t.source},{t.anchor_id},{t.positive_id},{t.negative_id}\n")


def read_stream(path) -> list[TripletConstraint]:
    stream = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ValueError(f"{path}: line {line_no}: expected 5 fields, got {len(parts)}")
            try:
                created_at = int(parts[0])
                anchor_id, positive_id, negative_id = (int(p) for p in parts[2:5])
            except ValueError:
                raise ValueError(f"{path}: line {line_no}: malformed integer field") from None
            source = parts[1]
            if source not in (SEED_SOURCE, CLOSURE_SOURCE):
                raise ValueError(f"{path}: line {line_no}: unknown source {source!r}")
            stream.append(
                TripletConstraint(
                    anchor_id=anchor_id,
                    positive_id=positive_id,
                    negative_id=negative_id,
                    created_at=created_at,
                    source=source,
                )
            )
    return stream


def resolve_triplets(dataset: LabeledDataset, stream: list[TripletConstraint]) -> list[Triplet]:
    """Attach feature vectors to a stream of id triplets."""
    lookup = dataset.by_id()
    resolved = []
    for t in stream:
        try:
            resolved.append(
                Triplet(
                    anchor=lookup[t.anchor_id].features,
                    positive=lookup[t.positive_id].features,
                    negative=lookup[t.negative_id].features,
                )
            )
        except KeyError as exc:
            raise ValueError(
                f"constraint created_at={t.created_at} references unknown instance id {exc.args[0]}"
            ) from None
    return resolved
