import itertools

import numpy as np
import pytest

from conftest import origin_centered_blobs
from oahu.constraints import (
    TripletConstraint,
    as_pairs,
    build_stream,
    derive_pairs,
    read_stream,
    resolve_triplets,
    sample_seeds,
    transitive_closure,
    write_stream,
)
from oahu.data import LabeledDataset, LabeledInstance
from oahu.errors import GenerationError
from oahu.synthetic import make_blobs


def tiny_dataset(labels):
    instances = [
        LabeledInstance(id=i, features=np.array([float(i), 0.0]), label=label)
        for i, label in enumerate(labels)
    ]
    return LabeledDataset(instances=instances, feature_dim=2, feature_names=["x0", "x1"])


def brute_force_closure(sim_pairs, dis_pairs):
    """Literal application of the four composition rules over ordered pairs."""
    sim = {tuple(sorted(p)) for p in sim_pairs}
    dis = {tuple(sorted(p)) for p in dis_pairs}
    new_sim, new_dis = set(), set()
    for (a1, b1), (a2, b2) in itertools.product(sim, sim):
        # (x1,x2) sim and (x1,x3) sim -> (x2,x3) sim; (x1,x2) sim and
        # (x2,x3) sim -> (x1,x3) sim
        for x1, x2 in ((a1, b1), (b1, a1)):
            for y1, y2 in ((a2, b2), (b2, a2)):
                if x1 == y1 and x2 != y2:
                    new_sim.add(tuple(sorted((x2, y2))))
                if x2 == y1 and x1 != y2:
                    new_sim.add(tuple(sorted((x1, y2))))
    for (a1, b1), (a2, b2) in itertools.product(sim, dis):
        # (x1,x2) sim and (x1,x3) dis -> (x2,x3) dis; (x1,x2) sim and
        # (x2,x3) dis -> (x1,x3) dis
        for x1, x2 in ((a1, b1), (b1, a1)):
            for y1, y2 in ((a2, b2), (b2, a2)):
                if x1 == y1 and x2 != y2:
                    new_dis.add(tuple(sorted((x2, y2))))
                if x2 == y1 and x1 != y2:
                    new_dis.add(tuple(sorted((x1, y2))))
    return new_sim - sim, new_dis - dis


class TestSampleSeeds:
    def test_smallest_feasible_dataset(self):
        dataset = tiny_dataset(["a", "a", "b", "b"])
        seeds = sample_seeds(dataset, 1, rng_seed=0)
        assert len(seeds) == 1
        labels = {i: inst.label for i, inst in enumerate(dataset.instances)}
        t = seeds[0]
        assert labels[t.anchor_id] == labels[t.positive_id] != labels[t.negative_id]
        assert t.anchor_id != t.positive_id

    def test_five_thousand_seeds_all_satisfy_label_constraints(self):
        centers = np.random.default_rng(0).normal(size=(7, 2)) * 10
        dataset = make_blobs(centers, 5000, spread=1.0, rng_seed=1)
        assert len(dataset) == 35000
        seeds = sample_seeds(dataset, 5000, rng_seed=2)
        assert len(seeds) == 5000
        labels = {inst.id: inst.label for inst in dataset.instances}
        for t in seeds:
            assert labels[t.anchor_id] == labels[t.positive_id]
            assert labels[t.anchor_id] != labels[t.negative_id]
            assert t.anchor_id != t.positive_id
        assert [t.created_at for t in seeds] == list(range(5000))
        assert all(t.source == "seed" for t in seeds)

    def test_determinism(self):
        dataset = tiny_dataset(["a", "a", "b", "b", "c"])
        assert sample_seeds(dataset, 50, rng_seed=9) == sample_seeds(dataset, 50, rng_seed=9)
        assert sample_seeds(dataset, 50, rng_seed=9) != sample_seeds(dataset, 50, rng_seed=10)

    def test_single_class_dataset_is_infeasible(self):
        with pytest.raises(GenerationError):
            sample_seeds(tiny_dataset(["a", "a", "a"]), 1, rng_seed=0)

    def test_singleton_classes_are_infeasible(self):
        with pytest.raises(GenerationError):
            sample_seeds(tiny_dataset(["a", "b", "c"]), 1, rng_seed=0)


class TestDerivePairs:
    def test_two_similar_pairs_sharing_an_endpoint(self):
        new_sim, new_dis = derive_pairs(
            {frozenset((1, 2)), frozenset((1, 3))}, set()
        )
        assert new_sim == {frozenset((2, 3))}
        assert new_dis == set()

    def test_similar_plus_dissimilar_pair(self):
        new_sim, new_dis = derive_pairs(
            {frozenset((1, 2))}, {frozenset((1, 3))}
        )
        assert new_sim == set()
        assert new_dis == {frozenset((2, 3))}

    def test_chain_form_of_the_rules(self):
        # sim (1,2) + sim (2,3) share endpoint 2 -> sim (1,3);
        # sim (1,2) + dis (2,3) -> dis (1,3)
        new_sim, _ = derive_pairs({frozenset((1, 2)), frozenset((2, 3))}, set())
        assert new_sim == {frozenset((1, 3))}
        _, new_dis = derive_pairs({frozenset((1, 2))}, {frozenset((2, 3))})
        assert new_dis == {frozenset((1, 3))}

    @pytest.mark.parametrize("case_seed", range(8))
    def test_matches_brute_force_oracle(self, case_seed):
        rng = np.random.default_rng(case_seed)
        ids = list(range(8))
        sim = set()
        dis = set()
        for _ in range(rng.integers(2, 7)):
            a, b = rng.choice(ids, size=2, replace=False)
            sim.add(frozenset((int(a), int(b))))
        for _ in range(rng.integers(2, 7)):
            a, b = rng.choice(ids, size=2, replace=False)
            pair = frozenset((int(a), int(b)))
            if pair not in sim:
                dis.add(pair)
        got_sim, got_dis = derive_pairs(sim, dis)
        want_sim, want_dis = brute_force_closure(sim, dis)
        assert {tuple(sorted(p)) for p in got_sim} == want_sim
        assert {tuple(sorted(p)) for p in got_dis} == want_dis


class TestTransitiveClosure:
    def test_single_seed_yields_only_duplicates(self):
        # pairs (a sim p), (a dis n) derive (p dis n); every joinable triplet
        # collapses onto the seed under the unordered (anchor, positive) identity
        seed = TripletConstraint(0, 1, 2, created_at=0, source="seed")
        assert transitive_closure([seed], budget=1, rng_seed=0) == []

    def test_derived_triplets_are_sound_and_deduplicated(self):
        dataset = tiny_dataset(["a"] * 5 + ["b"] * 5)
        seeds = sample_seeds(dataset, 30, rng_seed=4)
        out = transitive_closure(seeds, budget=40, rng_seed=5)
        assert out, "dense seed pool should yield derived triplets"

        seed_sim = {frozenset((t.anchor_id, t.positive_id)) for t in seeds}
        seed_dis = {frozenset((t.anchor_id, t.negative_id)) for t in seeds}
        new_sim, new_dis = derive_pairs(seed_sim, seed_dis)
        all_sim = seed_sim | new_sim
        all_dis = seed_dis | new_dis

        keys = set()
        seed_keys = {t.key() for t in seeds}
        created = [t.created_at for t in out]
        assert created == list(range(30, 30 + len(out)))
        for t in out:
            assert t.source == "closure"
            assert frozenset((t.anchor_id, t.positive_id)) in all_sim
            assert frozenset((t.anchor_id, t.negative_id)) in all_dis
            assert t.key() not in seed_keys
            assert t.key() not in keys
            keys.add(t.key())

    def test_budget_zero(self):
        seed = TripletConstraint(0, 1, 2, created_at=0, source="seed")
        assert transitive_closure([seed], budget=0, rng_seed=0) == []

    def test_determinism(self):
        dataset = tiny_dataset(["a"] * 4 + ["b"] * 4)
        seeds = sample_seeds(dataset, 12, rng_seed=1)
        assert transitive_closure(seeds, 10, rng_seed=2) == transitive_closure(seeds, 10, rng_seed=2)


class TestBuildStream:
    def seeds(self):
        return [
            TripletConstraint(0, 1, 4, created_at=0, source="seed"),
            TripletConstraint(2, 3, 5, created_at=1, source="seed"),
        ]

    def closure(self):
        return [TripletConstraint(1, 0, 5, created_at=2, source="closure")]

    def test_concatenates_in_creation_order(self):
        stream = build_stream(self.seeds(), self.closure())
        assert [t.created_at for t in stream] == [0, 1, 2]
        assert len(stream) == 3

    def test_exclusion_drops_matching_constraints(self):
        # excluding (1, 0) hits both the first seed's similar pair and the
        # closure triplet's
        stream = build_stream(self.seeds(), self.closure(), exclusions=[(1, 0)])
        assert [t.created_at for t in stream] == [1]
        # excluding the dissimilar pair works too
        stream = build_stream(self.seeds(), self.closure(), exclusions=[(5, 2)])
        assert [t.created_at for t in stream] == [0, 2]

    def test_duplicate_created_at_rejected(self):
        with pytest.raises(ValueError, match="created_at"):
            build_stream(self.seeds(), [TripletConstraint(1, 0, 5, created_at=1, source="closure")])

    def test_out_of_order_input_is_sorted(self):
        stream = build_stream(list(reversed(self.seeds())), self.closure())
        assert [t.created_at for t in stream] == [0, 1, 2]


class TestStreamFile:
    def test_round_trip(self, tmp_path):
        dataset = tiny_dataset(["a"] * 3 + ["b"] * 3)
        seeds = sample_seeds(dataset, 8, rng_seed=0)
        path = tmp_path / "stream.txt"
        write_stream(seeds, path)
        assert read_stream(path) == seeds
        assert len(path.read_text().splitlines()) == 8

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "stream.txt"
        path.write_text("0,seed,1,2,3\n1,seed,nope,2,3\n")
        with pytest.raises(ValueError, match="line 2"):
            read_stream(path)
        path.write_text("0,seed,1,2\n")
        with pytest.raises(ValueError, match="5 fields"):
            read_stream(path)
        path.write_text("0,mystery,1,2,3\n")
        with pytest.raises(ValueError, match="source"):
            read_stream(path)


def test_as_pairs_decomposition():
    t = TripletConstraint(3, 4, 5, created_at=7, source="seed")
    pairs = as_pairs([t])
    assert len(pairs) == 2
    assert (pairs[0].id_a, pairs[0].id_b, pairs[0].relation) == (3, 4, "similar")
    assert (pairs[1].id_a, pairs[1].id_b, pairs[1].relation) == (3, 5, "dissimilar")
    assert pairs[0].created_at == pairs[1].created_at == 7


def test_resolve_triplets():
    dataset = tiny_dataset(["a", "a", "b"])
    stream = [TripletConstraint(0, 1, 2, created_at=0, source="seed")]
    resolved = resolve_triplets(dataset, stream)
    assert np.array_equal(resolved[0].anchor, dataset.instances[0].features)
    assert np.array_equal(resolved[0].negative, dataset.instances[2].features)
    with pytest.raises(ValueError, match="unknown instance id 9"):
        resolve_triplets(dataset, [TripletConstraint(0, 1, 9, created_at=1, source="seed")])


def test_generated_streams_respect_labels_end_to_end():
    dataset = origin_centered_blobs(n_per_class=30, rng_seed=8)
    seeds = sample_seeds(dataset, 100, rng_seed=3)
    closure = transitive_closure(seeds, 100, rng_seed=4)
    stream = build_stream(seeds, closure)
    labels = {inst.id: inst.label for inst in dataset.instances}
    assert len({t.created_at for t in stream}) == len(stream)
    for t in stream:
        assert labels[t.anchor_id] == labels[t.positive_id] != labels[t.negative_id]
