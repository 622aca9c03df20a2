import math

import numpy as np
import pytest

from conftest import origin_centered_blobs
from oahu.data import split
from oahu.deploy import (
    ReferenceStore,
    build_store,
    classify,
    classify_embedded,
    continuous_similarity_score,
    decide_label,
    retrieve,
    retrieve_embedded,
    similarity_from_distances,
    similarity_probability,
)
from oahu.errors import StaleStoreError
from oahu.model import ModelConfig, forward, init_model
from oahu.training import Triplet, train_step

E_INV = math.exp(-1.0)


def small_model(layers=1, seed=3, dim=2):
    config = ModelConfig(
        input_dim=dim, hidden_layers=layers, hidden_units=4, embedding_dim=3, tau=0.3, seed=seed
    )
    return init_model(config), config


def blob_fixture(n_per_class=15, seed=4):
    dataset = origin_centered_blobs(n_per_class=n_per_class, rng_seed=seed)
    return split(dataset, 0.5, rng_seed=1)


class TestBuildStore:
    def test_single_instance_store(self):
        params, config = small_model()
        dataset, _ = blob_fixture(n_per_class=1)
        store = build_store(params, dataset)
        assert store.embeddings.shape == (config.depths, len(dataset), config.embedding_dim)
        for depth in range(config.depths):
            assert abs(np.linalg.norm(store.embeddings[depth, 0]) - 1.0) <= 1e-9

    def test_embeddings_match_fresh_forward(self):
        params, config = small_model(layers=2)
        dataset, _ = blob_fixture()
        store = build_store(params, dataset)
        for row, inst in enumerate(dataset.instances):
            trace = forward(params, inst.features)
            for depth in range(config.depths):
                assert np.array_equal(store.embeddings[depth, row], trace.embeddings[depth])

    def test_fingerprint_changes_after_training(self):
        params, config = small_model()
        dataset, _ = blob_fixture()
        store = build_store(params, dataset)
        rng = np.random.default_rng(0)
        train_step(
            params,
            Triplet(rng.normal(size=2), rng.normal(size=2), rng.normal(size=2)),
            config,
        )
        rebuilt = build_store(params, dataset)
        assert rebuilt.fingerprint != store.fingerprint
        with pytest.raises(StaleStoreError):
            classify(params, store, dataset.instances[0].features, 1)


class TestClassify:
    def test_hand_computed_two_depth_fixture(self):
        # depth 0: query (1,0) against (1,0), (0,1), (-1,0): k=2 picks ids 0, 1
        # at distances 0 and sqrt(2) -> normalized 0 and 1.  depth 1: query
        # (.6,.8) against (0,1), (1,0), (0,-1): k=2 picks ids 0, 1 again.
        # class A collects e^0*(.4+.6) = 1, class B collects e^-1*(.4+.6).
        store = ReferenceStore(
            ids=np.array([0, 1, 2]),
            labels=["A", "B", "B"],
            embeddings=np.array(
                [
                    [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]],
                    [[0.0, 1.0], [1.0, 0.0], [0.0, -1.0]],
                ]
            ),
            fingerprint="hand",
        )
        queries = [np.array([1.0, 0.0]), np.array([0.6, 0.8])]
        scores = classify_embedded(store, queries, np.array([0.4, 0.6]), k=2)
        assert scores["A"] == pytest.approx(1.0, abs=1e-9)
        assert scores["B"] == pytest.approx(E_INV, abs=1e-9)
        assert decide_label(scores) == "A"

    def test_single_depth_k1_reduces_to_nearest_neighbor(self):
        params, _ = small_model(layers=0)
        dev, test = blob_fixture()
        store = build_store(params, dev)
        for inst in test.instances:
            label, _ = classify(params, store, inst.features, 1)
            q = forward(params, inst.features).embeddings[0]
            dists = np.linalg.norm(store.embeddings[0] - q, axis=1)
            best = np.lexsort((store.ids, dists))[0]
            assert label == store.labels[best]

    def test_equidistant_neighbors_score_the_depth_weight(self):
        store = ReferenceStore(
            ids=np.array([0, 1]),
            labels=["A", "B"],
            embeddings=np.array([[[0.0, 1.0], [0.0, -1.0]]]),
            fingerprint="hand",
        )
        # query equidistant from both: normalized distance defined as 0
        scores = classify_embedded(store, [np.array([1.0, 0.0])], np.array([1.0]), k=2)
        assert scores["A"] == pytest.approx(1.0, abs=1e-12)
        assert scores["B"] == pytest.approx(1.0, abs=1e-12)
        assert decide_label(scores) == "A"  # tie broken by smaller label

    def test_argument_validation(self):
        params, _ = small_model()
        dev, _ = blob_fixture(n_per_class=2)
        store = build_store(params, dev)
        with pytest.raises(ValueError, match="k"):
            classify(params, store, dev.instances[0].features, 0)
        with pytest.raises(ValueError, match="store size"):
            classify(params, store, dev.instances[0].features, len(store) + 1)

    def test_repeated_calls_are_identical(self):
        params, _ = small_model(layers=2)
        dev, test = blob_fixture()
        store = build_store(params, dev)
        x = test.instances[0].features
        assert classify(params, store, x, 3) == classify(params, store, x, 3)


class TestSimilarity:
    def test_identical_inputs_are_similar_with_certainty(self):
        params, _ = small_model(layers=2)
        x = np.array([0.7, -1.1])
        p, decision = similarity_probability(params, x, x, 0.4)
        assert p == pytest.approx(1.0, abs=1e-12)
        assert decision == "similar"

    def test_all_depths_voting_no(self):
        p, decision = similarity_from_distances([1.9, 1.8], [0.5, 0.5], 0.5)
        assert p == 0.0
        assert decision == "dissimilar"

    def test_weighted_vote_fixture(self):
        # votes (1, 0) under weights (0.7, 0.3) -> P = 0.7, similar
        p, decision = similarity_from_distances([0.8, 1.2], [0.7, 0.3], 0.5)
        assert p == pytest.approx(0.7, abs=1e-12)
        assert decision == "similar"

    @pytest.mark.parametrize("threshold", [0.0, 1.0, -0.5, 2.0])
    def test_threshold_domain(self, threshold):
        with pytest.raises(ValueError, match="threshold"):
            similarity_from_distances([0.5], [1.0], threshold)

    def test_continuous_score_separates_identical_from_antipodal(self):
        from oahu.metrics import roc_auc

        weights = np.array([0.25, 0.75])
        # identical pairs score 1 at every depth, antipodal pairs score 0
        same = [continuous_similarity_score([0.0, 0.0], weights) for _ in range(5)]
        diff = [continuous_similarity_score([2.0, 2.0], weights) for _ in range(5)]
        assert same == [1.0] * 5
        assert diff == [0.0] * 5
        _, auc = roc_auc(same + diff, [1] * 5 + [0] * 5)
        assert auc == 1.0

    def test_probability_monotone_in_threshold(self):
        rng = np.random.default_rng(5)
        dists = rng.uniform(0.0, 2.0, size=4)
        weights = np.full(4, 0.25)
        previous = -1.0
        for threshold in np.linspace(0.01, 0.99, 25):
            p, _ = similarity_from_distances(dists, weights, threshold)
            assert p >= previous
            previous = p


class TestRetrieve:
    def hand_store(self):
        return ReferenceStore(
            ids=np.array([0, 1, 2, 3]),
            labels=["A", "A", "B", "B"],
            embeddings=np.array(
                [
                    [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
                    [[0.0, 1.0], [1.0, 0.0], [0.6, 0.8], [-1.0, 0.0]],
                ]
            ),
            fingerprint="hand",
        )

    def test_hand_computed_cross_depth_dedup(self):
        # depth 0 candidates: id0 at score .5, id1 at .5e^-1; depth 1: id1 at
        # .5, id2 at .5e^-1.  id1 keeps its best score; the sqrt(2)-tie at
        # depth 0 breaks toward the smaller id.
        store = self.hand_store()
        queries = [np.array([1.0, 0.0]), np.array([1.0, 0.0])]
        result = retrieve_embedded(store, queries, np.array([0.5, 0.5]), k=2)
        assert not result.short
        assert [i for i, _ in result.items] == [0, 1]
        assert result.items[0][1] == pytest.approx(0.5, abs=1e-9)
        assert result.items[1][1] == pytest.approx(0.5, abs=1e-9)

        # at k=3 depth 1 selects ids 1, 2, 0 with d_max = sqrt(2), so id2
        # normalizes to sqrt(0.8)/sqrt(2) = sqrt(0.4)
        result = retrieve_embedded(store, queries, np.array([0.5, 0.5]), k=3)
        assert [i for i, _ in result.items] == [0, 1, 2]
        assert result.items[2][1] == pytest.approx(0.5 * math.exp(-math.sqrt(0.4)), abs=1e-9)

    def test_self_retrieval_ranks_first(self):
        params, _ = small_model(layers=1)
        dev, _ = blob_fixture()
        store = build_store(params, dev)
        inst = dev.instances[3]
        result = retrieve(params, store, inst.features, 1)
        assert result.items[0][0] == inst.id

    def test_single_depth_order_matches_ascending_distance(self):
        params, _ = small_model(layers=0)
        dev, test = blob_fixture()
        store = build_store(params, dev)
        q = test.instances[0].features
        result = retrieve(params, store, q, 5)
        emb = forward(params, q).embeddings[0]
        dists = np.linalg.norm(store.embeddings[0] - emb, axis=1)
        expected = [int(store.ids[i]) for i in np.lexsort((store.ids, dists))[:5]]
        assert [i for i, _ in result.items] == expected

    def test_no_duplicates_and_scores_non_increasing(self):
        rng = np.random.default_rng(9)
        params, _ = small_model(layers=3, seed=11)
        dev, test = blob_fixture(n_per_class=20)
        store = build_store(params, dev)
        for inst in test.instances[:10]:
            result = retrieve(params, store, inst.features, 7)
            ids = [i for i, _ in result.items]
            scores = [s for _, s in result.items]
            assert len(set(ids)) == len(ids)
            assert all(a >= b for a, b in zip(scores, scores[1:]))

    def test_short_result_is_flagged(self):
        params, _ = small_model(layers=0)
        dev, _ = blob_fixture(n_per_class=1)  # 3 instances total
        store = build_store(params, dev)
        result = retrieve(params, store, dev.instances[0].features, 5)
        assert result.short
        assert len(result.items) == len(store)
        with pytest.raises(ValueError, match="k"):
            retrieve(params, store, dev.instances[0].features, 0)
