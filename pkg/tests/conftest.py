import numpy as np
import pytest

from oahu.model import ForwardTrace, ModelConfig, ParameterSet, init_model
from oahu.synthetic import make_blobs


@pytest.fixture
def tiny_config():
    return ModelConfig(
        input_dim=2, hidden_layers=1, hidden_units=2, embedding_dim=2, tau=0.5, seed=7
    )


@pytest.fixture
def tiny_params(tiny_config):
    return init_model(tiny_config)


def random_unit(rng, dim):
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def unit_trace(embeddings):
    """Hand-built trace carrying only unit embeddings (enough for the loss ops)."""
    embs = [np.asarray(e, dtype=float) for e in embeddings]
    return ForwardTrace(
        activations=[],
        preacts=[],
        raw_embeddings=[e.copy() for e in embs],
        embeddings=embs,
        norms=np.array([np.linalg.norm(e) for e in embs]),
        degenerate=np.zeros(len(embs), dtype=bool),
    )


def stub_params(depths, emb_dim, weights=None):
    """Minimal parameter set for loss-level tests (head shapes + weights only)."""
    heads = [np.zeros((1, emb_dim)) for _ in range(depths)]
    w = np.full(depths, 1.0 / depths) if weights is None else np.asarray(weights, dtype=float)
    return ParameterSet(hidden=[], heads=heads, depth_weights=w)


def origin_centered_blobs(n_per_class=500, distance=6.0, spread=1.0, rng_seed=11):
    """Three unit-variance clusters at mutual ``distance``, centroid at the origin.

    The network has no bias terms, so embeddings depend on input direction
    only; centering the class triangle on the origin gives each class its
    own angular sector.
    """
    radius = distance / np.sqrt(3.0)
    angles = np.pi / 2 + np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
    centers = np.stack([radius * np.cos(angles), radius * np.sin(angles)], axis=1)
    return make_blobs(centers, n_per_class, spread=spread, rng_seed=rng_seed)


def knn_majority_predict(train_x, train_y, queries, k):
    """Plain Euclidean k-NN with majority vote, ties to the smallest label."""
    train_y = np.asarray(train_y)
    out = []
    for q in np.asarray(queries, dtype=float):
        dists = np.linalg.norm(train_x - q, axis=1)
        nearest = np.argsort(dists, kind="stable")[:k]
        labels, counts = np.unique(train_y[nearest], return_counts=True)
        out.append(sorted(zip(-counts, labels))[0][1])
    return out
