"""Deployment of a trained model over a reference store.

Three read-only query procedures share the same machinery: per depth, the k
nearest reference items are scored by ``exp(-normalized distance) * depth
weight``, where distances are min-max normalized within that depth's
neighbor set.  Classification sums candidate scores per class; retrieval
ranks the candidates themselves; pair verification aggregates per-depth
similarity votes.

Stores and parameters are immutable at query time, so all three operations
can be called concurrently.  The store carries a fingerprint of the
parameters it was built from; querying with different parameters is refused
rather than silently served from a stale cache.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .errors import StaleStoreError
from .loss import embedding_distance
from .model import ParameterSet, forward


@dataclass
class ReferenceStore:
    """Labeled instances with their per-depth embeddings cached."""

    ids: np.ndarray
    labels: list[str]
    embeddings: np.ndarray  # (depths, n, embedding_dim)
    fingerprint: str

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def depths(self) -> int:
        return self.embeddings.shape[0]


def build_store(params: ParameterSet, dataset: LabeledDataset) -> ReferenceStore:
    """Embed every instance at every depth and bind the cache to the parameters."""
    if not dataset.instances:
        raise ValueError("reference dataset is empty")
    traces = [forward(params, inst.features) for inst in dataset.instances]
    embeddings = np.stack(
        [np.stack([t.embeddings[depth] for t in traces]) for depth in range(params.depths)]
    )
    return ReferenceStore(
        ids=np.array([inst.id for inst in dataset.instances]),
        labels=[inst.label for inst in dataset.instances],
        embeddings=embeddings,
        fingerprint=params.fingerprint(),
    )


def _check_fresh(params: ParameterSet, store: ReferenceStore) -> None:
    if params.fingerprint() != store.fingerprint:
        raise StaleStoreError("store was built from different parameters; rebuild it")


def _depth_candidates(store: ReferenceStore, query_embeddings, depth: int, k: int):
    """Indices and scores of the k nearest store items at one depth.

    Neighbors are ordered by (distance, id) for determinism.  Distances are
    normalized within the neighbor set; when all k neighbors are equidistant
    (k = 1 included) the normalized distance is defined as 0, so each scores
    ``exp(0) * weight``.
    """
    dists = np.linalg.norm(store.embeddings[depth] - query_embeddings[depth], axis=1)
    order = np.lexsort((store.ids, dists))[:k]
    selected = dists[order]
    d_min = selected.min()
    d_max = selected.max()
    if d_max > d_min:
        normalized = (selected - d_min) / (d_max - d_min)
    else:
        normalized = np.zeros_like(selected)
    return order, np.exp(-normalized)


def classify_embedded(
    store: ReferenceStore, query_embeddings, depth_weights, k: int
) -> dict[str, float]:
    """Class-association scores for a query given its per-depth embeddings."""
    scores: dict[str, float] = {}
    for depth in range(store.depths):
        order, raw = _depth_candidates(store, query_embeddings, depth, k)
        weighted = raw * depth_weights[depth]
        for idx, score in zip(order, weighted):
            label = store.labels[idx]
            scores[label] = scores.get(label, 0.0) + float(score)
    return scores


def decide_label(scores: dict[str, float]) -> str:
    """Argmax class; ties broken by the smallest class identifier."""
    return min(scores, key=lambda label: (-scores[label], label))


def classify(params: ParameterSet, store: ReferenceStore, x, k: int) -> tuple[str, dict[str, float]]:
    """Weighted k-NN classification of one query across all depths."""
    _check_fresh(params, store)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(store):
        raise ValueError(f"k = {k} exceeds store size {len(store)}")
    trace = forward(params, x)
    scores = classify_embedded(store, trace.embeddings, params.depth_weights, k)
    return decide_label(scores), scores


def similarity_from_distances(distances, depth_weights, threshold: float) -> tuple[float, str]:
    """Aggregate per-depth similarity votes into a probability and a decision."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold!r}")
    votes = np.asarray([1.0 if d / 2.0 < threshold else 0.0 for d in distances])
    p = float(np.dot(np.asarray(depth_weights, dtype=float), votes))
    return p, ("similar" if p >= 0.5 else "dissimilar")


def pair_distances(params: ParameterSet, x1, x2) -> np.ndarray:
    """Per-depth embedding distances of a raw feature pair, clamped to [0, 2]."""
    t1 = forward(params, x1)
    t2 = forward(params, x2)
    return np.array(
        [embedding_distance(t1.embeddings[d], t2.embeddings[d]) for d in range(params.depths)]
    )


def similarity_probability(params: ParameterSet, x1, x2, threshold: float) -> tuple[float, str]:
    """Probability that a pair is similar: the weight mass of agreeing depths."""
    dists = pair_distances(params, x1, x2)
    return similarity_from_distances(dists, params.depth_weights, threshold)


def continuous_similarity_score(distances, depth_weights) -> float:
    """Graded counterpart of the vote: weighted mean closeness 1 - D/2.

    1 for an identical pair at every depth, 0 for an antipodal one; the
    default score fed to ROC sweeps, where the hard vote would be too coarse.
    """
    d = np.asarray(distances, dtype=float)
    return float(np.dot(np.asarray(depth_weights, dtype=float), 1.0 - d / 2.0))


@dataclass
class RetrievalResult:
    """Ranked distinct items with scores; ``short`` flags a result below k."""

    items: list[tuple[int, float]]
    short: bool


def retrieve_embedded(
    store: ReferenceStore, query_embeddings, depth_weights, k: int
) -> RetrievalResult:
    """Top-k distinct store items by cross-depth similarity score.

    Gathers k candidates per depth, ranks all of them by score (ties by the
    smaller instance id), and keeps the best-scoring occurrence of each id.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    per_depth = min(k, len(store))
    candidates: list[tuple[float, int]] = []
    for depth in range(store.depths):
        order, raw = _depth_candidates(store, query_embeddings, depth, per_depth)
        weighted = raw * depth_weights[depth]
        candidates.extend((float(s), int(store.ids[i])) for i, s in zip(order, weighted))

    candidates.sort(key=lambda c: (-c[0], c[1]))
    items: list[tuple[int, float]] = []
    seen: set[int] = set()
    for score, item_id in candidates:
        if item_id in seen:
            continue
        seen.add(item_id)
        items.append((item_id, score))
        if len(items) == k:
            break
    return RetrievalResult(items=items, short=len(items) < k)


def retrieve(params: ParameterSet, store: ReferenceStore, x, k: int) -> RetrievalResult:
    """Analogue retrieval: the k store items most similar to the query."""
    _check_fresh(params, store)
    trace = forward(params, x)
    return retrieve_embedded(store, trace.embeddings, params.depth_weights, k)
