"""Adaptive-bound triplet loss: distance, thresholds, hinge losses, gradients.

The similarity and dissimilarity thresholds are exponential functions of the
pre-update distance, pinned by the boundary conditions

    sim_threshold(0) = 0        sim_threshold(2) = tau
    dis_threshold(0) = 2 - tau  dis_threshold(2) = 2

which gives ``0 <= sim_threshold(D) <= min(D, tau)`` and
``max(D, 2 - tau) <= dis_threshold(D) <= 2`` for every D in [0, 2].  Both
hinges are therefore active for generic inputs, so every constraint in the
stream produces an update; the only zero-loss configuration is a coincident
similar pair together with an antipodal dissimilar pair.

The thresholds for a round are computed from the distances *before* the
update and treated as constants by the gradients; differentiating through
them would change the loss semantics the separation guarantee relies on.

All functions here are pure and safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import TAU_MAX, ParameterSet, ForwardTrace

# Slack absorbed when validating/clamping distances: unit-sphere projection
# leaves norms exact only to ~1e-9.
_DIST_SLACK = 1e-9

_UNIT_TOL = 1e-6


def embedding_distance(f_i, f_j) -> float:
    """Distance between two embeddings with boundary snapping.

    Values within normalization noise (1e-9) of 0 or 2 are snapped onto the
    boundary, so a coincident pair has exactly zero attractive loss and an
    antipodal pair exactly zero repulsive loss.
    """
    d = float(np.linalg.norm(np.asarray(f_i, dtype=float) - np.asarray(f_j, dtype=float)))
    if d < _DIST_SLACK:
        return 0.0
    if d > 2.0 - _DIST_SLACK:
        return 2.0
    return d


def _check_tau(tau: float) -> None:
    if not 0.0 < tau < TAU_MAX:
        raise ValueError(f"tau must lie in (0, 2/3), got {tau!r}")


def _clamp_distance(d: float, what: str = "distance") -> float:
    if not -_DIST_SLACK <= d <= 2.0 + _DIST_SLACK:
        raise ValueError(f"{what} must lie in [0, 2], got {d!r}")
    return min(max(d, 0.0), 2.0)


def distance(f_i, f_j) -> float:
    """Euclidean distance between two unit embeddings, clamped to [0, 2]."""
    f_i = np.asarray(f_i, dtype=float)
    f_j = np.asarray(f_j, dtype=float)
    for name, f in (("f_i", f_i), ("f_j", f_j)):
        norm = np.linalg.norm(f)
        if abs(norm - 1.0) > _UNIT_TOL:
            raise ValueError(f"{name} is not unit norm (|{name}| = {norm:.9f})")
    return min(max(float(np.linalg.norm(f_i - f_j)), 0.0), 2.0)


def sim_threshold(d_orig: float, tau: float) -> float:
    """Similarity threshold for a pair at pre-update distance ``d_orig``.

    Strictly increasing in ``d_orig``; never exceeds ``min(d_orig, tau)``, so
    pulling a similar pair inside it is always a real improvement.
    """
    _check_tau(tau)
    d = _clamp_distance(d_orig)
    return tau * math.expm1(d) / math.expm1(2.0)


def dis_threshold(d_orig: float, tau: float) -> float:
    """Dissimilarity threshold for a pair at pre-update distance ``d_orig``.

    Strictly increasing in ``d_orig``, with range [2 - tau, 2]; never falls
    below ``d_orig`` itself.
    """
    _check_tau(tau)
    d = _clamp_distance(d_orig)
    return tau * math.expm1(-d) / math.expm1(-2.0) + (2.0 - tau)


def attractive_loss(d_pos: float, bound: float) -> float:
    """Hinge penalty for a similar pair sitting outside its threshold."""
    d = _clamp_distance(d_pos, "d_pos")
    if not 0.0 <= bound < 2.0:
        raise ValueError(f"similarity bound must lie in [0, 2), got {bound!r}")
    return max(0.0, (d - bound) / (2.0 - bound))


def repulsive_loss(d_neg: float, bound: float) -> float:
    """Hinge penalty for a dissimilar pair sitting inside its threshold."""
    d = _clamp_distance(d_neg, "d_neg")
    if not 0.0 < bound <= 2.0:
        raise ValueError(f"dissimilarity bound must lie in (0, 2], got {bound!r}")
    return max(0.0, 1.0 - d / bound)


@dataclass(frozen=True)
class BoundPair:
    """Frozen per-round thresholds for one depth."""

    sim: float
    dis: float


def compute_bounds(d_pos: float, d_neg: float, tau: float) -> BoundPair:
    return BoundPair(sim=sim_threshold(d_pos, tau), dis=dis_threshold(d_neg, tau))


@dataclass(frozen=True)
class DepthLoss:
    """Loss breakdown of one triplet at one depth."""

    d_pos: float
    d_neg: float
    bounds: BoundPair
    attractive: float
    repulsive: float
    local: float


@dataclass(frozen=True)
class TripletLossReport:
    """Per-depth loss records plus the weighted overall loss.

    ``contributed`` is True exactly when the triplet moves the model, which
    for generic inputs is always.
    """

    depths: tuple[DepthLoss, ...]
    overall: float
    contributed: bool


def _check_trace(params: ParameterSet, trace: ForwardTrace, name: str) -> None:
    if len(trace.embeddings) != params.depths:
        raise ValueError(
            f"{name} trace has {len(trace.embeddings)} depths, parameters have {params.depths}"
        )
    for depth, f in enumerate(trace.embeddings):
        if f.shape[0] != params.heads[depth].shape[1]:
            raise ValueError(
                f"{name} trace embedding at depth {depth} has width {f.shape[0]}, "
                f"head expects {params.heads[depth].shape[1]}"
            )


def triplet_loss(
    params: ParameterSet,
    anchor: ForwardTrace,
    positive: ForwardTrace,
    negative: ForwardTrace,
    tau: float,
) -> TripletLossReport:
    """Evaluate the adaptive-bound loss of one triplet at every depth.

    Thresholds are derived from the distances observed in the given traces
    (the pre-update distances of this round) and recorded in the report so
    that gradients can treat them as constants.
    """
    _check_tau(tau)
    for name, trace in (("anchor", anchor), ("positive", positive), ("negative", negative)):
        _check_trace(params, trace, name)

    records = []
    locals_ = np.empty(params.depths)
    for depth in range(params.depths):
        d_pos = embedding_distance(anchor.embeddings[depth], positive.embeddings[depth])
        d_neg = embedding_distance(anchor.embeddings[depth], negative.embeddings[depth])
        bounds = compute_bounds(d_pos, d_neg, tau)
        attr = attractive_loss(d_pos, bounds.sim)
        rep = repulsive_loss(d_neg, bounds.dis)
        local = 0.5 * (attr + rep)
        locals_[depth] = local
        records.append(
            DepthLoss(d_pos=d_pos, d_neg=d_neg, bounds=bounds, attractive=attr, repulsive=rep, local=local)
        )

    overall = float(np.dot(params.depth_weights, locals_))
    return TripletLossReport(depths=tuple(records), overall=overall, contributed=overall > 0.0)


def local_loss_gradients(
    report: TripletLossReport,
    anchor: ForwardTrace,
    positive: ForwardTrace,
    negative: ForwardTrace,
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per-depth gradients of the local loss w.r.t. the three embeddings.

    Returns one ``(anchor, positive, negative)`` gradient triple per depth.
    The bounds inside ``report`` are constants of the round.  An inactive
    hinge contributes nothing; coincident embeddings (zero distance) have no
    defined direction and also contribute nothing.
    """
    grads = []
    for depth, rec in enumerate(report.depths):
        f_a = anchor.embeddings[depth]
        f_p = positive.embeddings[depth]
        f_n = negative.embeddings[depth]
        g_a = np.zeros_like(f_a)
        g_p = np.zeros_like(f_p)
        g_n = np.zeros_like(f_n)
        if rec.attractive > 0.0 and rec.d_pos > 0.0:
            pull = (0.5 / (2.0 - rec.bounds.sim)) * (f_a - f_p) / rec.d_pos
            g_a += pull
            g_p -= pull
        if rec.repulsive > 0.0 and rec.d_neg > 0.0:
            push = (0.5 / rec.bounds.dis) * (f_a - f_n) / rec.d_neg
            g_a -= push
            g_n += push
        grads.append((g_a, g_p, g_n))
    return grads
