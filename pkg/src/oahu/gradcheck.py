"""Finite-difference verification of the analytic gradients.

The check perturbs every head and hidden matrix entry of a small random
model, re-evaluates the overall loss with the round's thresholds held
fixed (they are constants of the step, exactly as the updates treat them),
and compares the central difference against the analytic gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelConfig, ParameterSet, forward, init_model, with_seed
from .training import Triplet, backward
from .loss import TripletLossReport, embedding_distance, triplet_loss

# Size ceilings: finite differences over every entry get slow (and the test
# loses its point) on big models.
SIZE_LIMITS = {"input_dim": 16, "hidden_layers": 4, "hidden_units": 16, "embedding_dim": 8}

DEFAULT_EPS = 1e-5
DEFAULT_TOLERANCE = 1e-4

# Entries where both sides are below this magnitude are compared on an
# absolute scale instead; otherwise finite-difference roundoff on exact
# zeros (dead ReLU paths) would dominate the relative error.
REL_FLOOR = 1e-6


def frozen_bounds_loss(params: ParameterSet, triplet: Triplet, report: TripletLossReport) -> float:
    """Overall loss at the current parameters with the report's bounds fixed."""
    anchor = forward(params, triplet.anchor)
    positive = forward(params, triplet.positive)
    negative = forward(params, triplet.negative)
    total = 0.0
    for depth, rec in enumerate(report.depths):
        d_pos = embedding_distance(anchor.embeddings[depth], positive.embeddings[depth])
        d_neg = embedding_distance(anchor.embeddings[depth], negative.embeddings[depth])
        attr = max(0.0, (d_pos - rec.bounds.sim) / (2.0 - rec.bounds.sim))
        rep = max(0.0, 1.0 - d_neg / rec.bounds.dis)
        total += params.depth_weights[depth] * 0.5 * (attr + rep)
    return total


def finite_difference_gradients(
    params: ParameterSet, triplet: Triplet, report: TripletLossReport, eps: float = DEFAULT_EPS
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Central-difference gradients for every head and hidden matrix entry."""

    def fd_matrix(m: np.ndarray) -> np.ndarray:
        grad = np.empty_like(m)
        it = np.nditer(m, flags=["multi_index"])
        for _ in it:
            ij = it.multi_index
            original = m[ij]
            m[ij] = original + eps
            hi = frozen_bounds_loss(params, triplet, report)
            m[ij] = original - eps
            lo = frozen_bounds_loss(params, triplet, report)
            m[ij] = original
            grad[ij] = (hi - lo) / (2.0 * eps)
        return grad

    return [fd_matrix(m) for m in params.heads], [fd_matrix(m) for m in params.hidden]


def max_relative_error(analytic: list[np.ndarray], numeric: list[np.ndarray]) -> float:
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), REL_FLOOR)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


def check_model_gradients(
    params: ParameterSet,
    triplet: Triplet,
    tau: float,
    eps: float = DEFAULT_EPS,
    corrupt=None,
) -> float:
    """Max relative error between analytic and finite-difference gradients.

    ``corrupt``, when given, is called with the analytic (head, hidden)
    gradient lists before comparison; tests use it to confirm the harness
    actually notices a wrong gradient.
    """
    anchor = forward(params, triplet.anchor)
    positive = forward(params, triplet.positive)
    negative = forward(params, triplet.negative)
    report = triplet_loss(params, anchor, positive, negative, tau)
    head_grads, hidden_grads = backward(params, anchor, positive, negative, report)
    if corrupt is not None:
        corrupt(head_grads, hidden_grads)
    fd_heads, fd_hidden = finite_difference_gradients(params, triplet, report, eps=eps)
    return max(
        max_relative_error(head_grads, fd_heads),
        max_relative_error(hidden_grads, fd_hidden),
    )


@dataclass
class GradCheckReport:
    trials: int
    max_rel_error: float
    tolerance: float
    per_trial: list[float]

    @property
    def passed(self) -> bool:
        # Zero trials is a vacuous pass; callers should warn.
        return self.trials == 0 or self.max_rel_error <= self.tolerance


def run_gradient_check(
    config: ModelConfig,
    trials: int = 10,
    eps: float = DEFAULT_EPS,
    tolerance: float = DEFAULT_TOLERANCE,
    corrupt=None,
) -> GradCheckReport:
    """Run the finite-difference comparison over fresh random models.

    Each trial initializes a new model (seed offset by the trial index) and
    draws a random triplet of inputs in [0, 1]^d from the same generator, so
    the whole report is reproducible from the config.
    """
    for name, limit in SIZE_LIMITS.items():
        value = getattr(config, name)
        if value > limit:
            raise ValueError(f"gradient check requires {name} <= {limit}, got {value}")
    if trials < 0:
        raise ValueError(f"trials must be >= 0, got {trials}")

    rng = np.random.default_rng(config.seed)
    per_trial = []
    for trial in range(trials):
        params = init_model(with_seed(config, (config.seed + trial) % 2**64))
        triplet = Triplet(
            anchor=rng.uniform(0.0, 1.0, config.input_dim),
            positive=rng.uniform(0.0, 1.0, config.input_dim),
            negative=rng.uniform(0.0, 1.0, config.input_dim),
        )
        per_trial.append(check_model_gradients(params, triplet, config.tau, eps=eps, corrupt=corrupt))

    max_err = max(per_trial) if per_trial else 0.0
    return GradCheckReport(trials=trials, max_rel_error=max_err, tolerance=tolerance, per_trial=per_trial)
