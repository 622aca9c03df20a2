"""Single-pass trainer: per-constraint gradient step plus hedge reweighting.

Each arriving triplet is processed exactly once, in stream order.  Within a
step, every quantity (gradients, hedge inputs) is computed from the pre-step
parameter snapshot, then updates are applied in a fixed order: heads, hidden
layers, depth weights.  Training is strictly sequential; readers should be
handed ``params.copy()`` snapshots, never the live object.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .loss import TripletLossReport, local_loss_gradients, triplet_loss
from .model import EPS_NORM, ForwardTrace, ModelConfig, ParameterSet, forward

_SIMPLEX_TOL = 1e-6
_LOSS_SLACK = 1e-12


@dataclass(frozen=True)
class Triplet:
    """One feature-resolved constraint: anchor similar to positive, dissimilar to negative."""

    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray


@dataclass
class HedgeResult:
    """Outcome of one weight-update round.

    ``pre_normalization`` is the vector after the branch update and the
    smoothing floor but before renormalization; its entries are guaranteed
    to be at least ``smoothing / n``.
    """

    weights: np.ndarray
    pre_normalization: np.ndarray
    used_exponential: np.ndarray


def hedge_update(weights, losses, beta: float, smoothing: float) -> HedgeResult:
    """One multiplicative-weights round over the per-depth losses.

    A depth takes the exponential branch ``w * beta**loss`` when
    ``beta**min(losses) * ln(loss) > beta - 1`` and the linear branch
    ``w * (1 - (1 - beta) * loss)`` otherwise; a zero loss always goes linear
    (the condition is read as false at ln 0 = -inf), leaving that weight
    untouched.  Updated weights are floored at ``smoothing / n`` and
    renormalized onto the simplex, so no depth is ever eliminated outright.
    """
    weights = np.asarray(weights, dtype=float)
    losses = np.asarray(losses, dtype=float)
    if weights.shape != losses.shape or weights.ndim != 1:
        raise ValueError(f"weights {weights.shape} and losses {losses.shape} must be equal-length vectors")
    if abs(weights.sum() - 1.0) > _SIMPLEX_TOL:
        raise ValueError(f"weights must sum to 1, got {weights.sum()!r}")
    if losses.min() < -_LOSS_SLACK or losses.max() > 1.0 + _LOSS_SLACK:
        raise ValueError("losses must lie in [0, 1]")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta!r}")
    if not 0.0 < smoothing < 1.0:
        raise ValueError(f"smoothing must lie in (0, 1), got {smoothing!r}")

    losses = np.clip(losses, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        log_losses = np.log(losses)
    use_exponential = (beta ** losses.min()) * log_losses > (beta - 1.0)
    updated = np.where(
        use_exponential,
        weights * beta**losses,
        weights * (1.0 - (1.0 - beta) * losses),
    )
    floored = np.maximum(updated, smoothing / weights.size)
    return HedgeResult(
        weights=floored / floored.sum(),
        pre_normalization=floored,
        used_exponential=use_exponential,
    )


def _through_normalization(grad_f: np.ndarray, trace: ForwardTrace, depth: int) -> np.ndarray:
    # Jacobian of v -> v / max(|v|, floor): the usual tangential projection
    # above the floor, a plain 1/floor scaling below it.
    if trace.degenerate[depth]:
        return grad_f / EPS_NORM
    f = trace.embeddings[depth]
    return (grad_f - np.dot(f, grad_f) * f) / trace.norms[depth]


def backward(
    params: ParameterSet,
    anchor: ForwardTrace,
    positive: ForwardTrace,
    negative: ForwardTrace,
    report: TripletLossReport,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradients of the weighted overall loss for every head and hidden matrix.

    Head ``l`` only sees its own depth, scaled by that depth's weight; hidden
    layer ``l`` accumulates contributions from every depth at or above it,
    because all deeper metric models route through it.  Gradients flow
    through the unit-sphere projection exactly; ReLU uses subgradient zero
    at zero.
    """
    if len(report.depths) != params.depths:
        raise ValueError(
            f"loss report covers {len(report.depths)} depths, parameters have {params.depths}"
        )
    local = local_loss_gradients(report, anchor, positive, negative)
    head_grads = [np.zeros_like(m) for m in params.heads]
    hidden_grads = [np.zeros_like(m) for m in params.hidden]

    for role, trace in enumerate((anchor, positive, negative)):
        carry = None  # gradient w.r.t. the current activation, from deeper layers
        for depth in range(params.depths - 1, -1, -1):
            grad_f = params.depth_weights[depth] * local[depth][role]
            grad_g = _through_normalization(grad_f, trace, depth)
            head_grads[depth] += np.outer(trace.activations[depth], grad_g)
            grad_h = params.heads[depth] @ grad_g
            carry = grad_h if carry is None else carry + grad_h
            if depth > 0:
                grad_z = np.where(trace.preacts[depth - 1] > 0.0, carry, 0.0)
                hidden_grads[depth - 1] += np.outer(grad_z, trace.activations[depth - 1])
                carry = params.hidden[depth - 1].T @ grad_z
    return head_grads, hidden_grads


@dataclass
class StepReport:
    """Everything one training step observed and did."""

    loss: TripletLossReport
    weights_before: np.ndarray
    weights_after: np.ndarray
    weights_pre_normalization: np.ndarray
    used_exponential: np.ndarray
    grad_norms: dict[str, float]


def _check_triplet(triplet: Triplet, input_dim: int) -> Triplet:
    arrays = {}
    for name in ("anchor", "positive", "negative"):
        arr = np.asarray(getattr(triplet, name), dtype=float)
        if arr.ndim != 1 or arr.shape[0] != input_dim:
            raise ValueError(f"{name} has shape {arr.shape}, model expects ({input_dim},)")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contains non-finite values")
        arrays[name] = arr
    return Triplet(**arrays)


def train_step(params: ParameterSet, triplet: Triplet, config: ModelConfig) -> StepReport:
    """Apply one constraint: forward x3, loss, gradient step, weight update.

    All inputs to the updates come from the pre-step snapshot; on a rejected
    (malformed) constraint the parameters are left untouched.
    """
    triplet = _check_triplet(triplet, config.input_dim)

    anchor = forward(params, triplet.anchor)
    positive = forward(params, triplet.positive)
    negative = forward(params, triplet.negative)
    report = triplet_loss(params, anchor, positive, negative, config.tau)
    head_grads, hidden_grads = backward(params, anchor, positive, negative, report)
    hedge = hedge_update(
        params.depth_weights,
        [rec.local for rec in report.depths],
        config.beta,
        config.smoothing,
    )

    weights_before = params.depth_weights.copy()
    lr = config.learning_rate
    for m, g in zip(params.heads, head_grads):
        m -= lr * g
    for m, g in zip(params.hidden, hidden_grads):
        m -= lr * g
    params.depth_weights = hedge.weights

    grad_norms = {f"head{depth}": float(np.linalg.norm(g)) for depth, g in enumerate(head_grads)}
    grad_norms.update(
        {f"hidden{layer}": float(np.linalg.norm(g)) for layer, g in enumerate(hidden_grads, start=1)}
    )
    return StepReport(
        loss=report,
        weights_before=weights_before,
        weights_after=params.depth_weights.copy(),
        weights_pre_normalization=hedge.pre_normalization,
        used_exponential=hedge.used_exponential,
        grad_norms=grad_norms,
    )


@dataclass
class TrainingLog:
    """Per-step bookkeeping of one training run."""

    losses: list[float] = field(default_factory=list)
    contributed: list[bool] = field(default_factory=list)
    weights: list[np.ndarray] = field(default_factory=list)
    step_seconds: list[float] = field(default_factory=list)
    window: int = 100

    @property
    def step_count(self) -> int:
        return len(self.losses)

    @property
    def contributed_count(self) -> int:
        return sum(self.contributed)

    def record(self, report: StepReport, seconds: float) -> None:
        self.losses.append(report.loss.overall)
        self.contributed.append(report.loss.contributed)
        self.weights.append(report.weights_after)
        self.step_seconds.append(seconds)

    def mean_loss(self, start: int, stop: int) -> float:
        if not 0 <= start < stop <= self.step_count:
            raise ValueError(f"bad step range [{start}, {stop}) for {self.step_count} steps")
        return float(np.mean(self.losses[start:stop]))

    def running_mean(self) -> float:
        """Mean overall loss of the trailing window."""
        if not self.losses:
            raise ValueError("empty training log")
        return float(np.mean(self.losses[-self.window:]))

    def records(self):
        """One dict per step, ready for line-delimited export."""
        for step, (loss, contributed, weights) in enumerate(
            zip(self.losses, self.contributed, self.weights)
        ):
            yield {
                "step": step,
                "loss": loss,
                "contributed": contributed,
                "weights": [float(w) for w in weights],
            }

    def write_jsonl(self, path, header: dict | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if header is not None:
                fh.write(json.dumps(header) + "\n")
            for record in self.records():
                fh.write(json.dumps(record) + "\n")


def train_stream(
    params: ParameterSet,
    triplets,
    config: ModelConfig,
    on_step=None,
) -> TrainingLog:
    """Run one online pass over the given constraints, in order.

    Deterministic given the initial parameters and the stream.  The first
    malformed constraint aborts with its index; earlier steps remain applied.
    ``on_step(index, report)`` is invoked after each step when supplied.
    """
    triplets = list(triplets)
    if not triplets:
        raise ValueError("constraint stream is empty")
    params.validate_shapes(config)

    log = TrainingLog()
    for index, triplet in enumerate(triplets):
        started = time.perf_counter()
        try:
            report = train_step(params, triplet, config)
        except ValueError as exc:
            raise ValueError(f"constraint {index}: {exc}") from exc
        log.record(report, time.perf_counter() - started)
        if on_step is not None:
            on_step(index, report)
    return log
