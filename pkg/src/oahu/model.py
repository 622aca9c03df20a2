"""Network topology, parameter storage, initialization, and the forward pass.

The model is an over-complete feed-forward stack: ``hidden_layers`` ReLU
layers, with an independent linear embedding head attached to the input and
to every hidden activation.  Head ``l`` (depth ``l``) defines one metric
model; its raw output is projected onto the unit sphere so every pairwise
distance lives in [0, 2].  Depth 0 is a plain linear map from the input
features, so the ensemble always contains a linear metric as its simplest
member.

Parameters are mutated only by the trainer, which holds exclusive access
during a step; ``forward`` never writes, so concurrent reads of a shared
``ParameterSet`` are safe.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError

# Norm floor for the unit-sphere projection.  Raw embeddings with a smaller
# norm are flagged degenerate and divided by the floor instead of their norm,
# so a zero activation never turns into a division blowup.
EPS_NORM = 1e-12

# Admissible upper limit for the bound-control parameter (exclusive).
TAU_MAX = 2.0 / 3.0

_SEED_MAX = 2**64 - 1


@dataclass(frozen=True)
class ModelConfig:
    """Hyper-parameters of one model instance.

    ``input_dim``/``hidden_layers``/``hidden_units``/``embedding_dim`` fix the
    topology; ``tau`` controls the adaptive loss bounds and must stay below
    2/3 for the class-separation guarantee to hold; ``beta`` and ``smoothing``
    drive the ensemble-weight update; ``learning_rate`` scales the
    per-constraint gradient step.  Defaults follow the reference experimental
    setup.
    """

    input_dim: int
    hidden_layers: int = 5
    hidden_units: int = 100
    embedding_dim: int = 50
    tau: float = 0.1
    beta: float = 0.99
    smoothing: float = 0.1
    learning_rate: float = 0.3
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Raise ConfigError naming the first offending field."""
        for name in ("input_dim", "hidden_units", "embedding_dim"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
        if not isinstance(self.hidden_layers, (int, np.integer)) or self.hidden_layers < 0:
            raise ConfigError(f"hidden_layers must be an integer >= 0, got {self.hidden_layers!r}")
        if not 0.0 < self.tau < TAU_MAX:
            raise ConfigError(f"tau must lie in (0, 2/3), got {self.tau!r}")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta!r}")
        if not 0.0 < self.smoothing < 1.0:
            raise ConfigError(f"smoothing must lie in (0, 1), got {self.smoothing!r}")
        # learning_rate 0 is admitted as a degenerate value: it freezes the
        # matrices while the weight update keeps running, which is useful for
        # isolating the two update paths.
        if not isinstance(self.learning_rate, (int, float)) or not self.learning_rate >= 0.0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate!r}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed <= _SEED_MAX:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @property
    def depths(self) -> int:
        """Number of metric models in the ensemble (hidden layers plus one)."""
        return self.hidden_layers + 1

    def layer_input_width(self, layer: int) -> int:
        """Input width of hidden layer ``layer`` (1-based)."""
        return self.input_dim if layer == 1 else self.hidden_units

    def head_input_width(self, depth: int) -> int:
        """Input width of the embedding head at ``depth``."""
        return self.input_dim if depth == 0 else self.hidden_units

    def scalars(self) -> dict:
        """Plain-dict view, used for config echoing in output artifacts."""
        return {
            "input_dim": self.input_dim,
            "hidden_layers": self.hidden_layers,
            "hidden_units": self.hidden_units,
            "embedding_dim": self.embedding_dim,
            "tau": self.tau,
            "beta": self.beta,
            "smoothing": self.smoothing,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
        }


@dataclass
class ParameterSet:
    """Learnable state of the ensemble.

    ``hidden[i]`` maps activation ``i`` to the pre-activation of layer
    ``i + 1`` (shape ``hidden_units x prior width``); ``heads[l]`` maps
    activation ``l`` to the raw embedding (shape ``prior width x
    embedding_dim``); ``depth_weights`` holds the simplex-normalized
    importance of each depth.
    """

    hidden: list[np.ndarray]
    heads: list[np.ndarray]
    depth_weights: np.ndarray

    @property
    def depths(self) -> int:
        return len(self.heads)

    def copy(self) -> "ParameterSet":
        return ParameterSet(
            hidden=[m.copy() for m in self.hidden],
            heads=[m.copy() for m in self.heads],
            depth_weights=self.depth_weights.copy(),
        )

    def parameter_count(self) -> int:
        """Total number of learnable scalars, weight vector included."""
        return sum(m.size for m in self.hidden) + sum(m.size for m in self.heads) + self.depth_weights.size

    def fingerprint(self) -> str:
        """Content hash binding caches (e.g. reference stores) to this state."""
        digest = hashlib.sha256()
        for m in (*self.hidden, *self.heads):
            digest.update(np.asarray(m.shape, dtype="<u4").tobytes())
            digest.update(np.ascontiguousarray(m, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(self.depth_weights, dtype="<f8").tobytes())
        return digest.hexdigest()

    def validate_shapes(self, config: ModelConfig) -> None:
        if len(self.hidden) != config.hidden_layers or len(self.heads) != config.depths:
            raise ConfigError(
                f"parameter set has {len(self.hidden)} hidden / {len(self.heads)} head "
                f"matrices, config expects {config.hidden_layers} / {config.depths}"
            )
        for layer, m in enumerate(self.hidden, start=1):
            want = (config.hidden_units, config.layer_input_width(layer))
            if m.shape != want:
                raise ConfigError(f"hidden matrix {layer} has shape {m.shape}, expected {want}")
        for depth, m in enumerate(self.heads):
            want = (config.head_input_width(depth), config.embedding_dim)
            if m.shape != want:
                raise ConfigError(f"head matrix {depth} has shape {m.shape}, expected {want}")
        if self.depth_weights.shape != (config.depths,):
            raise ConfigError(
                f"depth_weights has shape {self.depth_weights.shape}, expected ({config.depths},)"
            )


@dataclass
class ForwardTrace:
    """Everything one forward pass produced for a single input.

    ``activations[0]`` is the input itself; ``preacts`` holds the pre-ReLU
    values of each hidden layer; ``embeddings[l]`` is the unit-sphere
    embedding at depth ``l``.  A depth is flagged degenerate when its raw
    embedding norm fell below the projection floor, in which case the stored
    embedding is the floored quotient (well defined, but not unit norm).
    """

    activations: list[np.ndarray]
    preacts: list[np.ndarray]
    raw_embeddings: list[np.ndarray]
    embeddings: list[np.ndarray]
    norms: np.ndarray
    degenerate: np.ndarray


def _scaled_uniform(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    # Symmetric uniform with variance-preserving scale sqrt(6/(fan_in+fan_out)).
    bound = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-bound, bound, size=shape)


def init_model(config: ModelConfig) -> ParameterSet:
    """Build a freshly initialized parameter set.

    Depth weights start uniform at 1/(L+1).  Matrices are drawn in a fixed
    order (hidden 1..L, then heads 0..L) from a seeded generator, so an
    identical config reproduces a bit-identical parameter set.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    hidden = [
        _scaled_uniform(rng, (config.hidden_units, config.layer_input_width(layer)))
        for layer in range(1, config.hidden_layers + 1)
    ]
    heads = [
        _scaled_uniform(rng, (config.head_input_width(depth), config.embedding_dim))
        for depth in range(config.depths)
    ]
    weights = np.full(config.depths, 1.0 / config.depths)
    return ParameterSet(hidden=hidden, heads=heads, depth_weights=weights)


def forward(params: ParameterSet, x) -> ForwardTrace:
    """Run one input through every depth of the ensemble.

    Pure function of ``(params, x)``: identical arguments produce identical
    traces, and ``params`` is never written.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"input must be a 1-d feature vector, got shape {x.shape}")
    expected = params.heads[0].shape[0]
    if x.shape[0] != expected:
        raise ValueError(f"input has length {x.shape[0]}, model expects {expected}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")

    activations = [x]
    preacts: list[np.ndarray] = []
    raw: list[np.ndarray] = []
    embeddings: list[np.ndarray] = []
    norms = np.empty(params.depths)
    degenerate = np.zeros(params.depths, dtype=bool)

    h = x
    for depth in range(params.depths):
        if depth > 0:
            z = params.hidden[depth - 1] @ h
            preacts.append(z)
            h = np.maximum(z, 0.0)
            activations.append(h)
        g = h @ params.heads[depth]
        n = float(np.linalg.norm(g))
        norms[depth] = n
        degenerate[depth] = n < EPS_NORM
        raw.append(g)
        embeddings.append(g / max(n, EPS_NORM))

    return ForwardTrace(
        activations=activations,
        preacts=preacts,
        raw_embeddings=raw,
        embeddings=embeddings,
        norms=norms,
        degenerate=degenerate,
    )


def space_estimate(config: ModelConfig) -> int:
    """Upper-bound space budget of the architecture.

    Counts the input head, a per-layer hidden + head cost, and the
    cross-layer hidden matrices; intentionally an upper bound rather than
    the exact parameter count.
    """
    d = config.input_dim
    layers = config.hidden_layers
    units = config.hidden_units
    emb = config.embedding_dim
    return d * emb + layers * units * (d + emb) + layers * (layers - 1) // 2 * units * units


def with_seed(config: ModelConfig, seed: int) -> ModelConfig:
    """Copy of ``config`` with a different seed (handy for trial sweeps)."""
    return replace(config, seed=seed)
