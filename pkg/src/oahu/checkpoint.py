"""Binary checkpoint serialization.

Layout, all little-endian:

* magic bytes ``OAHU``
* format version, u32 (currently 1)
* config scalars: counts ``input_dim``, ``hidden_layers``, ``hidden_units``,
  ``embedding_dim`` as u32; reals ``tau``, ``beta``, ``smoothing``,
  ``learning_rate`` as IEEE-754 f64; ``seed`` as u64
* each matrix as (u32 rows, u32 cols, row-major f64 values): the hidden
  list, then the head list, then the depth-weight vector as a single-row
  matrix.

The encoding has no timestamps or padding, so saving the same model twice
produces byte-identical files and the round trip is bit-exact.
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np

from .errors import CheckpointCorruptError, CheckpointFormatError
from .model import ModelConfig, ParameterSet

MAGIC = b"OAHU"
VERSION = 1

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_F64 = struct.Struct("<d")


def _write_matrix(fh: BinaryIO, m: np.ndarray) -> None:
    if m.ndim == 1:
        m = m.reshape(1, -1)
    fh.write(_U32.pack(m.shape[0]))
    fh.write(_U32.pack(m.shape[1]))
    fh.write(np.ascontiguousarray(m, dtype="<f8").tobytes())


def _read_exact(fh: BinaryIO, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise CheckpointCorruptError(f"checkpoint truncated while reading {what}")
    return data


def _read_u32(fh: BinaryIO, what: str) -> int:
    return _U32.unpack(_read_exact(fh, 4, what))[0]


def _read_matrix(fh: BinaryIO, what: str) -> np.ndarray:
    rows = _read_u32(fh, f"{what} rows")
    cols = _read_u32(fh, f"{what} cols")
    payload = _read_exact(fh, rows * cols * 8, f"{what} values")
    return np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(float)


def save_checkpoint(params: ParameterSet, config: ModelConfig, path) -> None:
    """Serialize parameters plus config; the round trip is bit-exact."""
    params.validate_shapes(config)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_U32.pack(VERSION))
        fh.write(_U32.pack(config.input_dim))
        fh.write(_U32.pack(config.hidden_layers))
        fh.write(_U32.pack(config.hidden_units))
        fh.write(_U32.pack(config.embedding_dim))
        fh.write(_F64.pack(config.tau))
        fh.write(_F64.pack(config.beta))
        fh.write(_F64.pack(config.smoothing))
        fh.write(_F64.pack(config.learning_rate))
        fh.write(_U64.pack(config.seed))
        for m in params.hidden:
            _write_matrix(fh, m)
        for m in params.heads:
            _write_matrix(fh, m)
        _write_matrix(fh, params.depth_weights)


def load_checkpoint(path) -> tuple[ParameterSet, ModelConfig]:
    """Read a checkpoint back; fails loudly rather than returning a partial model."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointFormatError(f"not a model checkpoint (magic {magic!r})")
        version = _read_u32(fh, "version")
        if version != VERSION:
            raise CheckpointFormatError(f"unsupported checkpoint version {version}")

        input_dim = _read_u32(fh, "input_dim")
        hidden_layers = _read_u32(fh, "hidden_layers")
        hidden_units = _read_u32(fh, "hidden_units")
        embedding_dim = _read_u32(fh, "embedding_dim")
        tau, beta, smoothing, learning_rate = (
            _F64.unpack(_read_exact(fh, 8, name))[0]
            for name in ("tau", "beta", "smoothing", "learning_rate")
        )
        seed = _U64.unpack(_read_exact(fh, 8, "seed"))[0]
        config = ModelConfig(
            input_dim=input_dim,
            hidden_layers=hidden_layers,
            hidden_units=hidden_units,
            embedding_dim=embedding_dim,
            tau=tau,
            beta=beta,
            smoothing=smoothing,
            learning_rate=learning_rate,
            seed=seed,
        )

        hidden = [_read_matrix(fh, f"hidden matrix {i + 1}") for i in range(hidden_layers)]
        heads = [_read_matrix(fh, f"head matrix {i}") for i in range(hidden_layers + 1)]
        weights = _read_matrix(fh, "depth weights").reshape(-1)
        if fh.read(1):
            raise CheckpointCorruptError("trailing data after checkpoint payload")

    params = ParameterSet(hidden=hidden, heads=heads, depth_weights=weights)
    try:
        params.validate_shapes(config)
    except ValueError as exc:
        raise CheckpointCorruptError(f"checkpoint payload inconsistent: {exc}") from exc
    return params, config
