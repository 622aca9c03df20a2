"""Exception types shared across the package.

Everything subclasses ValueError so callers that do not care about the
distinction can catch a single type; the CLI maps any of these to a
nonzero exit status.
"""


class ConfigError(ValueError):
    """A hyper-parameter is outside its admissible range."""


class CheckpointFormatError(ValueError):
    """Checkpoint file does not carry the expected magic bytes or version."""


class CheckpointCorruptError(ValueError):
    """Checkpoint file ends before (or after) the declared payload."""


class DatasetError(ValueError):
    """A dataset file cannot be parsed into labeled feature rows."""


class GenerationError(ValueError):
    """The dataset cannot support the requested constraint generation."""


class StaleStoreError(ValueError):
    """A reference store was built from different parameters than supplied."""


class MetricError(ValueError):
    """An evaluation metric is undefined for the given inputs."""
