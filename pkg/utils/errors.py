"""
Error hierarchy for the leafaug pipeline.

Configuration problems map to exit code 2, data problems to exit code 3.
Domain errors also derive from ValueError.
"""
from typing import Optional


class LeafAugError(Exception):
    """Base class for every error raised on purpose by the pipeline."""


class ConfigError(LeafAugError, ValueError):
    """Invalid configuration file, value or command-line usage."""


class UsageError(ConfigError):
    """Unknown subcommand argument, such as an augmentation name."""


class DataError(LeafAugError, ValueError):
    """Input data violates a precondition of an operation."""


class ManifestError(DataError):
    """Manifest file cannot be loaded or saved."""


class SchemaError(ManifestError):
    """Manifest does not parse against the schema."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{message} (field: {field})"
        super().__init__(message)


class DuplicateIdError(ManifestError):
    """Two samples share the same id."""

    def __init__(self, sample_id: str):
        self.sample_id = sample_id
        super().__init__(f"duplicate sample id '{sample_id}'")


class InvariantError(ManifestError):
    """A manifest-level invariant does not hold."""


class MissingImageError(DataError):
    """An image referenced by a sample does not exist."""

    def __init__(self, sample_id: str, path: str):
        self.sample_id = sample_id
        self.path = path
        super().__init__(f"sample '{sample_id}': image not found at {path}")


class SplitError(DataError):
    """Split or resplit precondition failed."""


class PlanInfeasibleError(DataError):
    """Balancing cannot be carried out with the given counts or pool."""


class DegeneratePolygonError(DataError):
    """Polygon has fewer than three points."""


class ShapeMismatchError(DataError):
    """Array dimensions do not agree."""


class PredictionDomainError(DataError):
    """Discriminator prediction outside the open interval (0, 1)."""


class NonFiniteError(DataError):
    """A loss component or training quantity is NaN or infinite."""


class PerplexityError(DataError):
    """Bandwidth search cannot reach the requested perplexity for a row."""

    def __init__(self, row: int, perplexity: float, achieved: float):
        self.row = row
        super().__init__(
            f"row {row}: perplexity {perplexity} unreachable "
            f"(closest achieved {achieved:.6g})"
        )


class TrainingDivergedError(DataError):
    """Reference classifier training produced a non-finite or increased loss."""
