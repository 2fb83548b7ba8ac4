"""Exception types raised across the toolkit."""


class OlfalignError(Exception):
    """Base class for all toolkit errors."""


class SchemaError(OlfalignError):
    """A file or value violates the canonical schema."""


class IngestError(OlfalignError):
    """An input file could not be ingested (shape, duplicates, non-finite)."""


class JoinError(OlfalignError):
    """Embedding table and perceptual data share no resolvable odorants."""


class OdorantLookupError(OlfalignError):
    """One or more component molecule ids are missing from a table."""

    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"missing molecule ids: {', '.join(self.missing)}")


class DimensionMismatchError(OlfalignError):
    """Operand shapes are incompatible."""


class DegenerateTargetError(OlfalignError):
    """A training target is single-class or constant."""


class UndefinedMetricError(OlfalignError):
    """The requested metric is undefined for this input (constant vector,
    single-class pool, zero range, zero-norm vector)."""


class SelectionError(OlfalignError):
    """Cross-validation could not score any hyperparameter candidate."""
