"""Exception types shared across the toolkit."""


class SfmuError(Exception):
    """Base class for all toolkit errors."""


class NotPositiveDefinite(SfmuError):
    """A factorization hit a non-positive pivot."""


class DimensionMismatch(SfmuError):
    """Operands have incompatible shapes."""


class BadMagic(SfmuError):
    """A binary file does not start with the expected magic bytes."""


class TruncatedFile(SfmuError):
    """A binary file ended before its declared payload."""


class LabelOutOfRange(SfmuError):
    """A label index is >= the declared class count."""


class FractionOutOfRange(SfmuError):
    """A split fraction is outside (0, 1) or yields an empty subset."""


class NotConverged(SfmuError):
    """An iterative solver exhausted its iteration budget."""


class SingularSystem(SfmuError):
    """A linear system required for training has no unique solution."""


class EmptyIndexSet(SfmuError):
    """An evaluation was requested over zero samples."""


class DivergenceDetected(SfmuError):
    """A baseline fine-tuning loop blew up."""


class RankDeficientProbes(UserWarning):
    """Fewer probes than symmetric unknowns; the estimate is still produced."""
