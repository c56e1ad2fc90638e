"""Exception types shared across the package."""


class PcmiError(Exception):
    """Base class for all package errors."""


class LengthMismatch(PcmiError):
    """The four per-token log-prob lists do not have equal length."""


class EmptySequence(PcmiError):
    """A scored response has zero tokens."""


class DegenerateTotal(PcmiError):
    """Attribution denominator is too close to zero."""


class InvalidSpan(PcmiError):
    """A token span is out of range, empty, or overlapping."""


class EmptyCorpus(PcmiError):
    """No training instances supplied."""


class SpecMismatch(PcmiError):
    """A model was queried with a context spec it was not trained for."""


class InvalidDistribution(PcmiError):
    """A probability vector does not sum to 1 (or has negative mass)."""


class NotFound(PcmiError):
    """Requested replay record does not exist."""


class TransportError(PcmiError):
    """HTTP backend could not reach the LM server."""


class MalformedResponse(PcmiError):
    """LM server returned a payload that violates the wire contract."""


class AlignmentMismatch(PcmiError):
    """Token counts disagree across backends or context specs."""


class EmptyPool(PcmiError):
    """Candidate pool has no candidates."""


class InsufficientData(PcmiError):
    """Not enough values to calibrate thresholds."""


class IndexOutOfRange(PcmiError):
    """Candidate index outside the pool."""


class PoolTooSmall(PcmiError):
    """Pool has fewer candidates than the experiment requires."""


class WrongAnnotationCount(PcmiError):
    """A pair must have exactly three annotations for aggregation."""


class InvalidCounts(PcmiError):
    """Binomial test inputs violate 0 <= K <= n."""


class EmptyGroup(PcmiError):
    """Distribution summary requested for an empty group."""


class NoSpans(PcmiError):
    """Attribution report requested but no spans were annotated."""


class InsufficientEntities(PcmiError):
    """Fewer than three entities; cannot produce disjoint splits."""


class ConfigError(PcmiError):
    """Pipeline configuration failed validation."""


class InputMissing(PcmiError):
    """A required input file does not exist."""
