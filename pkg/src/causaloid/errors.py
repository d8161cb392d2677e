"""Exception types raised across the package.

Every failure mode that callers are expected to handle gets its own class so
CLI exit-code mapping and tests can discriminate without string matching.
"""
from __future__ import annotations


class CausaloidError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(CausaloidError):
    """A document (scenario, causaloid, report) violates its schema."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class IoError(CausaloidError):
    """A file could not be read or written."""


class BackendError(CausaloidError):
    """Instrument, preparation, or effect data is not physically valid."""


class DimensionMismatch(CausaloidError):
    """Operator shapes are inconsistent with the declared system size."""


class UnknownRegion(CausaloidError):
    """A region is not part of the object it is used with."""


class UnknownLabel(CausaloidError):
    """A measurement label is outside the region's label set."""


class UnknownExterior(CausaloidError):
    """An exterior-configuration index is out of range."""


class UnknownProcedure(CausaloidError):
    """An action index is outside the instrument family."""


class UnknownEntry(CausaloidError):
    """A diagram expression references an entry the causaloid lacks."""


class MissingEntry(CausaloidError):
    """No compression matrix is stored for a key and no rule applies."""


class ContextMismatch(CausaloidError):
    """Vectors or entries built over different fiducial sets were combined."""


class IncompleteTable(CausaloidError):
    """A probability table does not cover the requested region."""


class TableTooLarge(CausaloidError):
    """A requested table would exceed the configured entry cap."""


class ResidualTooLarge(CausaloidError):
    """A row could not be reconstructed from the fiducial rows."""


class SingularTransform(CausaloidError):
    """A fiducial-set change requires inverting an ill-conditioned block."""


class SpanDeficient(CausaloidError):
    """The declared exterior set does not span the reachable state space."""


class DegenerateExterior(CausaloidError):
    """A joint table has no exterior variation to compress against."""


class ZeroConditionCount(CausaloidError):
    """No sampled stack matches the conditioning event."""


class ZeroDenominator(CausaloidError):
    """A conditional is requested on an event of probability zero."""


class ZeroDenominatorVector(CausaloidError):
    """The heralding denominator vector vanishes."""


class RuleInapplicable(CausaloidError):
    """A meta-compression rule cannot be applied to the given causaloid."""
