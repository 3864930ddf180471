"""Shared exception types.

Every numerical precondition failure maps to one of these classes so that
callers (and the verify harness) can tell configuration mistakes apart from
genuine degeneracies such as zero-mass states or empty codes.
"""

from __future__ import annotations


class CoderError(Exception):
    """Base class for all package-specific errors."""


class InvalidDistribution(CoderError, ValueError):
    """A probability vector or transition matrix violates its invariants."""


class DimensionMismatch(CoderError, ValueError):
    """Operands have incompatible alphabet sizes or vector dimensions."""


class SupportMismatch(CoderError, ValueError):
    """The source puts mass where the model has exactly zero probability.

    Raised instead of returning +inf: silent infinities poison optimization
    traces.  Callers that want a finite surrogate must clamp the model
    vector explicitly before calling.
    """


class ZeroMarginal(CoderError, ValueError):
    """Bayes reversal undefined: some output symbol has zero probability."""


class CapExceeded(CoderError, ValueError):
    """An enumeration would exceed the configured joint-state cell cap."""


class NotDeterministic(CoderError, ValueError):
    """A transition matrix expected to be deterministic has a stochastic column."""


class DeadCode(CoderError, RuntimeError):
    """One or more code indices received zero total responsibility."""

    def __init__(self, indices) -> None:
        self.indices = tuple(int(i) for i in indices)
        super().__init__(f"code indices with zero responsibility: {self.indices}")


class DeadModel(CoderError, RuntimeError):
    """A recognition model in a partitioned mixture has zero evidence."""

    def __init__(self, model: int) -> None:
        self.model = int(model)
        super().__init__(f"recognition model {self.model} has zero evidence")


class ZeroEvidence(CoderError, RuntimeError):
    """The pooled denominator over all recognition models vanished."""


class SchemaError(CoderError, ValueError):
    """A config or spec file failed validation before any computation ran."""
