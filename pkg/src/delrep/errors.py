"""Domain error types. The CLI maps every DomainError to exit code 1 with a
single machine-parseable line on stderr; anything else is a genuine bug."""


class DomainError(ValueError):
    """Base class for recoverable, input-dependent failures."""

    code = "domain-error"


class InvalidInputError(DomainError):
    code = "invalid-input"


class OutOfWindowError(DomainError):
    """A query region is not fully covered by the window of known points."""

    code = "out-of-window"


class PartitionError(DomainError):
    """A substitution rule fails to partition its prototile exactly."""

    code = "partition-error"


class NormalizationError(DomainError):
    """A prototile does not have unit volume."""

    code = "normalization-error"


class StructuralError(DomainError):
    """A set-system expression tree violates disjointness, containment or
    single-use of its dyadic cube leaves."""

    code = "structural-error"


class ContractError(DomainError):
    """A weight distribution violated its declared boundedness constant."""

    code = "contract-error"


class PrecisionError(DomainError):
    """A certified comparison could not be resolved at maximum precision."""

    code = "precision-error"


class InsufficientDataError(DomainError):
    code = "insufficient-data"


class InfeasibleScaleError(DomainError):
    """No probe position fits inside the window at a requested scale."""

    code = "infeasible-scale"
