"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ClaimTreeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(ClaimTreeError, ValueError):
    """An argument violates a documented precondition."""


class UnknownNodeError(ClaimTreeError, KeyError):
    """A node id does not exist in the tree."""


class NodeStateError(ClaimTreeError):
    """An operation is not permitted in the node's current state."""


class DoubleFinalizeError(NodeStateError):
    """The node already carries a final verdict."""


class MissingReferencesError(NodeStateError):
    """A grounded leaf verdict requires at least one evidence reference."""


class BudgetExhaustedError(ClaimTreeError):
    """The operation would exceed the tree's exploration budget."""


class TreeInvariantError(ClaimTreeError):
    """A persisted tree violates a structural invariant."""


class SchemaVersionError(ClaimTreeError):
    """A persisted artifact carries an unsupported schema version."""


class ExtractionFailedError(ClaimTreeError):
    """Claim extraction produced no usable structured output."""


class BackendError(ClaimTreeError):
    """Base class for model-backend failures."""


class TransportError(BackendError):
    """The backend endpoint could not be reached (retriable)."""


class BackendTimeoutError(TransportError):
    """The backend did not answer within the configured timeout."""


class SchemaValidationError(BackendError):
    """The backend reply did not match the role's response schema."""


class FixtureError(BackendError):
    """A scripted fixture file is malformed."""


class FixtureGapError(FixtureError):
    """No scripted entry exists for the requested prompt digest."""


class EvidenceUnavailableError(ClaimTreeError):
    """A tool could not produce evidence for the query."""


class CalculatorError(ClaimTreeError):
    """A calculator expression failed to parse or evaluate."""


class ToolTransportError(ClaimTreeError):
    """A retrieval tool's transport failed (retriable)."""


class DuplicateIdError(ClaimTreeError):
    """Two items share an identifier that must be unique."""


class InapplicableOperatorError(ClaimTreeError):
    """The falsification operator cannot be applied to this claim."""


class CurationCheckError(ClaimTreeError):
    """A curated record failed its containment check."""


class AlignmentError(ClaimTreeError):
    """Predicted and gold claim sets cannot be aligned in fixed mode."""


class UndefinedMetricError(ClaimTreeError):
    """The metric is undefined for an empty alignment."""


class PartialRunError(ClaimTreeError):
    """A verification run stopped early; partial artifacts were persisted."""

    def __init__(self, message: str, resume_token: str):
        super().__init__(message)
        self.resume_token = resume_token
