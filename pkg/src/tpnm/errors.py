"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
exit-code families (2 parse, 3 numeric, 4 usage, 5 domain) without a lookup
table.
"""


class TPNMError(Exception):
    exit_code = 1


class ParseError(TPNMError):
    """Malformed input file; ``line`` is 1-based when known."""

    exit_code = 2

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip() if where else message)


class NumericError(TPNMError):
    exit_code = 3


class NonFinite(NumericError):
    pass


class UsageError(TPNMError):
    exit_code = 4


class DomainError(TPNMError):
    exit_code = 5


class ValidationError(DomainError):
    pass


class EmptySequence(ValidationError):
    pass


class NonMonotonicTimestamps(ValidationError):
    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"timestamps not strictly increasing at index {index}")


class DuplicateTimestamp(NonMonotonicTimestamps):
    pass


class UnknownNode(ValidationError):
    def __init__(self, node, message=None):
        self.node = node
        super().__init__(message or f"node {node!r} is not in the node catalog")


class SchemeMismatch(DomainError):
    pass


class DimensionMismatch(DomainError):
    pass


class IndexOutOfRange(DomainError):
    pass


class InvalidBeta(DomainError):
    pass


class EmptyInfluence(DomainError):
    pass


class QueryBeforeLastEvent(DomainError):
    pass


class LengthMismatch(DomainError):
    pass


class EmptyInput(DomainError):
    pass


class InstanceTooShort(DomainError):
    pass


class TooFewInstances(DomainError):
    pass


class NoAbsorbingState(DomainError):
    pass
