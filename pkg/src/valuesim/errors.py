"""Exception taxonomy shared across the pipeline, with CLI exit codes."""

from __future__ import annotations


class ValuesimError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(ValuesimError):
    """Invalid or missing configuration value."""


class ParseError(ValuesimError):
    """A record in an input file could not be parsed.

    Carries the 1-based line number when the source is line-oriented.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(ValuesimError):
    """Records parsed individually but are mutually inconsistent."""


class PreconditionError(ValuesimError):
    """An operation was called with arguments outside its contract."""


class EmptyCellError(ValuesimError):
    """A cohort cell has no substantive answers to aggregate."""


class EmbeddingMissError(ValuesimError):
    """A precomputed vector store has no entry for the requested text."""


class ContractError(ValuesimError):
    """An upstream component handed us data violating an internal invariant."""


class ImpactParseError(ValuesimError):
    """A model response contained no parseable impact records."""


class UndefinedMetricError(ValuesimError):
    """A metric was requested over an empty population."""


class TransportError(ValuesimError):
    """A backend request failed.

    ``retryable`` marks failures worth retrying (rate limits, 5xx,
    connection drops); others are permanent for the request.
    """

    def __init__(self, message: str, status: int | None = None, retryable: bool = False):
        super().__init__(message)
        self.status = status
        self.retryable = retryable


class MockMissError(TransportError):
    """A canned backend has no scripted response for the prompt."""

    def __init__(self, message: str):
        super().__init__(message, status=None, retryable=False)


class AbortedRunError(ValuesimError):
    """A simulation exceeded its failure ceiling and was stopped early."""

    def __init__(self, message: str, partial_manifest: dict | None = None):
        super().__init__(message)
        self.partial_manifest = partial_manifest


class MissingArtifactError(ValuesimError):
    """A pipeline stage needs an artifact another command has not produced."""

    def __init__(self, message: str, required_command: str):
        super().__init__(f"{message} (run `valuesim {required_command}` first)")
        self.required_command = required_command


# Exit codes for the command-line surface.  0 is success, 1 is reserved for
# unexpected (non-ValuesimError) exceptions.
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DEPENDENCY = 3
EXIT_PARSE = 4
EXIT_BACKEND = 5
EXIT_PIPELINE = 6


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, MissingArtifactError):
        return EXIT_DEPENDENCY
    if isinstance(exc, (ParseError, SchemaError)):
        return EXIT_PARSE
    if isinstance(exc, TransportError):
        return EXIT_BACKEND
    if isinstance(exc, ValuesimError):
        return EXIT_PIPELINE
    return EXIT_UNEXPECTED
