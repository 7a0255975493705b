"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, DataError and
subclasses exit 2, TransportError and subclasses exit 3.
"""

from __future__ import annotations


class KgreasonError(Exception):
    """Base class for package errors."""


class DataError(KgreasonError):
    """Bad input data: malformed files, unknown handles, id mismatches."""


class GraphParseError(DataError):
    """Malformed triple-file content, with the offending line number."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class UnknownHandleError(DataError):
    """An entity or relation handle is not valid in the owning graph."""


class UngroundedPlanError(DataError):
    """A relation path references labels absent from the graph vocabulary.

    Distinct from "grounded but zero matches", which is an empty result,
    not an error.
    """

    def __init__(self, unknown_labels):
        self.unknown_labels = tuple(unknown_labels)
        super().__init__(
            "plan contains relations unknown to the graph: "
            + ", ".join(self.unknown_labels)
        )


class TransportError(KgreasonError):
    """Endpoint unreachable or persistently failing; carries the attempt log."""

    def __init__(self, message: str, attempts=()):
        self.attempts = list(attempts)
        if self.attempts:
            message = f"{message} (attempts: {'; '.join(self.attempts)})"
        super().__init__(message)


class ProtocolError(TransportError):
    """Endpoint replied, but the body does not follow the chat-completions shape."""

    def __init__(self, message: str, body: str = ""):
        self.body = body
        super().__init__(message)
