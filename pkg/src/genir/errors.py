"""Exception hierarchy shared across the package."""


class GenIRError(Exception):
    """Base class for all errors raised by this package."""


# --- vector / index errors ---------------------------------------------------

class DimensionMismatch(GenIRError):
    pass


class ZeroVector(GenIRError):
    pass


class NonFinite(GenIRError):
    pass


class DuplicateId(GenIRError):
    def __init__(self, offending_id: str):
        super().__init__(f"duplicate id: {offending_id!r}")
        self.offending_id = offending_id


class EmptyInput(GenIRError):
    pass


class EmptyIndex(GenIRError):
    pass


class UnknownTarget(GenIRError):
    pass


# --- index file format errors ------------------------------------------------

class BadMagic(GenIRError):
    pass


class UnsupportedVersion(GenIRError):
    pass


class TruncatedFile(GenIRError):
    pass


# --- gateway errors ----------------------------------------------------------

class GatewayError(GenIRError):
    """Base for errors talking to a model backend."""

    def __init__(self, message: str, stage: str = ""):
        super().__init__(message)
        self.stage = stage


class BackendUnavailable(GatewayError):
    pass


class BackendTimeout(GatewayError):
    pass


class MalformedResponse(GatewayError):
    pass


class PromptTooLong(GatewayError):
    pass


class MissingFeedback(GatewayError):
    pass


# --- session errors ----------------------------------------------------------

class InvalidConfig(GenIRError):
    pass


class SessionFinished(GenIRError):
    pass


class EmptyQuery(GenIRError):
    pass


class WrongMode(GenIRError):
    pass


# --- trajectory file errors --------------------------------------------------

class MalformedLine(GenIRError):
    def __init__(self, line_number: int, reason: str = ""):
        msg = f"malformed trajectory line {line_number}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.line_number = line_number


class SchemaVersionUnsupported(GenIRError):
    pass


# --- evaluation errors -------------------------------------------------------

class EmptyTraceSet(GenIRError):
    pass


class InconsistentHorizon(GenIRError):
    pass


class OutOfRange(GenIRError):
    pass


class UnpairedSessions(GenIRError):
    pass
