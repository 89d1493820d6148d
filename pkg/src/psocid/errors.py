"""Exception hierarchy. Every domain failure derives from PsocidError."""


class PsocidError(Exception):
    pass


class DomainError(PsocidError, ValueError):
    """An argument lies outside the operation's mathematical domain."""


class ProtocolViolation(PsocidError):
    """A schedule was asked for more fresh candidates than it has left."""


class ScriptError(ProtocolViolation):
    """A scripted schedule is malformed or shorter than the demand."""


class CapacityError(PsocidError):
    """The requested size exceeds what exact enumeration/simulation allows."""


class UnsupportedError(PsocidError):
    """The operation is not defined for the given schedule kind."""
