"""Exception hierarchy shared by all ehs modules."""


class EHSError(Exception):
    """Base class for errors raised by ehs."""


class FrameError(EHSError, ValueError):
    """Invalid nome/precision frame (|p| >= 1, q = 0, precision < 64)."""


class DomainError(EHSError, ValueError):
    """An argument lies outside the domain of an operation (e.g. theta(0))."""


class SingularError(DomainError):
    """A denominator factor vanishes for some summation index.

    ``context`` holds whatever locates the offending factor, typically the
    position ``k``, parameter index ``j`` and summation index ``y``.
    """

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def __str__(self):
        msg = super().__str__()
        if self.context:
            detail = ", ".join(f"{k}={v!r}" for k, v in self.context.items())
            msg = f"{msg} ({detail})"
        return msg


class SamplingError(EHSError, RuntimeError):
    """No acceptable random instance found within the resample budget."""


class ConsistencyError(EHSError, RuntimeError):
    """Two evaluation paths that must agree exactly did not."""
