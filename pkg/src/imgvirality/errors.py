"""Exception types shared across the package."""


class ViralityError(ValueError):
    """A data or usage error carrying a machine-readable ``code``.

    The code is a short upper-case token such as ``EMPTY_INPUT`` or
    ``K_TOO_LARGE``; the command line prints it prefixed with ``E_``.
    """

    def __init__(self, code, message=""):
        self.code = code
        self.message = message
        super().__init__(f"{code}: {message}" if message else code)


class InvariantViolation(RuntimeError):
    """Raised when an internal consistency check fails (a bug, not bad data)."""

    code = "INVARIANT"
