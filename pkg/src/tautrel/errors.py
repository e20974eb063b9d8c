"""Error taxonomy shared by all modules.

Two failure families matter to callers: bad inputs (exit code 2 at the CLI)
and internal consistency violations that signal an arithmetic or convention
bug rather than user error (exit code 3 at the CLI).
"""


class TautrelError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(TautrelError, ValueError):
    """Inputs violate a documented precondition (unstable (g,n), bad sigma, ...)."""


class InternalConsistencyError(TautrelError, RuntimeError):
    """A self-check failed: nonzero division remainder, prime disagreement, ...

    These are never caused by user input; they indicate a bug and abort the run.
    """
